use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::SchemaError;

/// One step of a schema path, optionally qualified with a module name or prefix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Segment {
    pub prefix: Option<String>,
    pub name: String,
}

impl Segment {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            prefix: None,
            name: name.into(),
        }
    }

    pub fn qualified(prefix: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            prefix: Some(prefix.into()),
            name: name.into(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let text = text.trim();
        let (prefix, name) = match text.split_once(':') {
            Some((p, n)) => (Some(p.to_string()), n.to_string()),
            None => (None, text.to_string()),
        };
        if name.is_empty() || prefix.as_deref() == Some("") {
            return Err(SchemaError::InvalidPath(text.to_string()));
        }
        Ok(Self { prefix, name })
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.prefix {
            Some(p) => write!(f, "{p}:{}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

/// Path through the schema tree.
///
/// Absolute paths have `relative_ups == 0` and `absolute == true`. Relative
/// paths (as used by leafrefs) start with `relative_ups` parent steps.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SchemaPath {
    pub segments: Vec<Segment>,
    pub relative_ups: usize,
    pub absolute: bool,
}

impl SchemaPath {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self {
            segments,
            relative_ups: 0,
            absolute: true,
        }
    }

    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::new(
            names
                .into_iter()
                .map(|n| Segment::new(n.as_ref()))
                .collect(),
        )
    }

    /// Parses the segment-list wire form (`["mod:a", "b"]`).
    pub fn from_segments<I, S>(items: I) -> Result<Self, SchemaError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let segments = items
            .into_iter()
            .map(|s| Segment::parse(s.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        if segments.is_empty() {
            return Err(SchemaError::InvalidPath(String::new()));
        }
        Ok(Self::new(segments))
    }

    /// Parses the string form `a/b/c`, `/p:a/p:b` or `../../x/y`.
    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let trimmed: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if trimmed.is_empty() {
            return Err(SchemaError::InvalidPath(text.to_string()));
        }
        let absolute = trimmed.starts_with('/');
        let body = trimmed.trim_start_matches('/');
        let mut relative_ups = 0;
        let mut segments = Vec::new();
        for part in body.split('/') {
            match part {
                "" => return Err(SchemaError::InvalidPath(text.to_string())),
                ".." if segments.is_empty() && !absolute => relative_ups += 1,
                ".." => return Err(SchemaError::InvalidPath(text.to_string())),
                _ => segments.push(Segment::parse(part)?),
            }
        }
        if segments.is_empty() {
            return Err(SchemaError::InvalidPath(text.to_string()));
        }
        Ok(Self {
            segments,
            relative_ups,
            absolute: relative_ups == 0,
        })
    }

    pub fn is_absolute(&self) -> bool {
        self.absolute && self.relative_ups == 0
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().map(|s| s.name.as_str())
    }

    pub fn child(&self, name: impl Into<String>) -> Self {
        let mut out = self.clone();
        out.segments.push(Segment::new(name));
        out
    }

    pub fn prefix_of(&self, len: usize) -> Self {
        Self {
            segments: self.segments[..len.min(self.segments.len())].to_vec(),
            relative_ups: self.relative_ups,
            absolute: self.absolute,
        }
    }

    /// True when `self` is equal to or an ancestor of `other`, comparing names only.
    pub fn covers(&self, other: &SchemaPath) -> bool {
        self.segments.len() <= other.segments.len()
            && self
                .segments
                .iter()
                .zip(&other.segments)
                .all(|(a, b)| a.name == b.name)
    }

    /// Segment list exactly as it should appear on the wire.
    pub fn to_wire(&self) -> Vec<String> {
        self.segments.iter().map(|s| s.to_string()).collect()
    }
}

impl fmt::Display for SchemaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for _ in 0..self.relative_ups {
            f.write_str("../")?;
        }
        if self.is_absolute() {
            f.write_str("/")?;
        }
        for (i, s) in self.segments.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl Serialize for SchemaPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_wire().serialize(serializer)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WirePath {
    Segments(Vec<String>),
    Text(String),
}

impl<'de> Deserialize<'de> for SchemaPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let parsed = match WirePath::deserialize(deserializer)? {
            WirePath::Segments(items) if items.is_empty() => Ok(SchemaPath::default()),
            WirePath::Segments(items) => SchemaPath::from_segments(items),
            WirePath::Text(text) => SchemaPath::parse(&text),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn string_and_segment_forms_agree() {
        let a = SchemaPath::parse("sonic-interface:sonic-interface/sonic-interface:INTERFACE/INTERFACE_IPPREFIX_LIST").unwrap();
        let b = SchemaPath::from_segments([
            "sonic-interface:sonic-interface",
            "sonic-interface:INTERFACE",
            "INTERFACE_IPPREFIX_LIST",
        ])
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn relative_path() {
        let p = SchemaPath::parse("../../INTERFACE_LIST/name").unwrap();
        assert_eq!(p.relative_ups, 2);
        assert_eq!(p.to_string(), "../../INTERFACE_LIST/name");
        assert!(!p.is_absolute());
    }

    #[test]
    fn absolute_path_prints_with_leading_slash() {
        let p = SchemaPath::parse("/port:sonic-port/port:PORT").unwrap();
        assert_eq!(p.to_string(), "/port:sonic-port/port:PORT");
    }

    #[test]
    fn empty_segments_rejected() {
        assert!(SchemaPath::parse("").is_err());
        assert!(SchemaPath::parse("a//b").is_err());
        assert!(SchemaPath::parse("a/:b").is_err());
        assert!(SchemaPath::from_segments(Vec::<String>::new()).is_err());
    }

    #[test]
    fn whitespace_inside_wrapped_paths_is_ignored() {
        let p = SchemaPath::parse("/port:sonic-port/port:PORT/port:\n        PORT_LIST/port:name").unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.segments[2].name, "PORT_LIST");
    }
}
