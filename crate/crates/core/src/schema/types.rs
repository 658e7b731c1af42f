use std::fmt;
use std::net::Ipv4Addr;

use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::SchemaPath;

/// Built-in integer types with their natural bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegerKind {
    Int8,
    Int16,
    Int32,
    Int64,
    Uint8,
    Uint16,
    Uint32,
    Uint64,
}

impl IntegerKind {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "int8" => Self::Int8,
            "int16" => Self::Int16,
            "int32" => Self::Int32,
            "int64" => Self::Int64,
            "uint8" => Self::Uint8,
            "uint16" => Self::Uint16,
            "uint32" => Self::Uint32,
            "uint64" => Self::Uint64,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Int8 => "int8",
            Self::Int16 => "int16",
            Self::Int32 => "int32",
            Self::Int64 => "int64",
            Self::Uint8 => "uint8",
            Self::Uint16 => "uint16",
            Self::Uint32 => "uint32",
            Self::Uint64 => "uint64",
        }
    }

    pub fn bounds(self) -> (i128, i128) {
        match self {
            Self::Int8 => (i8::MIN.into(), i8::MAX.into()),
            Self::Int16 => (i16::MIN.into(), i16::MAX.into()),
            Self::Int32 => (i32::MIN.into(), i32::MAX.into()),
            Self::Int64 => (i64::MIN.into(), i64::MAX.into()),
            Self::Uint8 => (0, u8::MAX.into()),
            Self::Uint16 => (0, u16::MAX.into()),
            Self::Uint32 => (0, u32::MAX.into()),
            Self::Uint64 => (0, u64::MAX.into()),
        }
    }
}

/// A `pattern` restriction. YANG patterns are implicitly anchored.
#[derive(Clone)]
pub struct PatternSpec {
    source: String,
    regex: Regex,
}

impl PatternSpec {
    pub fn new(source: &str) -> Result<Self, regex::Error> {
        let regex = Regex::new(&format!("^(?:{source})$"))?;
        Ok(Self {
            source: source.to_string(),
            regex,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn is_match(&self, value: &str) -> bool {
        self.regex.is_match(value)
    }
}

impl PartialEq for PatternSpec {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl fmt::Debug for PatternSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PatternSpec({:?})", self.source)
    }
}

impl Serialize for PatternSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.source.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PatternSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let source = String::deserialize(d)?;
        PatternSpec::new(&source).map_err(serde::de::Error::custom)
    }
}

/// Concrete leaf type after typedef resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "base", rename_all = "kebab-case")]
pub enum TypeSpec {
    String,
    PatternString {
        pattern: PatternSpec,
    },
    IntegerRange {
        kind: IntegerKind,
        min: i128,
        max: i128,
    },
    Enumeration {
        values: Vec<String>,
    },
    Leafref {
        path: SchemaPath,
        /// Type of the referenced leaf, filled in by resolution.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<Box<TypeSpec>>,
    },
    Ip4Prefix,
}

impl TypeSpec {
    pub fn is_integer(&self) -> bool {
        match self {
            TypeSpec::IntegerRange { .. } => true,
            TypeSpec::Leafref {
                target: Some(t), ..
            } => t.is_integer(),
            _ => false,
        }
    }

    /// Checks a canonical string value against this type. Leafref reachability
    /// is an instance-level concern and is not checked here.
    pub fn check(&self, value: &str) -> Result<(), String> {
        match self {
            TypeSpec::String => Ok(()),
            TypeSpec::PatternString { pattern } => {
                if pattern.is_match(value) {
                    Ok(())
                } else {
                    Err(format!(
                        "value \"{value}\" does not match pattern \"{}\"",
                        pattern.source()
                    ))
                }
            }
            TypeSpec::IntegerRange { kind, min, max } => match value.parse::<i128>() {
                Ok(v) if v >= *min && v <= *max => Ok(()),
                Ok(v) => Err(format!(
                    "value {v} out of range {min}..{max} for {}",
                    kind.name()
                )),
                Err(_) => Err(format!("value \"{value}\" is not a valid {}", kind.name())),
            },
            TypeSpec::Enumeration { values } => {
                if values.iter().any(|v| v == value) {
                    Ok(())
                } else {
                    Err(format!(
                        "value \"{value}\" is not one of {{{}}}",
                        values.join(", ")
                    ))
                }
            }
            TypeSpec::Leafref { target, .. } => match target {
                Some(t) => t.check(value),
                None => Ok(()),
            },
            TypeSpec::Ip4Prefix => check_ip4_prefix(value),
        }
    }
}

/// Dotted-quad address and prefix length 0..=32, e.g. `10.0.5.1/24`.
pub fn check_ip4_prefix(value: &str) -> Result<(), String> {
    let bad = || format!("value \"{value}\" is not a valid ipv4 prefix");
    let (addr, len) = value.split_once('/').ok_or_else(bad)?;
    // Ipv4Addr parsing rejects leading zeros and out-of-range octets.
    addr.parse::<Ipv4Addr>().map_err(|_| bad())?;
    if len.is_empty() || len.len() > 2 || !len.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    match len.parse::<u8>() {
        Ok(l) if l <= 32 => Ok(()),
        _ => Err(format!("prefix length {len} in \"{value}\" exceeds 32")),
    }
}

/// A leaf's declared type: either a built-in already turned into a
/// [`TypeSpec`], or a reference to a typedef awaiting resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TypeRef {
    Resolved(TypeSpec),
    Named(String),
}

impl TypeRef {
    pub fn resolved(&self) -> Option<&TypeSpec> {
        match self {
            TypeRef::Resolved(t) => Some(t),
            TypeRef::Named(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ip4_prefix_lengths() {
        // Oracle: legal lengths are exactly 0..=32.
        for len in 0..=40 {
            let v = format!("10.1.1.1/{len}");
            assert_eq!(check_ip4_prefix(&v).is_ok(), len <= 32, "{v}");
        }
    }

    #[test]
    fn ip4_prefix_malformed() {
        for v in [
            "10.1.1.1",
            "10.1.1/24",
            "256.1.1.1/24",
            "10.1.1.1/",
            "10.1.1.1/a",
            "a.b.c.d/8",
            "10.1.1.1/024",
            "",
        ] {
            assert!(check_ip4_prefix(v).is_err(), "{v}");
        }
        assert!(check_ip4_prefix("0.0.0.0/0").is_ok());
    }

    #[test]
    fn integer_range_check() {
        let t = TypeSpec::IntegerRange {
            kind: IntegerKind::Uint16,
            min: 68,
            max: 9216,
        };
        assert!(t.check("9100").is_ok());
        assert!(t.check("9217").is_err());
        assert!(t.check("abc").is_err());
    }

    #[test]
    fn pattern_is_anchored() {
        let p = TypeSpec::PatternString {
            pattern: PatternSpec::new("Ethernet[0-9]+").unwrap(),
        };
        assert!(p.check("Ethernet4").is_ok());
        assert!(p.check("xEthernet4").is_err());
        assert!(p.check("Ethernet4x").is_err());
    }
}
