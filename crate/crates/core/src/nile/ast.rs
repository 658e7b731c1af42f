use std::fmt;

use serde::{Deserialize, Serialize};

use super::parse::{Cst, Span, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spanned<T> {
    pub value: T,
    pub span: Span,
}

impl<T> Spanned<T> {
    pub fn new(value: T) -> Self {
        Self {
            value,
            span: Span::default(),
        }
    }
}

/// A function-style term such as `endpoint('gateway')` or
/// `bandwidth('max', '100', 'mbps')`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub args: Vec<Spanned<String>>,
    pub span: Span,
}

impl Term {
    pub fn new<I, S>(name: &str, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            name: name.to_string(),
            args: args.into_iter().map(|a| Spanned::new(a.into())).collect(),
            span: Span::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verb {
    Add,
    Remove,
    Allow,
    Block,
    Set,
    Unset,
}

impl Verb {
    pub const ALL: [Verb; 6] = [Verb::Add, Verb::Remove, Verb::Allow, Verb::Block, Verb::Set, Verb::Unset];

    pub fn keyword(self) -> &'static str {
        match self {
            Verb::Add => "add",
            Verb::Remove => "remove",
            Verb::Allow => "allow",
            Verb::Block => "block",
            Verb::Set => "set",
            Verb::Unset => "unset",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operation {
    pub verb: Verb,
    pub terms: Vec<Term>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NileIntent {
    pub id: Spanned<String>,
    pub from: Option<Term>,
    pub to: Option<Term>,
    pub targets: Vec<Term>,
    pub operations: Vec<Operation>,
    pub start: Option<Term>,
    pub end: Option<Term>,
    pub span: Span,
}

/// `name ( STRING ("," STRING)* )` node to a term.
fn term(node: &Cst) -> Term {
    let tokens = node.tokens();
    let name = tokens
        .iter()
        .find(|t| t.kind == TokenKind::Word)
        .map(|t| t.text.clone())
        .unwrap_or_default();
    let args = tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Str)
        .map(|t| Spanned {
            value: t.text.clone(),
            span: t.span,
        })
        .collect();
    Term {
        name,
        args,
        span: node.span(),
    }
}

/// The innermost single-rule chain below `node`, e.g. `target -> group`.
fn leaf_term(node: &Cst) -> Term {
    let mut n = node;
    while let [only] = n
        .children()
        .iter()
        .filter(|c| c.rule().is_some())
        .collect::<Vec<_>>()
        .as_slice()
    {
        if only.children().iter().any(|c| matches!(c, Cst::Leaf(_))) {
            return term(only);
        }
        n = only;
    }
    term(n)
}

fn terms_below(node: &Cst) -> Vec<Term> {
    node.children()
        .iter()
        .filter(|c| c.rule().is_some())
        .map(leaf_term)
        .collect()
}

impl NileIntent {
    /// Builds the AST from a parse of the bundled grammar.
    pub fn from_cst(cst: &Cst) -> Self {
        let id = cst
            .children()
            .iter()
            .filter_map(|c| match c {
                Cst::Leaf(t) if t.kind == TokenKind::Word => Some(t),
                _ => None,
            })
            .nth(2)
            .map(|t| Spanned {
                value: t.text.clone(),
                span: t.span,
            })
            .unwrap_or_else(|| Spanned::new(String::new()));
        let endpoint = |rule: &str| cst.node(rule).map(leaf_term);
        let targets = cst.node("targets").map(terms_below).unwrap_or_default();
        let operations = cst
            .node("operations")
            .map(|ops| {
                ops.nodes("operation")
                    .filter_map(|op| {
                        let inner = op.children().iter().find(|c| c.rule().is_some())?;
                        let verb = Verb::ALL.into_iter().find(|v| Some(v.keyword()) == inner.rule())?;
                        Some(Operation {
                            verb,
                            terms: terms_below(inner),
                            span: op.span(),
                        })
                    })
                    .collect()
            })
            .unwrap_or_default();
        let interval = cst.node("interval");
        let time = |rule: &str| interval.and_then(|i| i.node(rule)).map(leaf_term);
        NileIntent {
            id,
            from: endpoint("from"),
            to: endpoint("to"),
            targets,
            operations,
            start: time("start"),
            end: time("end"),
            span: cst.span(),
        }
    }

    /// Every argument value keyed by its structural position. The intent id
    /// is left out.
    pub fn leaves(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push_term = |prefix: String, t: &Term| {
            for (i, a) in t.args.iter().enumerate() {
                out.push((format!("{prefix}.{}[{i}]", t.name), a.value.clone()));
            }
        };
        if let Some(t) = &self.from {
            push_term("from".into(), t);
        }
        if let Some(t) = &self.to {
            push_term("to".into(), t);
        }
        for (i, t) in self.targets.iter().enumerate() {
            push_term(format!("for[{i}]"), t);
        }
        for (i, op) in self.operations.iter().enumerate() {
            for (j, t) in op.terms.iter().enumerate() {
                push_term(format!("op[{i}].{}[{j}]", op.verb.keyword()), t);
            }
        }
        if let Some(t) = &self.start {
            push_term("start".into(), t);
        }
        if let Some(t) = &self.end {
            push_term("end".into(), t);
        }
        out
    }

    /// Every term in source order.
    pub fn terms(&self) -> Vec<&Term> {
        let mut v: Vec<&Term> = Vec::new();
        v.extend(self.from.iter());
        v.extend(self.to.iter());
        v.extend(self.targets.iter());
        v.extend(self.operations.iter().flat_map(|o| o.terms.iter()));
        v.extend(self.start.iter());
        v.extend(self.end.iter());
        v
    }

    /// Copy with every string value whitespace-collapsed.
    pub fn whitespace_normalized(&self) -> Self {
        let norm = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
        let fix = |t: &Term| Term {
            name: t.name.clone(),
            args: t.args.iter().map(|a| Spanned::new(norm(&a.value))).collect(),
            span: t.span,
        };
        NileIntent {
            id: Spanned::new(norm(&self.id.value)),
            from: self.from.as_ref().map(fix),
            to: self.to.as_ref().map(fix),
            targets: self.targets.iter().map(fix).collect(),
            operations: self
                .operations
                .iter()
                .map(|o| Operation {
                    verb: o.verb,
                    terms: o.terms.iter().map(fix).collect(),
                    span: o.span,
                })
                .collect(),
            start: self.start.as_ref().map(fix),
            end: self.end.as_ref().map(fix),
            span: self.span,
        }
    }
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args.iter().map(|a| quote(&a.value)).collect();
        write!(f, "{}({})", self.name, args.join(", "))
    }
}

fn join_terms(terms: &[Term]) -> String {
    terms.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// Canonical layout: one clause per line, two-space indent.
impl fmt::Display for NileIntent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "define intent {}:", self.id.value)?;
        if let Some(t) = &self.from {
            write!(f, "\n  from {t}")?;
        }
        if let Some(t) = &self.to {
            write!(f, "\n  to {t}")?;
        }
        if !self.targets.is_empty() {
            write!(f, "\n  for {}", join_terms(&self.targets))?;
        }
        for op in &self.operations {
            write!(f, "\n  {} {}", op.verb.keyword(), join_terms(&op.terms))?;
        }
        if let Some(t) = &self.start {
            write!(f, "\n  start {t}")?;
        }
        if let Some(t) = &self.end {
            write!(f, "\n  end {t}")?;
        }
        Ok(())
    }
}
