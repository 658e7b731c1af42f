//! YANG-subset schema: the vendor-agnostic IR definition.
//!
//! Modules are parsed from a restricted set of YANG statements (see
//! [`parse_module`]) and resolved as a set into a [`ResolvedSchema`], which
//! inlines typedefs, checks leafref targets and answers path lookups.

mod must;
mod parse;
mod path;
mod printer;
mod resolve;
mod types;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use must::{MustExpr, MustPath, MustStart, MustStep, Predicate};
pub use parse::{parse_module, SUPPORTED_STATEMENTS};
pub use path::{SchemaPath, Segment};
pub use resolve::{canonical, resolve, NodeRef, ResolvedSchema, TableRef};
pub use types::{IntegerKind, PatternSpec, TypeRef, TypeSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unsupported statement `{statement}` at {line}:{col}")]
    UnsupportedStatement {
        statement: String,
        line: usize,
        col: usize,
    },
    #[error("statement `{statement}` not allowed inside `{parent}` at {line}:{col}")]
    MisplacedStatement {
        statement: String,
        parent: String,
        line: usize,
        col: usize,
    },
    #[error("invalid schema path `{0}`")]
    InvalidPath(String),
    #[error("invalid must expression `{text}`: {message}")]
    InvalidMust { text: String, message: String },
    #[error("module `{module}`: {message}")]
    Invalid { module: String, message: String },
    #[error("duplicate typedef `{name}` in module `{module}`")]
    DuplicateTypedef { module: String, name: String },
    #[error("import `{import}` of module `{module}` is not loaded")]
    UnresolvedImport { module: String, import: String },
    #[error("import cycle: {}", .0.join(" -> "))]
    ImportCycle(Vec<String>),
    #[error("unresolved typedef `{name}` in module `{module}`")]
    UnresolvedTypedef { module: String, name: String },
    #[error("unresolved leafref `{path}` at `{at}`")]
    UnresolvedLeafref { path: String, at: String },
    #[error("path `{path}` not found (deepest resolved prefix `{resolved}`)")]
    PathNotFound { path: String, resolved: SchemaPath },
    #[error("path segment `{segment}` of `{path}` is ambiguous")]
    AmbiguousPath { path: String, segment: String },
    #[error("duplicate module `{0}`")]
    DuplicateModule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Container,
    List,
    Leaf,
    LeafList,
}

impl NodeKind {
    pub fn keyword(self) -> &'static str {
        match self {
            NodeKind::Container => "container",
            NodeKind::List => "list",
            NodeKind::Leaf => "leaf",
            NodeKind::LeafList => "leaf-list",
        }
    }

    pub fn is_data_leaf(self) -> bool {
        matches!(self, NodeKind::Leaf | NodeKind::LeafList)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaNode {
    pub kind: NodeKind,
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<SchemaNode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub key_leaves: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_ref: Option<TypeRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub must_exprs: Vec<MustExpr>,
    #[serde(default)]
    pub mandatory: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl SchemaNode {
    pub fn new(kind: NodeKind, name: impl Into<String>) -> Self {
        Self {
            kind,
            name: name.into(),
            children: Vec::new(),
            key_leaves: Vec::new(),
            type_ref: None,
            must_exprs: Vec::new(),
            mandatory: false,
            description: None,
        }
    }

    pub fn child(&self, name: &str) -> Option<&SchemaNode> {
        self.children.iter().find(|c| c.name == name)
    }

    /// Concrete type of a leaf or leaf-list once the schema is resolved.
    pub fn type_spec(&self) -> Option<&TypeSpec> {
        match &self.type_ref {
            Some(TypeRef::Resolved(spec)) => Some(spec),
            _ => None,
        }
    }

    pub fn is_key(&self, leaf: &str) -> bool {
        self.key_leaves.iter().any(|k| k == leaf)
    }

    /// Depth-first visit of this node and its descendants.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a SchemaNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Import {
    pub module: String,
    pub prefix: String,
}

/// A named type definition inside a module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Typedef {
    pub name: String,
    pub type_ref: TypeRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaModule {
    pub name: String,
    pub prefix: String,
    #[serde(default)]
    pub imports: Vec<Import>,
    #[serde(default)]
    pub typedefs: Vec<Typedef>,
    #[serde(default)]
    pub root_nodes: Vec<SchemaNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl SchemaModule {
    pub fn typedef(&self, name: &str) -> Option<&Typedef> {
        self.typedefs.iter().find(|t| t.name == name)
    }

    /// Module name for a prefix as seen from inside this module.
    pub fn module_for_prefix(&self, prefix: &str) -> Option<&str> {
        if prefix == self.prefix || prefix == self.name {
            return Some(&self.name);
        }
        self.imports
            .iter()
            .find(|i| i.prefix == prefix)
            .map(|i| i.module.as_str())
    }

    /// Renders the module back into YANG text.
    pub fn to_yang(&self) -> String {
        printer::module_to_yang(self)
    }
}

/// Renders one schema node subtree as YANG text at the given indent level.
pub fn node_to_yang(node: &SchemaNode, indent: usize) -> String {
    let mut out = String::new();
    printer::write_node(&mut out, node, indent);
    out
}
