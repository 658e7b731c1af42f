//! YANG-subset lexer and statement parser.

use super::types::{IntegerKind, PatternSpec, TypeRef, TypeSpec};
use super::{
    Import, MustExpr, NodeKind, SchemaError, SchemaModule, SchemaNode, SchemaPath, Typedef,
};

/// Every statement keyword the parser accepts. Anything else is rejected with
/// [`SchemaError::UnsupportedStatement`].
pub const SUPPORTED_STATEMENTS: &[&str] = &[
    "module",
    "import",
    "prefix",
    "typedef",
    "container",
    "list",
    "key",
    "leaf",
    "leaf-list",
    "type",
    "must",
    "mandatory",
    "description",
    // restrictions inside `type`
    "pattern",
    "range",
    "enum",
    "path",
];

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Quoted(String),
    Semi,
    Open,
    Close,
}

#[derive(Debug, Clone)]
struct Spanned {
    token: Token,
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, message: impl Into<String>) -> SchemaError {
        SchemaError::Syntax {
            line: self.line,
            col: self.col,
            message: message.into(),
        }
    }

    fn skip_trivia(&mut self) -> Result<(), SchemaError> {
        loop {
            match self.chars.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') => {
                    let mut look = self.chars.clone();
                    look.next();
                    match look.peek() {
                        Some('/') => {
                            while let Some(c) = self.bump() {
                                if c == '\n' {
                                    break;
                                }
                            }
                        }
                        Some('*') => {
                            self.bump();
                            self.bump();
                            let mut prev = '\0';
                            loop {
                                match self.bump() {
                                    Some('/') if prev == '*' => break,
                                    Some(c) => prev = c,
                                    None => return Err(self.err("unterminated block comment")),
                                }
                            }
                        }
                        _ => return Ok(()),
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn quoted(&mut self) -> Result<String, SchemaError> {
        let quote = self.bump().expect("caller peeked a quote");
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err("unterminated string")),
                Some(c) if c == quote => return Ok(out),
                Some('\\') if quote == '"' => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    // unknown escapes are kept verbatim so regex patterns survive
                    Some(c) => {
                        out.push('\\');
                        out.push(c);
                    }
                    None => return Err(self.err("unterminated string")),
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, SchemaError> {
        let mut out: Vec<Spanned> = Vec::new();
        loop {
            self.skip_trivia()?;
            let (line, col) = (self.line, self.col);
            let token = match self.chars.peek().copied() {
                None => break,
                Some(';') => {
                    self.bump();
                    Token::Semi
                }
                Some('{') => {
                    self.bump();
                    Token::Open
                }
                Some('}') => {
                    self.bump();
                    Token::Close
                }
                Some('"') | Some('\'') => {
                    let mut s = self.quoted()?;
                    // "a" + "b" concatenation
                    loop {
                        self.skip_trivia()?;
                        if self.chars.peek() != Some(&'+') {
                            break;
                        }
                        self.bump();
                        self.skip_trivia()?;
                        match self.chars.peek() {
                            Some('"') | Some('\'') => s.push_str(&self.quoted()?),
                            _ => return Err(self.err("expected quoted string after `+`")),
                        }
                    }
                    Token::Quoted(s)
                }
                Some(_) => {
                    let mut w = String::new();
                    while let Some(&c) = self.chars.peek() {
                        if c.is_whitespace() || matches!(c, ';' | '{' | '}' | '"' | '\'') {
                            break;
                        }
                        w.push(c);
                        self.bump();
                    }
                    Token::Word(w)
                }
            };
            out.push(Spanned { token, line, col });
        }
        Ok(out)
    }
}

/// Generic `keyword [argument] (; | { ... })` statement.
#[derive(Debug, Clone)]
struct Stmt {
    keyword: String,
    arg: Option<String>,
    children: Vec<Stmt>,
    line: usize,
    col: usize,
}

struct StmtParser {
    tokens: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl StmtParser {
    fn err_at(&self, pos: usize, message: impl Into<String>) -> SchemaError {
        let (line, col) = self
            .tokens
            .get(pos)
            .map(|t| (t.line, t.col))
            .unwrap_or(self.end);
        SchemaError::Syntax {
            line,
            col,
            message: message.into(),
        }
    }

    fn statement(&mut self) -> Result<Stmt, SchemaError> {
        let start = self.pos;
        let (keyword, line, col) = match self.tokens.get(self.pos) {
            Some(Spanned {
                token: Token::Word(w),
                line,
                col,
            }) => (w.clone(), *line, *col),
            Some(other) => {
                return Err(self.err_at(start, format!("expected statement keyword, found {:?}", other.token)))
            }
            None => return Err(self.err_at(start, "unexpected end of input")),
        };
        self.pos += 1;
        let arg = match self.tokens.get(self.pos).map(|t| &t.token) {
            Some(Token::Word(w)) | Some(Token::Quoted(w)) => {
                let a = w.clone();
                self.pos += 1;
                Some(a)
            }
            _ => None,
        };
        let mut children = Vec::new();
        match self.tokens.get(self.pos).map(|t| &t.token) {
            Some(Token::Semi) => self.pos += 1,
            Some(Token::Open) => {
                self.pos += 1;
                loop {
                    match self.tokens.get(self.pos).map(|t| &t.token) {
                        Some(Token::Close) => {
                            self.pos += 1;
                            break;
                        }
                        None => {
                            return Err(self.err_at(self.pos, format!("missing `}}` for `{keyword}`")))
                        }
                        _ => children.push(self.statement()?),
                    }
                }
            }
            _ => {
                return Err(self.err_at(
                    self.pos,
                    format!("expected `;` or `{{` after `{keyword}`"),
                ))
            }
        }
        Ok(Stmt {
            keyword,
            arg,
            children,
            line,
            col,
        })
    }
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl Stmt {
    fn require_arg(&self) -> Result<&str, SchemaError> {
        self.arg.as_deref().ok_or_else(|| SchemaError::Syntax {
            line: self.line,
            col: self.col,
            message: format!("`{}` requires an argument", self.keyword),
        })
    }

    fn syntax(&self, message: impl Into<String>) -> SchemaError {
        SchemaError::Syntax {
            line: self.line,
            col: self.col,
            message: message.into(),
        }
    }

    fn check_children(&self, allowed: &[&str]) -> Result<(), SchemaError> {
        for c in &self.children {
            if !SUPPORTED_STATEMENTS.contains(&c.keyword.as_str()) {
                return Err(SchemaError::UnsupportedStatement {
                    statement: c.keyword.clone(),
                    line: c.line,
                    col: c.col,
                });
            }
            if !allowed.contains(&c.keyword.as_str()) {
                return Err(SchemaError::MisplacedStatement {
                    statement: c.keyword.clone(),
                    parent: self.keyword.clone(),
                    line: c.line,
                    col: c.col,
                });
            }
        }
        Ok(())
    }

    fn single(&self, keyword: &str) -> Result<Option<&Stmt>, SchemaError> {
        let mut it = self.children.iter().filter(|c| c.keyword == keyword);
        let first = it.next();
        if let Some(dup) = it.next() {
            return Err(dup.syntax(format!("duplicate `{keyword}` in `{}`", self.keyword)));
        }
        Ok(first)
    }

    fn description(&self) -> Result<Option<String>, SchemaError> {
        Ok(match self.single("description")? {
            Some(d) => Some(collapse_ws(d.require_arg()?)),
            None => None,
        })
    }
}

/// Parses one YANG-subset module.
///
/// Supported statements are listed in [`SUPPORTED_STATEMENTS`]. Descriptions
/// are kept (whitespace-collapsed) for documentation retrieval.
pub fn parse_module(source: &str) -> Result<SchemaModule, SchemaError> {
    let tokens = Lexer::new(source).tokens()?;
    let end = source
        .lines()
        .enumerate()
        .last()
        .map(|(i, l)| (i + 1, l.chars().count() + 1))
        .unwrap_or((1, 1));
    let mut p = StmtParser {
        tokens,
        pos: 0,
        end,
    };
    if p.tokens.is_empty() {
        return Err(SchemaError::Syntax {
            line: 1,
            col: 1,
            message: "empty input, expected `module`".into(),
        });
    }
    let top = p.statement()?;
    if p.pos < p.tokens.len() {
        return Err(p.err_at(p.pos, "unexpected content after module"));
    }
    if top.keyword != "module" {
        return if SUPPORTED_STATEMENTS.contains(&top.keyword.as_str()) {
            Err(top.syntax(format!("expected `module`, found `{}`", top.keyword)))
        } else {
            Err(SchemaError::UnsupportedStatement {
                statement: top.keyword.clone(),
                line: top.line,
                col: top.col,
            })
        };
    }
    build_module(&top)
}

fn build_module(stmt: &Stmt) -> Result<SchemaModule, SchemaError> {
    let name = stmt.require_arg()?.to_string();
    stmt.check_children(&[
        "prefix",
        "import",
        "typedef",
        "container",
        "list",
        "leaf",
        "leaf-list",
        "description",
    ])?;
    let prefix = match stmt.single("prefix")? {
        Some(p) => p.require_arg()?.to_string(),
        None => return Err(stmt.syntax(format!("module `{name}` has no `prefix`"))),
    };
    let mut module = SchemaModule {
        name: name.clone(),
        prefix,
        imports: Vec::new(),
        typedefs: Vec::new(),
        root_nodes: Vec::new(),
        description: stmt.description()?,
    };
    for c in &stmt.children {
        match c.keyword.as_str() {
            "import" => {
                c.check_children(&["prefix", "description"])?;
                let prefix = c
                    .single("prefix")?
                    .ok_or_else(|| c.syntax("`import` requires a `prefix`"))?
                    .require_arg()?
                    .to_string();
                module.imports.push(Import {
                    module: c.require_arg()?.to_string(),
                    prefix,
                });
            }
            "typedef" => {
                c.check_children(&["type", "description"])?;
                let tname = c.require_arg()?.to_string();
                if module.typedef(&tname).is_some() {
                    return Err(SchemaError::DuplicateTypedef {
                        module: name.clone(),
                        name: tname,
                    });
                }
                let ty = c
                    .single("type")?
                    .ok_or_else(|| c.syntax(format!("typedef `{tname}` has no `type`")))?;
                module.typedefs.push(Typedef {
                    name: tname,
                    type_ref: build_type(ty)?,
                    description: c.description()?,
                });
            }
            "container" | "list" | "leaf" | "leaf-list" => {
                module.root_nodes.push(build_node(c, false)?)
            }
            _ => {}
        }
    }
    check_unique_names(&module.root_nodes, stmt)?;
    Ok(module)
}

fn check_unique_names(nodes: &[SchemaNode], parent: &Stmt) -> Result<(), SchemaError> {
    for (i, n) in nodes.iter().enumerate() {
        if nodes[..i].iter().any(|m| m.name == n.name) {
            return Err(parent.syntax(format!("duplicate node `{}`", n.name)));
        }
    }
    Ok(())
}

fn build_node(stmt: &Stmt, inside_list: bool) -> Result<SchemaNode, SchemaError> {
    let name = stmt.require_arg()?.to_string();
    let kind = match stmt.keyword.as_str() {
        "container" => NodeKind::Container,
        "list" => NodeKind::List,
        "leaf" => NodeKind::Leaf,
        _ => NodeKind::LeafList,
    };
    if inside_list && !kind.is_data_leaf() {
        // config-DB list entries are flat rows
        return Err(SchemaError::UnsupportedStatement {
            statement: format!("{} inside list", stmt.keyword),
            line: stmt.line,
            col: stmt.col,
        });
    }
    let mut node = SchemaNode::new(kind, name);
    node.description = stmt.description()?;
    match kind {
        NodeKind::Container => {
            stmt.check_children(&["container", "list", "leaf", "leaf-list", "must", "description"])?;
        }
        NodeKind::List => {
            stmt.check_children(&["key", "leaf", "leaf-list", "container", "list", "must", "description"])?;
        }
        NodeKind::Leaf => {
            stmt.check_children(&["type", "must", "mandatory", "description"])?;
        }
        NodeKind::LeafList => {
            stmt.check_children(&["type", "must", "description"])?;
        }
    }
    for c in &stmt.children {
        match c.keyword.as_str() {
            "container" | "list" | "leaf" | "leaf-list" => node
                .children
                .push(build_node(c, kind == NodeKind::List)?),
            "must" => {
                c.check_children(&["description"])?;
                node.must_exprs.push(MustExpr::parse(c.require_arg()?)?);
            }
            _ => {}
        }
    }
    check_unique_names(&node.children, stmt)?;
    if kind.is_data_leaf() {
        let ty = stmt
            .single("type")?
            .ok_or_else(|| stmt.syntax(format!("{} `{}` has no `type`", stmt.keyword, node.name)))?;
        node.type_ref = Some(build_type(ty)?);
    }
    if let Some(m) = stmt.single("mandatory")? {
        node.mandatory = match m.require_arg()? {
            "true" => true,
            "false" => false,
            other => return Err(m.syntax(format!("invalid mandatory value `{other}`"))),
        };
    }
    if kind == NodeKind::List {
        let key = stmt
            .single("key")?
            .ok_or_else(|| stmt.syntax(format!("list `{}` has no `key`", node.name)))?;
        node.key_leaves = key
            .require_arg()?
            .split_whitespace()
            .map(str::to_string)
            .collect();
        if node.key_leaves.is_empty() {
            return Err(key.syntax("empty key"));
        }
        for k in &node.key_leaves {
            if !node
                .children
                .iter()
                .any(|c| &c.name == k && c.kind == NodeKind::Leaf)
            {
                return Err(key.syntax(format!("key `{k}` is not a leaf of list `{}`", node.name)));
            }
        }
    }
    Ok(node)
}

fn parse_bound(text: &str, kind: IntegerKind, stmt: &Stmt) -> Result<i128, SchemaError> {
    let (lo, hi) = kind.bounds();
    match text.trim() {
        "min" => Ok(lo),
        "max" => Ok(hi),
        t => t
            .parse::<i128>()
            .map_err(|_| stmt.syntax(format!("invalid range bound `{t}`"))),
    }
}

fn build_type(stmt: &Stmt) -> Result<TypeRef, SchemaError> {
    let name = stmt.require_arg()?;
    stmt.check_children(&["pattern", "range", "enum", "path", "description"])?;
    let restricted = stmt.children.iter().any(|c| c.keyword != "description");
    let spec = match name {
        "string" => {
            stmt.check_children(&["pattern", "description"])?;
            match stmt.single("pattern")? {
                Some(p) => {
                    let src = p.require_arg()?;
                    TypeSpec::PatternString {
                        pattern: PatternSpec::new(src)
                            .map_err(|e| p.syntax(format!("invalid pattern: {e}")))?,
                    }
                }
                None => TypeSpec::String,
            }
        }
        "enumeration" => {
            stmt.check_children(&["enum", "description"])?;
            let values: Vec<String> = stmt
                .children
                .iter()
                .filter(|c| c.keyword == "enum")
                .map(|c| {
                    c.check_children(&["description"])?;
                    c.require_arg().map(str::to_string)
                })
                .collect::<Result<_, _>>()?;
            if values.is_empty() {
                return Err(stmt.syntax("enumeration without `enum`"));
            }
            TypeSpec::Enumeration { values }
        }
        "leafref" => {
            stmt.check_children(&["path", "description"])?;
            let p = stmt
                .single("path")?
                .ok_or_else(|| stmt.syntax("leafref without `path`"))?;
            TypeSpec::Leafref {
                path: SchemaPath::parse(p.require_arg()?)?,
                target: None,
            }
        }
        "ipv4-prefix" | "inet:ipv4-prefix" => {
            stmt.check_children(&["description"])?;
            TypeSpec::Ip4Prefix
        }
        other => match IntegerKind::from_name(other) {
            Some(kind) => {
                stmt.check_children(&["range", "description"])?;
                let (mut min, mut max) = kind.bounds();
                if let Some(r) = stmt.single("range")? {
                    let text = r.require_arg()?;
                    if text.contains('|') {
                        return Err(r.syntax("multi-interval ranges are not supported"));
                    }
                    let (lo, hi) = match text.split_once("..") {
                        Some((lo, hi)) => (lo, hi),
                        None => (text, text),
                    };
                    let (nlo, nhi) = (parse_bound(lo, kind, r)?, parse_bound(hi, kind, r)?);
                    if nlo > nhi || nlo < min || nhi > max {
                        return Err(r.syntax(format!("range `{text}` outside {}", kind.name())));
                    }
                    min = nlo;
                    max = nhi;
                }
                TypeSpec::IntegerRange { kind, min, max }
            }
            None => {
                if restricted {
                    return Err(SchemaError::UnsupportedStatement {
                        statement: format!("restriction on derived type `{other}`"),
                        line: stmt.line,
                        col: stmt.col,
                    });
                }
                return Ok(TypeRef::Named(other.to_string()));
            }
        },
    };
    Ok(TypeRef::Resolved(spec))
}
