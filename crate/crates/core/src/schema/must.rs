//! `must` expressions restricted to the XPath fragment used by the IR:
//! `current()`, parent steps, child steps, key predicates and equality.
//!
//! ```text
//! expr      := '(' expr ')' | operand [ '=' operand ]
//! operand   := 'current()' [ '/' steps ] | '/' steps | steps
//! steps     := step { '/' step }
//! step      := '..' | name { '[' name '=' operand ']' }
//! ```

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{SchemaError, Segment};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MustStep {
    Parent,
    Child {
        name: Segment,
        predicates: Vec<Predicate>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    pub name: Segment,
    pub value: MustPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MustStart {
    /// `current()`
    Current,
    /// leading `/`
    Root,
    /// relative to the context node
    Context,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MustPath {
    pub start: MustStart,
    pub steps: Vec<MustStep>,
}

/// Parsed `must` expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MustExpr {
    Equals(MustPath, MustPath),
    Exists(MustPath),
}

impl MustExpr {
    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let tokens = tokenize(text).map_err(|message| SchemaError::InvalidMust {
            text: text.to_string(),
            message,
        })?;
        let mut p = Parser {
            tokens: &tokens,
            pos: 0,
        };
        let expr = p.expr().and_then(|e| {
            if p.pos == tokens.len() {
                Ok(e)
            } else {
                Err(format!("unexpected token {:?}", tokens[p.pos]))
            }
        });
        expr.map_err(|message| SchemaError::InvalidMust {
            text: text.to_string(),
            message,
        })
    }

    /// Whitespace-normalized text printed from the AST.
    pub fn normalized(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for MustPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.start {
            MustStart::Current => {
                f.write_str("current()")?;
                if !self.steps.is_empty() {
                    f.write_str("/")?;
                }
            }
            MustStart::Root => f.write_str("/")?,
            MustStart::Context => {}
        }
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            match step {
                MustStep::Parent => f.write_str("..")?,
                MustStep::Child { name, predicates } => {
                    write!(f, "{name}")?;
                    for p in predicates {
                        write!(f, "[{}={}]", p.name, p.value)?;
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for MustExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MustExpr::Equals(a, b) => write!(f, "{a} = {b}"),
            MustExpr::Exists(p) => write!(f, "{p}"),
        }
    }
}

impl Serialize for MustExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_string().serialize(s)
    }
}

impl<'de> Deserialize<'de> for MustExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        MustExpr::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    LBracket,
    RBracket,
    Slash,
    Eq,
    DotDot,
    Current,
    Name(String),
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | ':')
}

fn tokenize(text: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                out.push(Tok::LParen);
                i += 1
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1
            }
            '[' => {
                out.push(Tok::LBracket);
                i += 1
            }
            ']' => {
                out.push(Tok::RBracket);
                i += 1
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1
            }
            '=' => {
                out.push(Tok::Eq);
                i += 1
            }
            '.' => {
                if chars.get(i + 1) == Some(&'.') {
                    out.push(Tok::DotDot);
                    i += 2;
                } else {
                    return Err("self step `.` is not supported".into());
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && is_name_char(chars[i]) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                if word == "current" {
                    out.push(Tok::Current);
                } else {
                    out.push(Tok::Name(word));
                }
            }
            other => return Err(format!("unexpected character `{other}`")),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Tok],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> Result<(), String> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(format!("expected {t:?}, found {:?}", self.peek()))
        }
    }

    fn expr(&mut self) -> Result<MustExpr, String> {
        if self.eat(&Tok::LParen) {
            let e = self.expr()?;
            self.expect(Tok::RParen)?;
            return Ok(e);
        }
        let lhs = self.path()?;
        if self.eat(&Tok::Eq) {
            let rhs = self.path()?;
            Ok(MustExpr::Equals(lhs, rhs))
        } else {
            Ok(MustExpr::Exists(lhs))
        }
    }

    fn path(&mut self) -> Result<MustPath, String> {
        match self.peek() {
            Some(Tok::Current) => {
                self.pos += 1;
                self.expect(Tok::LParen)?;
                self.expect(Tok::RParen)?;
                let steps = if self.eat(&Tok::Slash) {
                    self.steps()?
                } else {
                    Vec::new()
                };
                Ok(MustPath {
                    start: MustStart::Current,
                    steps,
                })
            }
            Some(Tok::Slash) => {
                self.pos += 1;
                Ok(MustPath {
                    start: MustStart::Root,
                    steps: self.steps()?,
                })
            }
            _ => Ok(MustPath {
                start: MustStart::Context,
                steps: self.steps()?,
            }),
        }
    }

    fn steps(&mut self) -> Result<Vec<MustStep>, String> {
        let mut steps = vec![self.step()?];
        while self.eat(&Tok::Slash) {
            steps.push(self.step()?);
        }
        Ok(steps)
    }

    fn step(&mut self) -> Result<MustStep, String> {
        match self.peek().cloned() {
            Some(Tok::DotDot) => {
                self.pos += 1;
                Ok(MustStep::Parent)
            }
            Some(Tok::Name(n)) => {
                self.pos += 1;
                let name = Segment::parse(&n).map_err(|e| e.to_string())?;
                let mut predicates = Vec::new();
                while self.eat(&Tok::LBracket) {
                    let key = match self.peek().cloned() {
                        Some(Tok::Name(k)) => {
                            self.pos += 1;
                            Segment::parse(&k).map_err(|e| e.to_string())?
                        }
                        other => return Err(format!("expected key name, found {other:?}")),
                    };
                    self.expect(Tok::Eq)?;
                    let value = self.path()?;
                    self.expect(Tok::RBracket)?;
                    predicates.push(Predicate { name: key, value });
                }
                Ok(MustStep::Child { name, predicates })
            }
            other => Err(format!("expected path step, found {other:?}")),
        }
    }
}
