//! Tokenizer and packrat parser driven by a [`Grammar`].

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::grammar::{Expr, Grammar, TokenClass};

/// Byte range plus 1-based line and column of the start. Spans never take
/// part in equality, so ASTs compare by content only.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Str,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Unquoted content for strings.
    pub text: String,
    /// Source text, quotes included.
    pub raw: String,
    pub span: Span,
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxError {
    pub offset: usize,
    pub line: usize,
    pub col: usize,
    pub expected: BTreeSet<String>,
    pub found: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at line {}, column {}: ", self.line, self.col)?;
        match self.expected.len() {
            0 => write!(f, "unexpected {}", self.found),
            1 => write!(f, "expected {}, found {}", self.expected.iter().next().unwrap_or(&String::new()), self.found),
            _ => write!(
                f,
                "expected one of {}, found {}",
                self.expected.iter().cloned().collect::<Vec<_>>().join(", "),
                self.found
            ),
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '/')
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let (mut line, mut col) = (1, 1);
    let mut i = 0;
    let advance = |c: char, line: &mut usize, col: &mut usize| {
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let (start, c) = chars[i];
        let (tline, tcol) = (line, col);
        if c.is_whitespace() {
            advance(c, &mut line, &mut col);
            i += 1;
            continue;
        }
        let mut j = i;
        let kind;
        let mut value = String::new();
        if c == '\'' || c == '"' {
            kind = TokenKind::Str;
            advance(c, &mut line, &mut col);
            j += 1;
            let mut closed = false;
            while j < chars.len() {
                let ch = chars[j].1;
                advance(ch, &mut line, &mut col);
                j += 1;
                if ch == '\\' && j < chars.len() {
                    value.push(chars[j].1);
                    advance(chars[j].1, &mut line, &mut col);
                    j += 1;
                } else if ch == c {
                    closed = true;
                    break;
                } else if ch == '\n' {
                    break;
                } else {
                    value.push(ch);
                }
            }
            if !closed {
                return Err(SyntaxError {
                    offset: start,
                    line: tline,
                    col: tcol,
                    expected: BTreeSet::from(["closing quote".to_string()]),
                    found: "end of line".into(),
                });
            }
        } else if is_word_char(c) {
            kind = TokenKind::Word;
            while j < chars.len() && is_word_char(chars[j].1) {
                value.push(chars[j].1);
                advance(chars[j].1, &mut line, &mut col);
                j += 1;
            }
        } else {
            kind = TokenKind::Punct;
            value.push(c);
            advance(c, &mut line, &mut col);
            j += 1;
        }
        let end = chars.get(j).map_or(text.len(), |(o, _)| *o);
        out.push(Token {
            kind,
            text: value,
            raw: text[start..end].to_string(),
            span: Span {
                start,
                end,
                line: tline,
                col: tcol,
            },
        });
        i = j;
    }
    Ok(out)
}

/// Concrete syntax tree: rule nodes over tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cst {
    Node { rule: String, children: Vec<Cst>, span: Span },
    Leaf(Token),
}

impl Cst {
    pub fn rule(&self) -> Option<&str> {
        match self {
            Cst::Node { rule, .. } => Some(rule),
            Cst::Leaf(_) => None,
        }
    }

    pub fn children(&self) -> &[Cst] {
        match self {
            Cst::Node { children, .. } => children,
            Cst::Leaf(_) => &[],
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Cst::Node { span, .. } => *span,
            Cst::Leaf(t) => t.span,
        }
    }

    /// Direct child nodes for `rule`.
    pub fn nodes<'a>(&'a self, rule: &'a str) -> impl Iterator<Item = &'a Cst> + 'a {
        self.children().iter().filter(move |c| c.rule() == Some(rule))
    }

    pub fn node(&self, rule: &str) -> Option<&Cst> {
        self.children().iter().find(|c| c.rule() == Some(rule))
    }

    pub fn tokens(&self) -> Vec<&Token> {
        let mut out = Vec::new();
        fn walk<'a>(c: &'a Cst, out: &mut Vec<&'a Token>) {
            match c {
                Cst::Leaf(t) => out.push(t),
                Cst::Node { children, .. } => children.iter().for_each(|ch| walk(ch, out)),
            }
        }
        walk(self, &mut out);
        out
    }
}

type Memo = HashMap<(usize, usize), Option<(usize, Cst)>>;

struct Packrat<'g, 't> {
    grammar: &'g Grammar,
    tokens: &'t [Token],
    memo: Memo,
    furthest: usize,
    expected: BTreeSet<String>,
}

fn describe(expr: &Expr) -> String {
    match expr {
        Expr::Literal(s) => format!("\"{s}\""),
        Expr::Token(TokenClass::String) => "a quoted string".into(),
        Expr::Token(TokenClass::Ident) => "a name".into(),
        _ => String::new(),
    }
}

impl Packrat<'_, '_> {
    fn fail(&mut self, pos: usize, what: String) {
        if pos > self.furthest {
            self.furthest = pos;
            self.expected.clear();
        }
        if pos == self.furthest {
            self.expected.insert(what);
        }
    }

    fn rule(&mut self, idx: usize, pos: usize) -> Option<(usize, Cst)> {
        if let Some(hit) = self.memo.get(&(idx, pos)) {
            return hit.clone();
        }
        let grammar = self.grammar;
        let mut children = Vec::new();
        let result = self.expr(&grammar.rules[idx].expr, pos, &mut children).map(|end| {
            let span = match (self.tokens.get(pos), end.checked_sub(1).and_then(|e| self.tokens.get(e))) {
                (Some(first), Some(last)) if end > pos => Span {
                    start: first.span.start,
                    end: last.span.end,
                    line: first.span.line,
                    col: first.span.col,
                },
                _ => Span::default(),
            };
            (
                end,
                Cst::Node {
                    rule: grammar.rules[idx].name.clone(),
                    children,
                    span,
                },
            )
        });
        self.memo.insert((idx, pos), result.clone());
        result
    }

    fn expr(&mut self, e: &Expr, pos: usize, out: &mut Vec<Cst>) -> Option<usize> {
        match e {
            Expr::Literal(s) => match self.tokens.get(pos) {
                Some(t) if t.kind != TokenKind::Str && t.text == *s => {
                    out.push(Cst::Leaf(t.clone()));
                    Some(pos + 1)
                }
                _ => {
                    self.fail(pos, describe(e));
                    None
                }
            },
            Expr::Token(class) => {
                let want = match class {
                    TokenClass::String => TokenKind::Str,
                    TokenClass::Ident => TokenKind::Word,
                };
                match self.tokens.get(pos) {
                    Some(t) if t.kind == want => {
                        out.push(Cst::Leaf(t.clone()));
                        Some(pos + 1)
                    }
                    _ => {
                        self.fail(pos, describe(e));
                        None
                    }
                }
            }
            Expr::Rule(idx) => {
                let (end, node) = self.rule(*idx, pos)?;
                out.push(node);
                Some(end)
            }
            Expr::Seq(items) => {
                let mark = out.len();
                let mut p = pos;
                for item in items {
                    match self.expr(item, p, out) {
                        Some(next) => p = next,
                        None => {
                            out.truncate(mark);
                            return None;
                        }
                    }
                }
                Some(p)
            }
            Expr::Choice(alts) => alts.iter().find_map(|a| self.expr(a, pos, out)),
            Expr::Opt(inner) => Some(self.expr(inner, pos, out).unwrap_or(pos)),
            Expr::Star(inner) => Some(self.repeat(inner, pos, out)),
            Expr::Plus(inner) => {
                let first = self.expr(inner, pos, out)?;
                Some(self.repeat(inner, first, out))
            }
        }
    }

    fn repeat(&mut self, inner: &Expr, mut pos: usize, out: &mut Vec<Cst>) -> usize {
        while let Some(next) = self.expr(inner, pos, out) {
            if next == pos {
                break;
            }
            pos = next;
        }
        pos
    }
}

/// Parses `text` from the grammar's start rule. Errors point at the
/// furthest position any alternative reached.
pub fn parse_with(grammar: &Grammar, text: &str) -> Result<Cst, SyntaxError> {
    let tokens = tokenize(text)?;
    let mut p = Packrat {
        grammar,
        tokens: &tokens,
        memo: HashMap::new(),
        furthest: 0,
        expected: BTreeSet::new(),
    };
    let result = p.rule(grammar.start(), 0);
    match result {
        Some((end, cst)) if end == tokens.len() => Ok(cst),
        other => {
            if let Some((end, _)) = other {
                p.fail(end, "end of input".into());
            }
            let (offset, line, col, found) = match tokens.get(p.furthest) {
                Some(t) => (t.span.start, t.span.line, t.span.col, format!("'{}'", t.raw)),
                None => {
                    let (line, col) = end_position(text);
                    (text.len(), line, col, "end of input".into())
                }
            };
            Err(SyntaxError {
                offset,
                line,
                col,
                expected: p.expected,
                found,
            })
        }
    }
}

fn end_position(text: &str) -> (usize, usize) {
    let line = text.matches('\n').count() + 1;
    let col = text.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> Grammar {
        Grammar::parse(super::super::NILE_BNF).unwrap()
    }

    #[test]
    fn tokenizer_keeps_raw_text_and_positions() {
        let t = tokenize("define intent a:\n  for group('x y')").unwrap();
        let raws: Vec<&str> = t.iter().map(|t| t.raw.as_str()).collect();
        assert_eq!(raws, ["define", "intent", "a", ":", "for", "group", "(", "'x y'", ")"]);
        assert_eq!(t[7].text, "x y");
        assert_eq!((t[4].span.line, t[4].span.col), (2, 3));
        assert!(tokenize("group('x").is_err());
    }

    #[test]
    fn empty_input_fails_at_offset_zero() {
        let e = parse_with(&g(), "").unwrap_err();
        assert_eq!((e.offset, e.line, e.col), (0, 1, 1));
        assert_eq!(e.expected, BTreeSet::from(["\"define\"".to_string()]));
        assert_eq!(e.found, "end of input");
    }

    #[test]
    fn errors_point_at_the_furthest_failure() {
        let e = parse_with(&g(), "define intent a:\n  for group('x')\n  block middlebox('fw')").unwrap_err();
        assert_eq!((e.line, e.col), (3, 9));
        assert!(e.expected.contains("\"service\""));
        assert!(e.to_string().starts_with("syntax error at line 3, column 9: expected one of"));
        let trailing = parse_with(&g(), "define intent a: add middlebox('fw') )").unwrap_err();
        assert!(trailing.expected.contains("end of input"));
    }
}
