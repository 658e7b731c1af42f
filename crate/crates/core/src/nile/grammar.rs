//! Loader for the small EBNF dialect of `nile.bnf`.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("grammar line {line}: {message}")]
pub struct GrammarError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenClass {
    /// A quoted string.
    String,
    /// A bare word.
    Ident,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Literal(String),
    Token(TokenClass),
    Rule(usize),
    Seq(Vec<Expr>),
    Choice(Vec<Expr>),
    Opt(Box<Expr>),
    Star(Box<Expr>),
    Plus(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Production {
    pub name: String,
    pub expr: Expr,
}

/// Productions in file order; the first one is the start rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    pub rules: Vec<Production>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Lit(String),
    Name(String),
    Sym(char),
}

fn lex(text: &str, line: usize) -> Result<Vec<Tok>, GrammarError> {
    let err = |m: String| GrammarError { line, message: m };
    let mut out = Vec::new();
    let mut it = text.chars().peekable();
    while let Some(&c) = it.peek() {
        match c {
            c if c.is_whitespace() => {
                it.next();
            }
            '"' | '\'' => {
                it.next();
                let mut s = String::new();
                loop {
                    match it.next() {
                        Some(q) if q == c => break,
                        Some(ch) => s.push(ch),
                        None => return Err(err("unterminated literal".into())),
                    }
                }
                if s.is_empty() {
                    return Err(err("empty literal".into()));
                }
                out.push(Tok::Lit(s));
            }
            '(' | ')' | '|' | '?' | '*' | '+' => {
                it.next();
                out.push(Tok::Sym(c));
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let mut s = String::new();
                while let Some(&ch) = it.peek() {
                    if ch.is_ascii_alphanumeric() || ch == '_' {
                        s.push(ch);
                        it.next();
                    } else {
                        break;
                    }
                }
                out.push(Tok::Name(s));
            }
            other => return Err(err(format!("unexpected character {other:?}"))),
        }
    }
    Ok(out)
}

/// Expression with rule references still unresolved.
#[derive(Debug, Clone)]
enum Raw {
    Lit(String),
    Name(String),
    Seq(Vec<Raw>),
    Choice(Vec<Raw>),
    Opt(Box<Raw>),
    Star(Box<Raw>),
    Plus(Box<Raw>),
}

struct ExprParser {
    toks: Vec<Tok>,
    pos: usize,
    line: usize,
}

impl ExprParser {
    fn err(&self, m: &str) -> GrammarError {
        GrammarError {
            line: self.line,
            message: m.to_string(),
        }
    }

    fn choice(&mut self) -> Result<Raw, GrammarError> {
        let mut alts = vec![self.seq()?];
        while self.toks.get(self.pos) == Some(&Tok::Sym('|')) {
            self.pos += 1;
            alts.push(self.seq()?);
        }
        Ok(if alts.len() == 1 { alts.remove(0) } else { Raw::Choice(alts) })
    }

    fn seq(&mut self) -> Result<Raw, GrammarError> {
        let mut items = Vec::new();
        while let Some(t) = self.toks.get(self.pos) {
            if matches!(t, Tok::Sym('|') | Tok::Sym(')')) {
                break;
            }
            items.push(self.postfix()?);
        }
        match items.len() {
            0 => Err(self.err("empty alternative")),
            1 => Ok(items.remove(0)),
            _ => Ok(Raw::Seq(items)),
        }
    }

    fn postfix(&mut self) -> Result<Raw, GrammarError> {
        let mut atom = self.atom()?;
        while let Some(Tok::Sym(c @ ('?' | '*' | '+'))) = self.toks.get(self.pos) {
            atom = match c {
                '?' => Raw::Opt(Box::new(atom)),
                '*' => Raw::Star(Box::new(atom)),
                _ => Raw::Plus(Box::new(atom)),
            };
            self.pos += 1;
        }
        Ok(atom)
    }

    fn atom(&mut self) -> Result<Raw, GrammarError> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        match t {
            Some(Tok::Lit(s)) => Ok(Raw::Lit(s)),
            Some(Tok::Name(n)) => Ok(Raw::Name(n)),
            Some(Tok::Sym('(')) => {
                let inner = self.choice()?;
                if self.toks.get(self.pos) != Some(&Tok::Sym(')')) {
                    return Err(self.err("missing ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(Tok::Sym(c)) => Err(self.err(&format!("unexpected '{c}'"))),
            None => Err(self.err("unexpected end of rule")),
        }
    }
}

impl Grammar {
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        // (line, name, body) with continuation lines folded in
        let mut defs: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("");
            if content.trim().is_empty() {
                continue;
            }
            if let Some((name, body)) = content.split_once("::=") {
                let name = name.trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(GrammarError {
                        line,
                        message: format!("bad rule name {name:?}"),
                    });
                }
                defs.push((line, name.to_string(), body.to_string()));
            } else if raw.starts_with(char::is_whitespace) && !defs.is_empty() {
                let last = defs.last_mut().expect("checked non-empty");
                last.2.push(' ');
                last.2.push_str(content);
            } else {
                return Err(GrammarError {
                    line,
                    message: "expected `name ::= expression`".into(),
                });
            }
        }
        if defs.is_empty() {
            return Err(GrammarError {
                line: 0,
                message: "grammar has no rules".into(),
            });
        }
        let mut index = HashMap::new();
        for (i, (line, name, _)) in defs.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(GrammarError {
                    line: *line,
                    message: format!("rule {name} defined twice"),
                });
            }
        }
        let mut rules = Vec::new();
        for (line, name, body) in &defs {
            let mut p = ExprParser {
                toks: lex(body, *line)?,
                pos: 0,
                line: *line,
            };
            let raw = p.choice()?;
            if p.pos < p.toks.len() {
                return Err(p.err("unbalanced ')'"));
            }
            let expr = resolve(&raw, &index, *line)?;
            rules.push(Production {
                name: name.clone(),
                expr,
            });
        }
        Ok(Self { rules, index })
    }

    pub fn rule_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn start(&self) -> usize {
        0
    }
}

fn resolve(raw: &Raw, index: &HashMap<String, usize>, line: usize) -> Result<Expr, GrammarError> {
    let all = |items: &[Raw]| items.iter().map(|r| resolve(r, index, line)).collect::<Result<Vec<_>, _>>();
    Ok(match raw {
        Raw::Lit(s) => Expr::Literal(s.clone()),
        Raw::Name(n) if n == "STRING" => Expr::Token(TokenClass::String),
        Raw::Name(n) if n == "IDENT" => Expr::Token(TokenClass::Ident),
        Raw::Name(n) => Expr::Rule(*index.get(n).ok_or_else(|| GrammarError {
            line,
            message: format!("undefined rule {n}"),
        })?),
        Raw::Seq(items) => Expr::Seq(all(items)?),
        Raw::Choice(items) => Expr::Choice(all(items)?),
        Raw::Opt(r) => Expr::Opt(Box::new(resolve(r, index, line)?)),
        Raw::Star(r) => Expr::Star(Box::new(resolve(r, index, line)?)),
        Raw::Plus(r) => Expr::Plus(Box::new(resolve(r, index, line)?)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_the_bundled_grammar() {
        let g = Grammar::parse(super::super::NILE_BNF).unwrap();
        assert_eq!(g.rules[g.start()].name, "intent");
        assert!(g.rule_index("bandwidth").is_some());
    }

    #[test]
    fn reports_grammar_errors_with_lines() {
        assert_eq!(Grammar::parse("a ::= b").unwrap_err().message, "undefined rule b");
        assert_eq!(Grammar::parse("a ::= \"x\"\na ::= \"y\"").unwrap_err().line, 2);
        assert!(Grammar::parse("a ::= (\"x\"").is_err());
        assert!(Grammar::parse("junk").is_err());
        assert!(Grammar::parse("# only a comment").is_err());
    }

    #[test]
    fn continuation_lines_extend_the_previous_rule() {
        let g = Grammar::parse("a ::= \"x\"\n    | \"y\"").unwrap();
        assert_eq!(
            g.rules[0].expr,
            Expr::Choice(vec![Expr::Literal("x".into()), Expr::Literal("y".into())])
        );
    }
}
