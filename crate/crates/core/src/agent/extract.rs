//! Pulls the change set out of a model reply: the one fenced block labelled
//! `python`, read as a Python literal.

use serde_json::{Map, Number, Value};
use thiserror::Error;

use crate::state::{ChangeSet, ChangeSetError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtractError {
    #[error("no fenced python block in the model output")]
    NoFencedBlock,
    #[error("expected exactly one fenced python block, found {0}")]
    MultipleBlocks(usize),
    #[error("could not parse the python block: {0}")]
    Parse(String),
}

impl From<ChangeSetError> for ExtractError {
    fn from(e: ChangeSetError) -> Self {
        ExtractError::Parse(e.to_string())
    }
}

fn is_opener(line: &str) -> bool {
    line.trim_start()
        .strip_prefix("```")
        .is_some_and(|rest| rest.trim().eq_ignore_ascii_case("python"))
}

fn is_closer(line: &str) -> bool {
    let t = line.trim();
    t.starts_with("```") || t.starts_with("'''")
}

/// Body of the single python block. The closing fence may be ``` or '''
/// (the prompt exemplar uses the latter); a missing closer runs to the end.
pub fn python_block(output: &str) -> Result<String, ExtractError> {
    let lines: Vec<&str> = output.lines().collect();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if is_opener(lines[i]) {
            let start = i + 1;
            let mut end = start;
            while end < lines.len() && !is_closer(lines[end]) {
                end += 1;
            }
            blocks.push(lines[start..end].join("\n"));
            i = end + 1;
        } else {
            i += 1;
        }
    }
    match blocks.len() {
        0 => Err(ExtractError::NoFencedBlock),
        1 => Ok(blocks.pop().unwrap_or_default()),
        n => Err(ExtractError::MultipleBlocks(n)),
    }
}

pub fn extract_change_set(output: &str) -> Result<ChangeSet, ExtractError> {
    let body = python_block(output)?;
    let value = parse_python_literal(&body)?;
    // a bare single-device object is accepted as a one-item list
    let value = match value {
        Value::Object(_) => Value::Array(vec![value]),
        other => other,
    };
    Ok(ChangeSet::from_value(value)?)
}

/// Parses a Python literal (lists, tuples, dicts, strings, numbers,
/// True/False/None) into JSON. Comments and trailing commas are allowed.
pub fn parse_python_literal(text: &str) -> Result<Value, ExtractError> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
    };
    p.skip_ws();
    let v = p.value()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error("trailing content after the literal"));
    }
    Ok(v)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn error(&self, msg: &str) -> ExtractError {
        let line = self.chars[..self.pos.min(self.chars.len())].iter().filter(|c| **c == '\n').count() + 1;
        ExtractError::Parse(format!("line {line}: {msg}"))
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += 1;
            } else if c == '#' {
                while self.peek().is_some_and(|c| c != '\n') {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn value(&mut self) -> Result<Value, ExtractError> {
        match self.peek() {
            Some('[') => self.sequence('[', ']').map(Value::Array),
            Some('(') => self.sequence('(', ')').map(Value::Array),
            Some('{') => self.dict(),
            Some(q @ ('"' | '\'')) => self.string(q).map(Value::String),
            Some(c) if c == '-' || c == '+' || c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                    self.pos += 1;
                }
                let word: String = self.chars[start..self.pos].iter().collect();
                match word.as_str() {
                    "True" | "true" => Ok(Value::Bool(true)),
                    "False" | "false" => Ok(Value::Bool(false)),
                    "None" | "null" => Ok(Value::Null),
                    _ => {
                        self.pos = start;
                        Err(self.error(&format!("unexpected name {word:?}")))
                    }
                }
            }
            Some(c) => Err(self.error(&format!("unexpected character {c:?}"))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn sequence(&mut self, open: char, close: char) -> Result<Vec<Value>, ExtractError> {
        self.eat(open);
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            if self.eat(close) {
                return Ok(items);
            }
            items.push(self.value()?);
            self.skip_ws();
            if self.eat(',') {
                continue;
            }
            if self.eat(close) {
                return Ok(items);
            }
            return Err(self.error(&format!("expected ',' or '{close}'")));
        }
    }

    fn dict(&mut self) -> Result<Value, ExtractError> {
        self.eat('{');
        let mut map = Map::new();
        loop {
            self.skip_ws();
            if self.eat('}') {
                return Ok(Value::Object(map));
            }
            let key = match self.peek() {
                Some(q @ ('"' | '\'')) => self.string(q)?,
                _ => return Err(self.error("dict keys must be strings")),
            };
            self.skip_ws();
            if !self.eat(':') {
                return Err(self.error("expected ':'"));
            }
            self.skip_ws();
            let v = self.value()?;
            map.insert(key, v);
            self.skip_ws();
            if self.eat(',') {
                continue;
            }
            if self.eat('}') {
                return Ok(Value::Object(map));
            }
            return Err(self.error("expected ',' or '}'"));
        }
    }

    fn string(&mut self, quote: char) -> Result<String, ExtractError> {
        self.eat(quote);
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(self.error("unterminated string"));
            };
            self.pos += 1;
            match c {
                '\n' => return Err(self.error("newline inside string")),
                '\\' => {
                    let Some(e) = self.peek() else {
                        return Err(self.error("unterminated escape"));
                    };
                    self.pos += 1;
                    match e {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        '0' => out.push('\0'),
                        '\\' | '\'' | '"' => out.push(e),
                        'u' => {
                            let hex: String = self.chars.get(self.pos..self.pos + 4).unwrap_or(&[]).iter().collect();
                            let cp = u32::from_str_radix(&hex, 16)
                                .ok()
                                .and_then(char::from_u32)
                                .ok_or_else(|| self.error("bad \\u escape"))?;
                            self.pos += 4;
                            out.push(cp);
                        }
                        other => {
                            out.push('\\');
                            out.push(other);
                        }
                    }
                }
                c if c == quote => break,
                c => out.push(c),
            }
        }
        // adjacent literals concatenate, as in Python
        let save = self.pos;
        self.skip_ws();
        match self.peek() {
            Some(q @ ('"' | '\'')) => {
                let more = self.string(q)?;
                out.push_str(&more);
            }
            _ => self.pos = save,
        }
        Ok(out)
    }

    fn number(&mut self) -> Result<Value, ExtractError> {
        let start = self.pos;
        if matches!(self.peek(), Some('-' | '+')) {
            self.pos += 1;
        }
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '_' | '-' | '+'))
        {
            // a sign is only part of the number right after an exponent marker
            if matches!(self.peek(), Some('-' | '+')) && !matches!(self.chars[self.pos - 1], 'e' | 'E') {
                break;
            }
            self.pos += 1;
        }
        let raw: String = self.chars[start..self.pos].iter().filter(|c| **c != '_').collect();
        if let Ok(i) = raw.parse::<i64>() {
            return Ok(Value::Number(i.into()));
        }
        raw.parse::<f64>()
            .ok()
            .and_then(Number::from_f64)
            .map(Value::Number)
            .ok_or_else(|| {
                self.pos = start;
                self.error(&format!("bad number {raw:?}"))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::prompts::GENERATION_SYSTEM;
    use crate::state::Action;

    #[test]
    fn prompt_exemplar_extracts_to_the_s0_change_set() {
        let cs = extract_change_set(GENERATION_SYSTEM).unwrap();
        assert_eq!(cs.0.len(), 1);
        let s0 = &cs.0[0];
        assert_eq!(s0.device, "S0");
        assert_eq!(s0.config.len(), 2);
        assert_eq!(s0.config[0].action, Action::Remove);
        assert_eq!(s0.config[1].action, Action::Append);
        assert_eq!(s0.config[1].value["ip-prefix"].to_string(), "10.0.5.1/24");
        assert_eq!(s0.config[0].value["name"].to_string(), "Ethernet8");
        assert_eq!(s0.config[0].path.to_wire().last().map(String::as_str), Some("INTERFACE_IPPREFIX_LIST"));
    }

    #[test]
    fn fence_errors() {
        assert_eq!(extract_change_set("no code here").unwrap_err(), ExtractError::NoFencedBlock);
        assert_eq!(extract_change_set("```\n[]\n```").unwrap_err(), ExtractError::NoFencedBlock);
        let two = "```python\n[]\n```\ntext\n```python\n[]\n```\n";
        assert_eq!(extract_change_set(two).unwrap_err(), ExtractError::MultipleBlocks(2));
        assert!(matches!(extract_change_set("```python\n[{]\n```"), Err(ExtractError::Parse(_))));
    }

    #[test]
    fn python_syntax_is_normalized() {
        let out = "Sure.\n```Python\n# one device\n[{'device': 'L0', 'config': [\n  {'action': 'append', 'path': ('sonic-port:sonic-port', 'sonic-port:PORT', 'PORT_LIST'),\n   'value': {'name': 'Ethernet12', 'mtu': 9100, 'admin_status': 'up',},},\n],},]\n'''\nDone.";
        let cs = extract_change_set(out).unwrap();
        assert_eq!(cs.0[0].config[0].value["mtu"].to_string(), "9100");
        let json = "```python\n[{\"device\": \"L0\", \"config\": []}]\n```";
        assert_eq!(extract_change_set(json).unwrap().0[0].device, "L0");
    }

    #[test]
    fn literal_parser_covers_python_scalars() {
        let v = parse_python_literal("{'a': True, 'b': None, 'c': -1.5, 'd': 'x' \"y\", 'e': 1_000, 'f': 'it\\'s'}").unwrap();
        assert_eq!(
            v,
            serde_json::json!({"a": true, "b": null, "c": -1.5, "d": "xy", "e": 1000, "f": "it's"})
        );
        assert!(parse_python_literal("[1, 2] extra").is_err());
        assert!(parse_python_literal("{'a': foo}").is_err());
    }
}
