//! Random walks over the grammar's productions, for exemplars and the
//! synthetic dataset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ast::{NileIntent, Term, Verb};
use super::grammar::{Expr, Grammar, TokenClass};
use super::metrics::EntityTagging;

/// Values drawn for quoted strings, by the rule they appear in and the
/// argument position.
fn vocabulary(rule: &str, arg: usize) -> &'static [&'static str] {
    match (rule, arg) {
        ("endpoint", _) => &["gateway", "network", "internet", "dorms", "labs", "servers", "library"],
        ("group", _) => &["students", "professors", "guests", "staff", "visitors", "researchers"],
        ("service", _) => &["netflix", "youtube", "facebook", "ssh", "dns", "email"],
        ("traffic", _) => &["video", "gaming", "torrent", "web", "streaming"],
        ("protocol", _) => &["tcp", "udp", "http", "https", "icmp"],
        ("middlebox", _) => &["firewall", "ids", "dpi", "lb", "parental control", "vpn"],
        ("bandwidth" | "quota" | "qos_name", 0) => &["max", "min", "download", "upload"],
        ("bandwidth", 1) | ("quota", 1) => &["10", "50", "100", "500", "1000"],
        ("bandwidth", _) => &["mbps", "kbps", "gbps"],
        ("quota", _) => &["gb/wk", "gb/day", "mb/day"],
        ("hour", _) => &["08:00", "10:00", "12:00", "18:00", "22:00", "23:59"],
        ("date", _) => &["2024-01-01", "2024-06-30", "2024-12-31"],
        ("datetime", _) => &["2024-01-01 08:00", "2024-06-30 18:00"],
        _ => &["value"],
    }
}

struct Walker<'g, R: Rng> {
    grammar: &'g Grammar,
    rng: R,
    out: Vec<String>,
    serial: usize,
}

impl<R: Rng> Walker<'_, R> {
    fn walk(&mut self, e: &Expr, rule: &str, arg: &mut usize) {
        match e {
            Expr::Literal(s) => self.out.push(s.clone()),
            Expr::Token(TokenClass::String) => {
                let words = vocabulary(rule, *arg);
                let w = words[self.rng.random_range(0..words.len())];
                self.out.push(format!("'{w}'"));
                *arg += 1;
            }
            Expr::Token(TokenClass::Ident) => self.out.push(format!("intent{}", self.serial)),
            Expr::Rule(i) => {
                let grammar = self.grammar;
                let p = &grammar.rules[*i];
                let mut sub = 0;
                self.walk(&p.expr, &p.name, &mut sub);
            }
            Expr::Seq(items) => items.iter().for_each(|x| self.walk(x, rule, arg)),
            Expr::Choice(alts) => {
                let pick = self.rng.random_range(0..alts.len());
                self.walk(&alts[pick], rule, arg);
            }
            Expr::Opt(inner) => {
                if self.rng.random_bool(0.5) {
                    self.walk(inner, rule, arg);
                }
            }
            Expr::Star(inner) => {
                for _ in 0..self.rng.random_range(0..=2) {
                    self.walk(inner, rule, arg);
                }
            }
            Expr::Plus(inner) => {
                for _ in 0..self.rng.random_range(1..=2) {
                    self.walk(inner, rule, arg);
                }
            }
        }
    }
}

/// `count` sentences of the grammar's language as token text, seeded.
pub fn random_sentences(grammar: &Grammar, count: usize, seed: u64) -> Vec<String> {
    let mut w = Walker {
        grammar,
        rng: ChaCha8Rng::seed_from_u64(seed),
        out: Vec::new(),
        serial: 0,
    };
    (0..count)
        .map(|i| {
            w.out.clear();
            w.serial = i;
            let mut arg = 0;
            w.walk(&Expr::Rule(grammar.start()), "", &mut arg);
            w.out.join(" ")
        })
        .collect()
}

/// Entities an annotator would tag for this intent. Operation verbs are
/// tagged as `operation`; QoS terms carry their three arguments as
/// constraint, value and unit.
pub fn intent_entities(intent: &NileIntent) -> EntityTagging {
    let mut out = EntityTagging::new();
    let mut add = |t: &str, v: &str| {
        out.insert((t.to_string(), v.to_string()));
    };
    let term = |t: &Term, add: &mut dyn FnMut(&str, &str)| match (t.name.as_str(), t.args.as_slice()) {
        ("bandwidth" | "quota", [c, rest @ ..]) => {
            add("qos", &t.name);
            add("qos_constraint", &c.value);
            if let Some(v) = rest.first() {
                add("qos_value", &v.value);
            }
            if let Some(u) = rest.get(1) {
                add("qos_unit", &u.value);
            }
        }
        (name, args) => {
            for a in args {
                add(name, &a.value);
            }
        }
    };
    for t in intent.from.iter().chain(intent.to.iter()).chain(intent.targets.iter()) {
        term(t, &mut add);
    }
    for op in &intent.operations {
        add("operation", op.verb.keyword());
        for t in &op.terms {
            term(t, &mut add);
        }
    }
    if let Some(t) = &intent.start {
        for a in &t.args {
            add("start", &a.value);
        }
    }
    if let Some(t) = &intent.end {
        for a in &t.args {
            add("end", &a.value);
        }
    }
    out
}

fn describe_term(t: &Term) -> String {
    let args: Vec<&str> = t.args.iter().map(|a| a.value.as_str()).collect();
    match (t.name.as_str(), args.as_slice()) {
        ("bandwidth" | "quota", [c]) => format!("{c} {}", t.name),
        ("bandwidth" | "quota", [c, rest @ ..]) => format!("{c} {} of {}", t.name, rest.join(" ")),
        (name, args) => format!("{name} {}", args.join(" ")),
    }
}

fn list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// A plain English rendering of the intent, used as the synthetic utterance.
pub fn utterance(intent: &NileIntent) -> String {
    let mut clauses = Vec::new();
    for op in &intent.operations {
        let terms: Vec<String> = op.terms.iter().map(describe_term).collect();
        let verb = match op.verb {
            Verb::Add => "add",
            Verb::Remove => "remove",
            Verb::Allow => "allow",
            Verb::Block => "block",
            Verb::Set => "set a",
            Verb::Unset => "clear the",
        };
        clauses.push(format!("{verb} {}", list(&terms)));
    }
    let mut s = list(&clauses);
    if !intent.targets.is_empty() {
        let t: Vec<String> = intent.targets.iter().map(describe_term).collect();
        s.push_str(&format!(" for {}", list(&t)));
    }
    if let Some(f) = &intent.from {
        s.push_str(&format!(" from the {}", describe_term(f)));
    }
    if let Some(t) = &intent.to {
        s.push_str(&format!(" to the {}", describe_term(t)));
    }
    if let Some(t) = &intent.start {
        s.push_str(&format!(" starting at {}", describe_term(t)));
    }
    if let Some(t) = &intent.end {
        s.push_str(&format!(" until {}", describe_term(t)));
    }
    format!("Please {s}")
}
