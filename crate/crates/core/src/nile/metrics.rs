use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::NileIntent;

/// Unique (entity type, value) pairs.
pub type EntityTagging = BTreeSet<(String, String)>;

pub fn tagging<I, A, B>(pairs: I) -> EntityTagging
where
    I: IntoIterator<Item = (A, B)>,
    A: AsRef<str>,
    B: AsRef<str>,
{
    pairs
        .into_iter()
        .map(|(t, v)| (t.as_ref().trim().to_string(), v.as_ref().trim().to_string()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Set-overlap precision, recall and F1 over exact pairs. Both sets empty
/// scores 1 across the board; one side empty scores 0.
pub fn entity_prf(predicted: &EntityTagging, gold: &EntityTagging) -> Prf {
    if predicted.is_empty() && gold.is_empty() {
        return Prf {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    let tp = predicted.intersection(gold).count() as f64;
    let precision = if predicted.is_empty() { 0.0 } else { tp / predicted.len() as f64 };
    let recall = if gold.is_empty() { 0.0 } else { tp / gold.len() as f64 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Prf { precision, recall, f1 }
}

pub fn exact_match(predicted: &NileIntent, gold: &NileIntent) -> bool {
    predicted.whitespace_normalized() == gold.whitespace_normalized()
}

#[derive(Debug, Error)]
pub enum SynonymError {
    #[error("synonym table: {0}")]
    Json(#[from] serde_json::Error),
}

/// Variant to canonical form, applied after case folding and punctuation
/// stripping.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymTable {
    pub version: u32,
    pub synonyms: BTreeMap<String, String>,
}

impl SynonymTable {
    pub fn from_json(text: &str) -> Result<Self, SynonymError> {
        let mut t: SynonymTable = serde_json::from_str(text)?;
        t.synonyms = t
            .synonyms
            .into_iter()
            .map(|(k, v)| (fold(&k), fold(&v)))
            .collect();
        Ok(t)
    }

    /// Whole-value lookup first, then word by word.
    pub fn canonical(&self, value: &str) -> String {
        let folded = fold(value);
        if let Some(c) = self.synonyms.get(&folded) {
            return c.clone();
        }
        folded
            .split(' ')
            .map(|w| self.synonyms.get(w).map_or(w, String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Lower-case, punctuation to spaces, whitespace collapsed.
fn fold(s: &str) -> String {
    s.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Fraction of gold leaves matched by a predicted leaf at the same
/// position after normalization.
pub fn fuzzy_match(predicted: &NileIntent, gold: &NileIntent, synonyms: &SynonymTable) -> f64 {
    let gold_leaves = gold.leaves();
    let pred: BTreeMap<String, String> = predicted
        .leaves()
        .into_iter()
        .map(|(pos, v)| (pos, synonyms.canonical(&v)))
        .collect();
    if gold_leaves.is_empty() {
        return if pred.is_empty() { 1.0 } else { 0.0 };
    }
    let hit = gold_leaves
        .iter()
        .filter(|(pos, v)| pred.get(pos).is_some_and(|p| *p == synonyms.canonical(v)))
        .count();
    hit as f64 / gold_leaves.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nile::parse_nile;

    fn t(pairs: &[(&str, &str)]) -> EntityTagging {
        tagging(pairs.iter().copied())
    }

    #[test]
    fn prf_examples() {
        let a = t(&[("group", "students"), ("middlebox", "firewall")]);
        let p = entity_prf(&a, &a);
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
        let p = entity_prf(&EntityTagging::new(), &a);
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 0.0, 0.0));
        let p = entity_prf(&EntityTagging::new(), &EntityTagging::new());
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
        let ab = t(&[("x", "A"), ("x", "B")]);
        let bc = t(&[("x", "B"), ("x", "C")]);
        let p = entity_prf(&ab, &bc);
        assert_eq!((p.precision, p.recall, p.f1), (0.5, 0.5, 0.5));
        // values are compared after trimming only
        assert_eq!(entity_prf(&t(&[("x", " B ")]), &t(&[("x", "b")])).f1, 0.0);
    }

    fn syn() -> SynonymTable {
        SynonymTable::from_json(super::super::SYNONYMS_JSON).unwrap()
    }

    #[test]
    fn identical_and_case_variant_intents() {
        let a = parse_nile("define intent i:\n  from endpoint('Gateway')\n  to endpoint('network')\n  add middlebox('firewall')").unwrap();
        assert!(exact_match(&a, &a));
        assert_eq!(fuzzy_match(&a, &a, &syn()), 1.0);
        let b = parse_nile("define intent i: from endpoint('gateway') to endpoint('network') add middlebox('firewall')").unwrap();
        assert!(!exact_match(&b, &a));
        assert_eq!(fuzzy_match(&b, &a, &syn()), 1.0);
        let spaced = parse_nile("define intent i: from endpoint(' Gateway ') to endpoint('network') add middlebox('firewall')").unwrap();
        assert!(exact_match(&spaced, &a));
    }

    #[test]
    fn three_of_four_leaves() {
        let gold = parse_nile("define intent g: from endpoint('a') to endpoint('b') for group('c') add middlebox('d')").unwrap();
        let pred = parse_nile("define intent other: from endpoint('a') to endpoint('b') for group('c') add middlebox('e')").unwrap();
        assert_eq!(gold.leaves().len(), 4);
        assert_eq!(fuzzy_match(&pred, &gold, &syn()), 0.75);
        // the intent id only matters for the exact match
        let renamed = parse_nile("define intent other: from endpoint('a') to endpoint('b') for group('c') add middlebox('d')").unwrap();
        assert_eq!(fuzzy_match(&renamed, &gold, &syn()), 1.0);
        assert!(!exact_match(&renamed, &gold));
    }

    #[test]
    fn synonyms_canonicalize_values() {
        let gold = parse_nile("define intent g: for group('students') add middlebox('firewall')").unwrap();
        let pred = parse_nile("define intent g: for group('Student') add middlebox('FW')").unwrap();
        assert_eq!(fuzzy_match(&pred, &gold, &syn()), 1.0);
        assert_eq!(fuzzy_match(&pred, &gold, &SynonymTable::default()), 0.0);
    }
}
