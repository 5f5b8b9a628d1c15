use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ORIGINAL_WEIGHT: f64 = 1.0;
pub const SYNONYM_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("synonym table line {line}: {reason}")]
pub struct SynonymError {
    pub line: usize,
    pub reason: String,
}

/// Term → synonyms. Lookups are single hop.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymTable {
    entries: BTreeMap<String, Vec<String>>,
}

fn is_term(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() && !c.is_uppercase())
}

impl SynonymTable {
    /// Parses lines of the form `term: syn1, syn2`. Everything after `#` is a
    /// comment. Repeated terms merge their synonym lists.
    pub fn parse(text: &str) -> Result<Self, SynonymError> {
        let mut table = SynonymTable::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| SynonymError { line: line_no, reason };
            let (term, rest) = line
                .split_once(':')
                .ok_or_else(|| err("expected `term: synonym, ...`".into()))?;
            let term = term.trim();
            if !is_term(term) {
                return Err(err(format!("invalid term {term:?}")));
            }
            for syn in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                if !is_term(syn) {
                    return Err(err(format!("invalid synonym {syn:?}")));
                }
                table.insert(term, syn);
            }
        }
        Ok(table)
    }

    pub fn insert(&mut self, term: &str, synonym: &str) {
        if term == synonym {
            return;
        }
        let list = self.entries.entry(term.to_string()).or_default();
        if !list.iter().any(|s| s == synonym) {
            list.push(synonym.to_string());
        }
    }

    pub fn synonyms(&self, term: &str) -> &[String] {
        self.entries.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTerm {
    pub term: String,
    pub weight: f64,
    pub expanded: bool,
}

/// Originals (deduplicated, in order) at full weight, then each original's
/// synonyms that are not already present at reduced weight.
pub fn expand_query(terms: &[String], table: &SynonymTable) -> Vec<WeightedTerm> {
    let mut out: Vec<WeightedTerm> = Vec::new();
    for term in terms {
        if !out.iter().any(|w| &w.term == term) {
            out.push(WeightedTerm {
                term: term.clone(),
                weight: ORIGINAL_WEIGHT,
                expanded: false,
            });
        }
    }
    let originals = out.len();
    for i in 0..originals {
        let original = out[i].term.clone();
        for syn in table.synonyms(&original) {
            if !out.iter().any(|w| &w.term == syn) {
                out.push(WeightedTerm {
                    term: syn.clone(),
                    weight: SYNONYM_WEIGHT,
                    expanded: true,
                });
            }
        }
    }
    out
}
