use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::Tokenizer;
use crate::ids::ListingId;
use crate::marketplace::Listing;

/// Per-field multipliers applied to raw term counts. Weights below 1 would
/// let the log-tf component go negative, so configurations keep them ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldWeights {
    pub title: f64,
    pub tags: f64,
    pub description: f64,
    pub text_fields: f64,
}

impl Default for FieldWeights {
    fn default() -> Self {
        FieldWeights {
            title: 3.0,
            tags: 2.0,
            description: 1.0,
            text_fields: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexPosting {
    pub term: String,
    pub listing_id: ListingId,
    pub weighted_tf: f64,
}

#[derive(Debug, Clone, Default)]
pub struct InvertedIndex {
    weights: FieldWeights,
    postings: HashMap<String, BTreeMap<ListingId, f64>>,
    doc_terms: HashMap<ListingId, Vec<String>>,
}

impl InvertedIndex {
    pub fn new(weights: FieldWeights) -> Self {
        InvertedIndex {
            weights,
            ..Default::default()
        }
    }

    pub fn weights(&self) -> FieldWeights {
        self.weights
    }

    /// Weighted term frequencies of one listing's text.
    pub fn weighted_terms(&self, listing: &Listing, tokenizer: &Tokenizer) -> BTreeMap<String, f64> {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        let mut add = |text: &str, weight: f64| {
            for token in tokenizer.tokenize(text) {
                *tf.entry(token).or_insert(0.0) += weight;
            }
        };
        add(&listing.title, self.weights.title);
        for tag in &listing.tags {
            add(tag, self.weights.tags);
        }
        add(&listing.description, self.weights.description);
        for text in listing.text_field_values() {
            add(text, self.weights.text_fields);
        }
        tf
    }

    /// Replaces whatever the index held for this listing.
    pub fn upsert(&mut self, listing: &Listing, tokenizer: &Tokenizer) {
        self.remove(listing.id);
        let terms = self.weighted_terms(listing, tokenizer);
        let mut names = Vec::with_capacity(terms.len());
        for (term, weighted_tf) in terms {
            self.postings
                .entry(term.clone())
                .or_default()
                .insert(listing.id, weighted_tf);
            names.push(term);
        }
        self.doc_terms.insert(listing.id, names);
    }

    pub fn remove(&mut self, id: ListingId) {
        let Some(terms) = self.doc_terms.remove(&id) else {
            return;
        };
        for term in terms {
            if let Some(list) = self.postings.get_mut(&term) {
                list.remove(&id);
                if list.is_empty() {
                    self.postings.remove(&term);
                }
            }
        }
    }

    pub fn contains(&self, id: ListingId) -> bool {
        self.doc_terms.contains_key(&id)
    }

    /// Number of indexed listings.
    pub fn doc_count(&self) -> usize {
        self.doc_terms.len()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = ListingId> + '_ {
        self.doc_terms.keys().copied()
    }

    /// Number of listings containing `term`.
    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, BTreeMap::len)
    }

    pub fn weighted_tf(&self, term: &str, id: ListingId) -> f64 {
        self.postings
            .get(term)
            .and_then(|p| p.get(&id))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn postings<'a>(&'a self, term: &'a str) -> impl Iterator<Item = IndexPosting> + 'a {
        self.postings.get(term).into_iter().flat_map(move |list| {
            list.iter().map(move |(id, tf)| IndexPosting {
                term: term.to_string(),
                listing_id: *id,
                weighted_tf: *tf,
            })
        })
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn clear(&mut self) {
        self.postings.clear();
        self.doc_terms.clear();
    }
}
