//! Retrieval and ranking.
//!
//! A query's text similarity to a listing is the sum of per-term scores over
//! the synonym-expanded query; the total adds a distance boost and a freshness
//! term with configurable weights.

mod expand;
mod index;
mod rank;
mod score;
mod tokenize;

use thiserror::Error;

pub use expand::{expand_query, SynonymError, SynonymTable, WeightedTerm, ORIGINAL_WEIGHT, SYNONYM_WEIGHT};
pub use index::{FieldWeights, IndexPosting, InvertedIndex};
pub use rank::{
    compare_results, paginate, FieldFilter, Page, RankedResult, Ranker, SearchQuery, TermMatch, MAX_PAGE_SIZE,
};
pub use score::{
    freshness, idf, location_boost, term_score, tf_component, RankingConfig, RankingWeights,
};
pub use tokenize::{tokenize, Tokenizer, DEFAULT_STOPWORDS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("field {0:?} is not a search filter for this category")]
    InvalidFilter(String),
    #[error("page size must be between 1 and {MAX_PAGE_SIZE}")]
    InvalidPageSize(usize),
}

impl SearchError {
    pub fn code(&self) -> &'static str {
        match self {
            SearchError::InvalidFilter(_) => "InvalidFilter",
            SearchError::InvalidPageSize(_) => "InvalidPageSize",
        }
    }
}
