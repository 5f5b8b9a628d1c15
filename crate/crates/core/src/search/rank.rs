use std::cmp::Ordering;
use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{
    expand_query, freshness, location_boost, term_score, InvertedIndex, RankingConfig,
    SearchError, SynonymTable, Tokenizer, WeightedTerm,
};
use crate::geo::GeoPoint;
use crate::ids::ListingId;
use crate::marketplace::Listing;
use crate::schema::{derive_filter_spec, parse_date_time, CategorySchema, DataType, FieldValue};

pub const MAX_PAGE_SIZE: usize = 100;

/// Predicate over one filterable field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum FieldFilter {
    /// Case-insensitive substring match on text fields.
    Contains { value: String },
    /// Inclusive bounds on number or currency fields (currency in major units).
    Range { min: Option<f64>, max: Option<f64> },
    /// Inclusive bounds on date-time fields.
    DateRange {
        from: Option<DateTime<Utc>>,
        to: Option<DateTime<Utc>>,
    },
}

impl FieldFilter {
    /// Parses `contains:<text>` or `range:<lo>..<hi>` (either bound may be
    /// empty) for a field of the given type.
    pub fn parse(spec: &str, data_type: DataType) -> Result<FieldFilter, String> {
        let (op, arg) = spec
            .split_once(':')
            .ok_or_else(|| "expected `contains:<text>` or `range:<lo>..<hi>`".to_string())?;
        match (op, data_type) {
            ("contains", DataType::Text) => Ok(FieldFilter::Contains {
                value: arg.to_string(),
            }),
            ("range", DataType::Number | DataType::Currency | DataType::DateTime) => {
                let (lo, hi) = arg
                    .split_once("..")
                    .ok_or_else(|| "range bounds must be written `lo..hi`".to_string())?;
                let (lo, hi) = (lo.trim(), hi.trim());
                if data_type == DataType::DateTime {
                    let bound = |s: &str| (!s.is_empty()).then(|| parse_date_time(s)).transpose();
                    Ok(FieldFilter::DateRange {
                        from: bound(lo)?,
                        to: bound(hi)?,
                    })
                } else {
                    let bound = |s: &str| {
                        (!s.is_empty())
                            .then(|| s.parse::<f64>().map_err(|_| format!("bad bound {s:?}")))
                            .transpose()
                    };
                    Ok(FieldFilter::Range {
                        min: bound(lo)?,
                        max: bound(hi)?,
                    })
                }
            }
            _ => Err(format!("`{op}` does not apply to {data_type} fields")),
        }
    }

    pub fn applies_to(&self, data_type: DataType) -> bool {
        match self {
            FieldFilter::Contains { .. } => data_type == DataType::Text,
            FieldFilter::Range { .. } => matches!(data_type, DataType::Number | DataType::Currency),
            FieldFilter::DateRange { .. } => data_type == DataType::DateTime,
        }
    }

    pub fn matches(&self, value: Option<&FieldValue>) -> bool {
        let Some(value) = value else {
            return false;
        };
        match self {
            FieldFilter::Contains { value: needle } => value
                .as_text()
                .is_some_and(|t| t.to_lowercase().contains(&needle.to_lowercase())),
            FieldFilter::Range { min, max } => value.as_f64().is_some_and(|v| {
                min.is_none_or(|lo| v >= lo) && max.is_none_or(|hi| v <= hi)
            }),
            FieldFilter::DateRange { from, to } => match value {
                FieldValue::DateTime(t) => {
                    from.is_none_or(|lo| *t >= lo) && to.is_none_or(|hi| *t <= hi)
                }
                _ => false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchQuery {
    /// Raw strings; each is tokenized before expansion.
    pub terms: Vec<String>,
    pub category: Option<String>,
    pub subcategory: Option<String>,
    pub field_filters: BTreeMap<String, FieldFilter>,
    pub origin: Option<GeoPoint>,
    pub page: usize,
    pub page_size: usize,
}

impl Default for SearchQuery {
    fn default() -> Self {
        SearchQuery {
            terms: Vec::new(),
            category: None,
            subcategory: None,
            field_filters: BTreeMap::new(),
            origin: None,
            page: 0,
            page_size: 20,
        }
    }
}

impl SearchQuery {
    pub fn text(text: &str) -> Self {
        SearchQuery {
            terms: text.split_whitespace().map(str::to_string).collect(),
            ..Default::default()
        }
    }

    pub fn check_page_size(&self) -> Result<(), SearchError> {
        if (1..=MAX_PAGE_SIZE).contains(&self.page_size) {
            Ok(())
        } else {
            Err(SearchError::InvalidPageSize(self.page_size))
        }
    }

    /// Every filter label must be a search filter of `schema` and the
    /// predicate must suit the field's type.
    pub fn check_filters(&self, schema: Option<&CategorySchema>) -> Result<(), SearchError> {
        if self.field_filters.is_empty() {
            return Ok(());
        }
        let filterable = schema.map(derive_filter_spec).unwrap_or_default();
        for (label, filter) in &self.field_filters {
            let field = filterable
                .iter()
                .find(|f| f.label.to_lowercase() == label.to_lowercase());
            match field {
                Some(f) if filter.applies_to(f.data_type) => {}
                _ => return Err(SearchError::InvalidFilter(label.clone())),
            }
        }
        Ok(())
    }

    /// Category, subcategory and field filters. Does not consider visibility.
    pub fn admits(&self, listing: &Listing) -> bool {
        if self.category.as_ref().is_some_and(|c| c != &listing.category) {
            return false;
        }
        if let Some(sub) = &self.subcategory {
            if listing.subcategory.as_ref().is_none_or(|s| !s.eq_ignore_ascii_case(sub)) {
                return false;
            }
        }
        self.field_filters.iter().all(|(label, filter)| {
            let value = listing
                .values
                .iter()
                .find(|(l, _)| l.to_lowercase() == label.to_lowercase())
                .map(|(_, v)| v);
            filter.matches(value)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermMatch {
    pub term: String,
    pub weight: f64,
    pub expanded: bool,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub listing_id: ListingId,
    pub score_total: f64,
    pub score_text: f64,
    pub score_location: f64,
    pub score_freshness: f64,
    pub matched_terms: Vec<TermMatch>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
}

impl<T> Page<T> {
    pub fn has_more(&self) -> bool {
        (self.page + 1).saturating_mul(self.page_size) < self.total
    }

    pub fn map<U>(self, f: impl FnMut(T) -> U) -> Page<U> {
        Page {
            items: self.items.into_iter().map(f).collect(),
            page: self.page,
            page_size: self.page_size,
            total: self.total,
        }
    }
}

/// Zero-based page `page` of `items`.
pub fn paginate<T>(items: Vec<T>, page: usize, page_size: usize) -> Page<T> {
    let total = items.len();
    let start = page.saturating_mul(page_size).min(total);
    let items = items.into_iter().skip(start).take(page_size).collect();
    Page {
        items,
        page,
        page_size,
        total,
    }
}

#[derive(Debug, Clone, Default)]
pub struct Ranker {
    config: RankingConfig,
    tokenizer: Tokenizer,
    synonyms: SynonymTable,
}

impl Ranker {
    pub fn new(config: RankingConfig, tokenizer: Tokenizer, synonyms: SynonymTable) -> Self {
        Ranker {
            config,
            tokenizer,
            synonyms,
        }
    }

    pub fn config(&self) -> &RankingConfig {
        &self.config
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn synonyms(&self) -> &SynonymTable {
        &self.synonyms
    }

    /// Tokenized, deduplicated and expanded query terms.
    pub fn query_terms(&self, raw: &[String]) -> Vec<WeightedTerm> {
        let tokens: Vec<String> = raw.iter().flat_map(|r| self.tokenizer.tokenize(r)).collect();
        expand_query(&tokens, &self.synonyms)
    }

    pub fn score(
        &self,
        index: &InvertedIndex,
        listing: &Listing,
        terms: &[WeightedTerm],
        origin: Option<GeoPoint>,
        now: DateTime<Utc>,
    ) -> RankedResult {
        let n = index.doc_count();
        let mut score_text = 0.0;
        let mut matched_terms = Vec::new();
        for t in terms {
            let wtf = index.weighted_tf(&t.term, listing.id);
            let s = term_score(t.weight, wtf, index.df(&t.term), n);
            if s > 0.0 {
                score_text += s;
                matched_terms.push(TermMatch {
                    term: t.term.clone(),
                    weight: t.weight,
                    expanded: t.expanded,
                    score: s,
                });
            }
        }
        let score_location = location_boost(origin, listing.location, self.config.decay_km);
        let score_freshness = freshness(listing.created_at, now, self.config.freshness_days);
        let w = self.config.weights;
        RankedResult {
            listing_id: listing.id,
            score_total: w.text * score_text + w.location * score_location + w.freshness * score_freshness,
            score_text,
            score_location,
            score_freshness,
            matched_terms,
            created_at: listing.created_at,
        }
    }

    /// Scores and orders `candidates`. With a non-empty expanded query only
    /// listings matching at least one term are returned.
    pub fn rank<'a, I>(
        &self,
        index: &InvertedIndex,
        candidates: I,
        query: &SearchQuery,
        now: DateTime<Utc>,
    ) -> Vec<RankedResult>
    where
        I: IntoIterator<Item = &'a Listing>,
    {
        let terms = self.query_terms(&query.terms);
        let mut results: Vec<RankedResult> = candidates
            .into_iter()
            .map(|l| self.score(index, l, &terms, query.origin, now))
            .filter(|r| terms.is_empty() || !r.matched_terms.is_empty())
            .collect();
        results.sort_by(compare_results);
        results
    }
}

/// Higher total first, then newer, then lower id.
pub fn compare_results(a: &RankedResult, b: &RankedResult) -> Ordering {
    b.score_total
        .total_cmp(&a.score_total)
        .then_with(|| b.created_at.cmp(&a.created_at))
        .then_with(|| a.listing_id.cmp(&b.listing_id))
}
