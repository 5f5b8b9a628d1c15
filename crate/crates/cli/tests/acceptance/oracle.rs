//! Reference scorer used to check ranking. It shares no code with the
//! library: tokenizer, synonym expansion, statistics and great-circle
//! distance are all written out here from the ranking definition.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use classifieds_core::marketplace::{Listing, ListingStatus, Visibility};
use classifieds_core::schema::FieldValue;
use classifieds_core::{GeoPoint, ListingId, NetworkId, UserId};
use regex::Regex;

pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const DECAY_KM: f64 = 25.0;
pub const FRESHNESS_DAYS: f64 = 30.0;
pub const W_TEXT: f64 = 1.0;
pub const W_LOC: f64 = 0.3;
pub const W_FRESH: f64 = 0.2;

pub struct Reference {
    stopwords: BTreeSet<String>,
    synonyms: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct Expected {
    pub id: ListingId,
    pub total: f64,
    pub text: f64,
    pub location: f64,
    pub freshness: f64,
    pub matched: usize,
}

/// Atan2 form of the haversine distance.
pub fn distance_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().atan2((1.0 - h).sqrt())
}

pub fn boost(d_km: f64) -> f64 {
    (-d_km / DECAY_KM).exp()
}

impl Reference {
    /// `stopwords` is one word per line; `synonyms` is `term: a, b` per line.
    pub fn new(stopwords: &str, synonyms: &str) -> Reference {
        let stopwords = stopwords.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect();
        let mut table: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for line in synonyms.lines().filter(|l| !l.trim().is_empty()) {
            let (term, rest) = line.split_once(':').expect("term: synonyms");
            let list = table.entry(term.trim().to_string()).or_default();
            for s in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                if s != term.trim() && !list.iter().any(|x| x == s) {
                    list.push(s.to_string());
                }
            }
        }
        Reference { stopwords, synonyms: table }
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        static WORD: OnceLock<Regex> = OnceLock::new();
        let word = WORD.get_or_init(|| Regex::new(r"[\p{Alphabetic}\p{N}]+").unwrap());
        word.find_iter(text)
            .map(|m| m.as_str().to_lowercase())
            .filter(|t| t.chars().count() > 1 && !self.stopwords.contains(t))
            .collect()
    }

    fn count(&self, text: &str, term: &str) -> f64 {
        self.tokenize(text).iter().filter(|t| t.as_str() == term).count() as f64
    }

    /// Title counts three times, each tag twice, other text once.
    pub fn weighted_tf(&self, l: &Listing, term: &str) -> f64 {
        let mut tf = 3.0 * self.count(&l.title, term);
        for tag in &l.tags {
            tf += 2.0 * self.count(tag, term);
        }
        tf += self.count(&l.description, term);
        for (label, value) in &l.values {
            if let (false, FieldValue::Text(text)) = (label == "Title", value) {
                tf += self.count(text, term);
            }
        }
        tf
    }

    /// Query terms with their weights: originals at 1, then one hop of
    /// synonyms at 0.5.
    pub fn expand(&self, raw: &[String]) -> Vec<(String, f64)> {
        let mut terms: Vec<(String, f64)> = Vec::new();
        for t in raw.iter().flat_map(|r| self.tokenize(r)) {
            if !terms.iter().any(|(x, _)| *x == t) {
                terms.push((t, 1.0));
            }
        }
        for i in 0..terms.len() {
            for s in self.synonyms.get(&terms[i].0).into_iter().flatten() {
                if !terms.iter().any(|(x, _)| x == s) {
                    terms.push((s.clone(), 0.5));
                }
            }
        }
        terms
    }

    /// Scores every listing against every term and sorts.
    pub fn rank(
        &self,
        corpus: &[Listing],
        networks: &BTreeMap<UserId, NetworkId>,
        viewer: UserId,
        raw: &[String],
        origin: Option<GeoPoint>,
        now: DateTime<Utc>,
    ) -> Vec<Expected> {
        let terms = self.expand(raw);
        let active: Vec<&Listing> = corpus.iter().filter(|l| l.status == ListingStatus::Active).collect();
        let n = active.len() as f64;
        let mut tf: BTreeMap<(ListingId, &str), f64> = BTreeMap::new();
        for l in &active {
            for (t, _) in &terms {
                tf.insert((l.id, t.as_str()), self.weighted_tf(l, t));
            }
        }
        let visible = |l: &Listing| {
            l.visibility == Visibility::Public || networks[&l.owner_id] == networks[&viewer] || l.owner_id == viewer
        };
        let mut out = Vec::new();
        for l in active.iter().filter(|l| visible(l)) {
            let mut text = 0.0;
            let mut matched = 0;
            for (term, weight) in &terms {
                let f = tf[&(l.id, term.as_str())];
                if f > 0.0 {
                    let df = active.iter().filter(|d| tf[&(d.id, term.as_str())] > 0.0).count() as f64;
                    text += weight * (1.0 + f.ln()) * (((n + 1.0) / (df + 1.0)).ln() + 1.0);
                    matched += 1;
                }
            }
            if !terms.is_empty() && matched == 0 {
                continue;
            }
            let location = match (origin, l.location) {
                (Some(o), Some(p)) => boost(distance_km(o, p)),
                _ => 0.0,
            };
            let age_days = (now - l.created_at).num_milliseconds().max(0) as f64 / 86_400_000.0;
            let freshness = (-age_days / FRESHNESS_DAYS).exp();
            out.push((
                l.created_at,
                Expected {
                    id: l.id,
                    total: W_TEXT * text + W_LOC * location + W_FRESH * freshness,
                    text,
                    location,
                    freshness,
                    matched,
                },
            ));
        }
        out.sort_by(|(ca, a), (cb, b)| {
            b.total
                .partial_cmp(&a.total)
                .unwrap()
                .then_with(|| cb.cmp(ca))
                .then_with(|| a.id.cmp(&b.id))
        });
        out.into_iter().map(|(_, e)| e).collect()
    }
}
