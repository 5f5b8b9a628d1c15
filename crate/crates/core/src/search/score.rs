use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::FieldWeights;
use crate::geo::GeoPoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingWeights {
    pub text: f64,
    pub location: f64,
    pub freshness: f64,
}

impl Default for RankingWeights {
    fn default() -> Self {
        RankingWeights {
            text: 1.0,
            location: 0.3,
            freshness: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingConfig {
    pub weights: RankingWeights,
    /// Distance in km at which the location boost falls to 1/e.
    pub decay_km: f64,
    /// Age in days at which freshness falls to 1/e.
    pub freshness_days: f64,
    pub field_weights: FieldWeights,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig {
            weights: RankingWeights::default(),
            decay_km: 25.0,
            freshness_days: 30.0,
            field_weights: FieldWeights::default(),
        }
    }
}

pub fn tf_component(weighted_tf: f64) -> f64 {
    if weighted_tf > 0.0 {
        1.0 + weighted_tf.ln()
    } else {
        0.0
    }
}

/// Smoothed inverse document frequency over `n` documents.
pub fn idf(df: usize, n: usize) -> f64 {
    ((n as f64 + 1.0) / (df as f64 + 1.0)).ln() + 1.0
}

pub fn term_score(weight: f64, weighted_tf: f64, df: usize, n: usize) -> f64 {
    let tf = tf_component(weighted_tf);
    if tf == 0.0 {
        return 0.0;
    }
    weight * tf * idf(df, n)
}

/// `exp(-d / decay_km)`, or 0 when either point is unknown.
pub fn location_boost(origin: Option<GeoPoint>, location: Option<GeoPoint>, decay_km: f64) -> f64 {
    match (origin, location) {
        (Some(a), Some(b)) => (-a.distance_km(&b) / decay_km).exp(),
        _ => 0.0,
    }
}

/// `exp(-age_days / scale_days)`; listings dated in the future count as new.
pub fn freshness(created_at: DateTime<Utc>, now: DateTime<Utc>, scale_days: f64) -> f64 {
    let age_ms = (now - created_at).num_milliseconds().max(0) as f64;
    let age_days = age_ms / 86_400_000.0;
    (-age_days / scale_days).exp()
}
