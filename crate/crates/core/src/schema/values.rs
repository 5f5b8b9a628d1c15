//! Typed field values and validation of user-supplied strings against a template.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{CategorySchema, DataType, TITLE_LABEL};
use crate::geo::GeoPoint;

const MAX_TEXT_CHARS: usize = 10_000;

/// Currency amount in integer minor units (cents) with an ISO-4217 style code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Money {
    pub minor_units: i64,
    pub code: String,
}

impl Money {
    pub fn major(&self) -> f64 {
        self.minor_units as f64 / 100.0
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}.{:02}", self.code, self.minor_units / 100, self.minor_units % 100)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "kebab-case")]
pub enum FieldValue {
    Text(String),
    DateTime(DateTime<Utc>),
    Currency(Money),
    Number(f64),
    Location(GeoPoint),
    Url(String),
}

impl FieldValue {
    pub fn data_type(&self) -> DataType {
        match self {
            FieldValue::Text(_) => DataType::Text,
            FieldValue::DateTime(_) => DataType::DateTime,
            FieldValue::Currency(_) => DataType::Currency,
            FieldValue::Number(_) => DataType::Number,
            FieldValue::Location(_) => DataType::Location,
            FieldValue::Url(_) => DataType::Url,
        }
    }

    /// Numeric view used by range filters: numbers as-is, currency in major units.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            FieldValue::Number(n) => Some(*n),
            FieldValue::Currency(m) => Some(m.major()),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            FieldValue::Text(t) => Some(t),
            _ => None,
        }
    }

    /// Canonical string form; parsing it again yields the same value.
    pub fn display(&self) -> String {
        match self {
            FieldValue::Text(t) | FieldValue::Url(t) => t.clone(),
            FieldValue::DateTime(dt) => dt.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            FieldValue::Currency(m) => m.to_string(),
            FieldValue::Number(n) => n.to_string(),
            FieldValue::Location(p) => format!("{},{}", p.lat, p.lon),
        }
    }

    pub fn parse(data_type: DataType, raw: &str) -> Result<FieldValue, String> {
        let raw = raw.trim();
        match data_type {
            DataType::Text => {
                if raw.chars().count() > MAX_TEXT_CHARS {
                    Err(format!("longer than {MAX_TEXT_CHARS} characters"))
                } else {
                    Ok(FieldValue::Text(raw.to_string()))
                }
            }
            DataType::DateTime => parse_date_time(raw).map(FieldValue::DateTime),
            DataType::Currency => parse_currency(raw).map(FieldValue::Currency),
            DataType::Number => parse_number(raw).map(FieldValue::Number),
            DataType::Location => GeoPoint::parse(raw)
                .map(FieldValue::Location)
                .ok_or_else(|| "expected \"lat,lon\" in degrees".to_string()),
            DataType::Url => match url::Url::parse(raw) {
                Ok(u) if u.has_host() => Ok(FieldValue::Url(u.to_string())),
                _ => Err("not a valid absolute URL".to_string()),
            },
        }
    }
}

/// ISO-8601 timestamp, date-time without offset (taken as UTC), or bare date.
pub fn parse_date_time(raw: &str) -> Result<DateTime<Utc>, String> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Ok(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Ok(naive.and_utc());
        }
    }
    if let Ok(date) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return Ok(date.and_hms_opt(0, 0, 0).unwrap().and_utc());
    }
    Err("expected an ISO-8601 date-time".to_string())
}

/// `[CODE] digits[.d[d]]`, e.g. `12`, `12.5`, `USD 12.50`, `eur3.99`.
pub fn parse_currency(raw: &str) -> Result<Money, String> {
    let raw = raw.trim();
    let bytes = raw.as_bytes();
    let (code, amount) = if bytes.len() >= 3 && bytes[..3].iter().all(u8::is_ascii_alphabetic) {
        (raw[..3].to_ascii_uppercase(), raw[3..].trim_start())
    } else {
        ("USD".to_string(), raw)
    };

    let (whole, frac) = match amount.split_once('.') {
        Some((w, f)) => (w, Some(f)),
        None => (amount, None),
    };
    if whole.is_empty() || !whole.bytes().all(|b| b.is_ascii_digit()) {
        return Err("expected a decimal amount".to_string());
    }
    let cents = match frac {
        None => 0,
        Some(f) if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) => {
            return Err("expected digits after the decimal point".to_string())
        }
        Some(f) if f.len() > 2 => return Err("at most two fraction digits".to_string()),
        Some(f) if f.len() == 1 => f.parse::<i64>().unwrap() * 10,
        Some(f) => f.parse::<i64>().unwrap(),
    };
    let minor_units = whole
        .parse::<i64>()
        .ok()
        .and_then(|w| w.checked_mul(100))
        .and_then(|w| w.checked_add(cents))
        .ok_or_else(|| "amount too large".to_string())?;
    Ok(Money { minor_units, code })
}

/// Plain decimal: optional sign, digits, optional fraction. No exponents or
/// special values.
pub fn parse_number(raw: &str) -> Result<f64, String> {
    let unsigned = raw.strip_prefix(['-', '+']).unwrap_or(raw);
    let (whole, frac) = match unsigned.split_once('.') {
        Some((w, f)) => (w, Some(f)),
        None => (unsigned, None),
    };
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(whole) || frac.is_some_and(|f| !digits(f)) {
        return Err("expected a decimal number".to_string());
    }
    raw.parse::<f64>()
        .ok()
        .filter(|n| n.is_finite())
        .ok_or_else(|| "number out of range".to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum FieldCheck {
    Ok,
    /// Required field not supplied.
    Missing,
    /// Optional field not supplied.
    Absent,
    TypeError(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldReport {
    pub label: String,
    pub check: FieldCheck,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub fields: Vec<FieldReport>,
    /// Supplied labels that the template does not define (or that repeat a
    /// label under different casing).
    pub unknown_labels: Vec<String>,
    #[serde(skip)]
    values: BTreeMap<String, FieldValue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.unknown_labels.is_empty()
            && self
                .fields
                .iter()
                .all(|f| matches!(f.check, FieldCheck::Ok | FieldCheck::Absent))
    }

    pub fn check_for(&self, label: &str) -> Option<&FieldCheck> {
        self.fields.iter().find(|f| f.label == label).map(|f| &f.check)
    }

    /// Parsed values keyed by the template's label spelling.
    pub fn values(&self) -> &BTreeMap<String, FieldValue> {
        &self.values
    }

    pub fn into_values(self) -> BTreeMap<String, FieldValue> {
        self.values
    }
}

/// Checks supplied strings against the template. Never fails: every problem is
/// reported in the returned [`ValidationReport`].
pub fn validate_values(schema: &CategorySchema, supplied: &BTreeMap<String, String>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut matched: BTreeMap<String, &str> = BTreeMap::new();

    for (label, raw) in supplied {
        match schema.field(label) {
            Some(field) if !matched.contains_key(&field.label) => {
                matched.insert(field.label.clone(), raw);
            }
            _ => report.unknown_labels.push(label.clone()),
        }
    }

    for field in &schema.fields {
        let raw = matched.get(&field.label).map(|r| r.trim()).filter(|r| !r.is_empty());
        let check = match raw {
            None if field.label == TITLE_LABEL => FieldCheck::Missing,
            None => FieldCheck::Absent,
            Some(raw) => match FieldValue::parse(field.data_type, raw) {
                Ok(value) => {
                    report.values.insert(field.label.clone(), value);
                    FieldCheck::Ok
                }
                Err(reason) => FieldCheck::TypeError(reason),
            },
        };
        report.fields.push(FieldReport {
            label: field.label.clone(),
            check,
        });
    }
    report
}
