//! Line-oriented `key = value` configuration.

use std::fmt;
use std::fs;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use chrono::Duration;
use classifieds_core::search::{RankingConfig, RankingWeights};
use classifieds_core::MarketplaceConfig;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("{}{reason}", line.map(|n| format!("line {n}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub reason: String,
}

impl ConfigError {
    fn at(line: usize, reason: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            reason: reason.into(),
        }
    }

    fn general(reason: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub bind_address: IpAddr,
    pub port: u16,
    /// Public prefix for links in outgoing mail. Defaults to
    /// `http://localhost:{port}`.
    pub base_url: String,
    pub data_dir: PathBuf,
    pub schema_dir: PathBuf,
    pub network_registry_path: PathBuf,
    pub synonym_table_path: Option<PathBuf>,
    pub stopwords_path: Option<PathBuf>,
    pub w_text: f64,
    pub w_loc: f64,
    pub w_fresh: f64,
    pub decay_km: f64,
    pub freshness_days: f64,
    pub page_size: usize,
    pub session_ttl_days: i64,
    pub verification_ttl_hours: i64,
    pub password_iterations: u32,
    /// Flush the journal to disk on every commit.
    pub fsync: bool,
    /// How often queued notifications are written to the outbox.
    pub flush_interval_ms: u64,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>, schema_dir: impl Into<PathBuf>, network_registry_path: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            bind_address: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            base_url: "http://localhost:8080".into(),
            data_dir: data_dir.into(),
            schema_dir: schema_dir.into(),
            network_registry_path: network_registry_path.into(),
            synonym_table_path: None,
            stopwords_path: None,
            w_text: 1.0,
            w_loc: 0.3,
            w_fresh: 0.2,
            decay_km: 25.0,
            freshness_days: 30.0,
            page_size: 20,
            session_ttl_days: 14,
            verification_ttl_hours: 48,
            password_iterations: 100_000,
            fsync: true,
            flush_interval_ms: 1000,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::general(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        ServiceConfig::parse(&text, base)
    }

    /// Parses a config file. Relative paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut values = std::collections::BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::at(n, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if values.insert(key.to_string(), (n, value.to_string())).is_some() {
                return Err(ConfigError::at(n, format!("`{key}` given twice")));
            }
        }

        let take = |key: &str| values.get(key).cloned();
        let path = |key: &str| -> Option<PathBuf> { take(key).map(|(_, v)| base_dir.join(v)) };
        let required = |key: &str| path(key).ok_or_else(|| ConfigError::general(format!("missing `{key}`")));

        let mut config = ServiceConfig::new(required("data_dir")?, required("schema_dir")?, required("network_registry_path")?);
        config.synonym_table_path = path("synonym_table_path");
        config.stopwords_path = path("stopwords_path");

        fn parsed<T: std::str::FromStr>(entry: Option<(usize, String)>, key: &str, slot: &mut T) -> Result<(), ConfigError>
        where
            T::Err: fmt::Display,
        {
            if let Some((n, v)) = entry {
                *slot = v.parse().map_err(|e| ConfigError::at(n, format!("`{key}`: {e}")))?;
            }
            Ok(())
        }
        parsed(take("bind_address"), "bind_address", &mut config.bind_address)?;
        parsed(take("port"), "port", &mut config.port)?;
        parsed(take("w_text"), "w_text", &mut config.w_text)?;
        parsed(take("w_loc"), "w_loc", &mut config.w_loc)?;
        parsed(take("w_fresh"), "w_fresh", &mut config.w_fresh)?;
        parsed(take("decay_km"), "decay_km", &mut config.decay_km)?;
        parsed(take("freshness_days"), "freshness_days", &mut config.freshness_days)?;
        parsed(take("page_size"), "page_size", &mut config.page_size)?;
        parsed(take("session_ttl_days"), "session_ttl_days", &mut config.session_ttl_days)?;
        parsed(take("verification_ttl_hours"), "verification_ttl_hours", &mut config.verification_ttl_hours)?;
        parsed(take("password_iterations"), "password_iterations", &mut config.password_iterations)?;
        parsed(take("fsync"), "fsync", &mut config.fsync)?;
        parsed(take("flush_interval_ms"), "flush_interval_ms", &mut config.flush_interval_ms)?;
        config.base_url = match take("base_url") {
            Some((_, v)) => v.trim_end_matches('/').to_string(),
            None => format!("http://localhost:{}", config.port),
        };

        for (key, (n, _)) in &values {
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::at(*n, format!("unknown key `{key}`")));
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::general(m));
        if self.port == 0 {
            return fail("port must be in 1..65535");
        }
        for (name, w) in [("w_text", self.w_text), ("w_loc", self.w_loc), ("w_fresh", self.w_fresh)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(ConfigError::general(format!("`{name}` must be a non-negative number")));
            }
        }
        if !(self.decay_km.is_finite() && self.decay_km > 0.0) {
            return fail("`decay_km` must be positive");
        }
        if !(self.freshness_days.is_finite() && self.freshness_days > 0.0) {
            return fail("`freshness_days` must be positive");
        }
        if !(1..=classifieds_core::search::MAX_PAGE_SIZE).contains(&self.page_size) {
            return fail("`page_size` must be in 1..100");
        }
        if self.session_ttl_days <= 0 || self.verification_ttl_hours <= 0 {
            return fail("lifetimes must be positive");
        }
        if self.password_iterations == 0 {
            return fail("`password_iterations` must be positive");
        }
        if url::Url::parse(&self.base_url).is_err() {
            return fail("`base_url` is not a URL");
        }
        Ok(())
    }

    /// Renders the config in the file format `parse` reads.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        put("bind_address", self.bind_address.to_string());
        put("port", self.port.to_string());
        put("base_url", self.base_url.clone());
        put("data_dir", self.data_dir.display().to_string());
        put("schema_dir", self.schema_dir.display().to_string());
        put("network_registry_path", self.network_registry_path.display().to_string());
        if let Some(p) = &self.synonym_table_path {
            put("synonym_table_path", p.display().to_string());
        }
        if let Some(p) = &self.stopwords_path {
            put("stopwords_path", p.display().to_string());
        }
        put("w_text", self.w_text.to_string());
        put("w_loc", self.w_loc.to_string());
        put("w_fresh", self.w_fresh.to_string());
        put("decay_km", self.decay_km.to_string());
        put("freshness_days", self.freshness_days.to_string());
        put("page_size", self.page_size.to_string());
        put("session_ttl_days", self.session_ttl_days.to_string());
        put("verification_ttl_hours", self.verification_ttl_hours.to_string());
        put("password_iterations", self.password_iterations.to_string());
        put("fsync", self.fsync.to_string());
        put("flush_interval_ms", self.flush_interval_ms.to_string());
        out
    }

    pub fn socket_addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind_address, self.port)
    }

    pub fn ranking(&self) -> RankingConfig {
        RankingConfig {
            weights: RankingWeights {
                text: self.w_text,
                location: self.w_loc,
                freshness: self.w_fresh,
            },
            decay_km: self.decay_km,
            freshness_days: self.freshness_days,
            ..RankingConfig::default()
        }
    }

    pub fn marketplace(&self) -> MarketplaceConfig {
        MarketplaceConfig {
            base_url: self.base_url.clone(),
            verification_ttl: Duration::hours(self.verification_ttl_hours),
            password_iterations: self.password_iterations,
        }
    }

    pub fn session_ttl(&self) -> Duration {
        Duration::days(self.session_ttl_days)
    }

    pub fn outbox_dir(&self) -> PathBuf {
        self.data_dir.join("outbox")
    }
}

const KEYS: [&str; 19] = [
    "bind_address",
    "port",
    "base_url",
    "data_dir",
    "schema_dir",
    "network_registry_path",
    "synonym_table_path",
    "stopwords_path",
    "w_text",
    "w_loc",
    "w_fresh",
    "decay_km",
    "freshness_days",
    "page_size",
    "session_ttl_days",
    "verification_ttl_hours",
    "password_iterations",
    "fsync",
    "flush_interval_ms",
];
