//! Email-derived network membership, accounts and privacy redaction.

mod password;
mod redact;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;
use crate::ids::{NetworkId, UserId};

pub use password::PasswordDigest;
pub(crate) use password::token_digest;
pub use redact::{access_level, redact, RedactedListing, RedactionLevel, Viewer};

pub const MIN_PASSWORD_CHARS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("invalid email address")]
    InvalidEmail,
    #[error("no network is registered for domain {0:?}")]
    UnknownDomain(String),
    #[error("username is taken")]
    UsernameTaken,
    #[error("usernames are 3-32 characters of a-z, 0-9 and _")]
    InvalidUsername,
    #[error("passwords need at least {MIN_PASSWORD_CHARS} characters")]
    WeakPassword,
    #[error("email address is already registered")]
    EmailAlreadyRegistered,
    #[error("unknown verification token")]
    TokenUnknown,
    #[error("verification token has expired")]
    TokenExpired,
    #[error("verification token was already used")]
    TokenAlreadyUsed,
    #[error("invalid credentials")]
    InvalidCredentials,
    #[error("account is not verified")]
    AccountInactive,
    #[error("not visible to this viewer")]
    Denied,
    #[error("unknown user")]
    UnknownUser,
    #[error("domain {0:?} already belongs to another network")]
    OverlappingDomain(String),
    #[error("network {0} already exists")]
    DuplicateNetwork(NetworkId),
    #[error("network registry line {line}: {reason}")]
    RegistryFormat { line: usize, reason: String },
    #[error("full name must be at most 200 printable characters")]
    InvalidFullName,
    #[error("invalid preferences: {0}")]
    InvalidPreferences(String),
}

impl IdentityError {
    pub fn code(&self) -> &'static str {
        match self {
            IdentityError::InvalidEmail => "InvalidEmail",
            IdentityError::UnknownDomain(_) => "UnknownDomain",
            IdentityError::UsernameTaken => "UsernameTaken",
            IdentityError::InvalidUsername => "InvalidUsername",
            IdentityError::WeakPassword => "WeakPassword",
            IdentityError::EmailAlreadyRegistered => "EmailAlreadyRegistered",
            IdentityError::TokenUnknown => "TokenUnknown",
            IdentityError::TokenExpired => "TokenExpired",
            IdentityError::TokenAlreadyUsed => "TokenAlreadyUsed",
            IdentityError::InvalidCredentials => "InvalidCredentials",
            IdentityError::AccountInactive => "AccountInactive",
            IdentityError::Denied => "Denied",
            IdentityError::UnknownUser => "UnknownUser",
            IdentityError::OverlappingDomain(_) => "OverlappingDomain",
            IdentityError::DuplicateNetwork(_) => "DuplicateNetwork",
            IdentityError::RegistryFormat { .. } => "RegistryFormat",
            IdentityError::InvalidFullName => "InvalidFullName",
            IdentityError::InvalidPreferences(_) => "InvalidPreferences",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub id: NetworkId,
    pub display_name: String,
    pub domain_suffixes: BTreeSet<String>,
}

impl Network {
    /// Registry file line: `id<TAB>display name<TAB>domain,domain`.
    pub fn to_line(&self) -> String {
        let domains: Vec<&str> = self.domain_suffixes.iter().map(String::as_str).collect();
        format!("{}\t{}\t{}", self.id, self.display_name, domains.join(","))
    }

    pub fn parse_line(line: &str) -> Result<Network, String> {
        let mut parts = line.split('\t');
        let (Some(id), Some(name), Some(domains), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err("expected three tab-separated columns".into());
        };
        let id = id.trim();
        let name = name.trim();
        if id.is_empty() || name.is_empty() {
            return Err("empty network id or display name".into());
        }
        let mut suffixes = BTreeSet::new();
        for domain in domains.split(',').map(str::trim).filter(|d| !d.is_empty()) {
            let domain = domain.to_ascii_lowercase();
            if !valid_domain(&domain) {
                return Err(format!("invalid domain {domain:?}"));
            }
            suffixes.insert(domain);
        }
        if suffixes.is_empty() {
            return Err("network needs at least one domain".into());
        }
        Ok(Network {
            id: NetworkId::new(id),
            display_name: name.to_string(),
            domain_suffixes: suffixes,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct NetworkRegistry {
    networks: BTreeMap<NetworkId, Network>,
}

impl NetworkRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses the line-oriented registry format. Blank lines and `#` comments
    /// are skipped.
    pub fn parse(text: &str) -> Result<Self, IdentityError> {
        let mut registry = NetworkRegistry::new();
        for (n, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let network = Network::parse_line(line).map_err(|reason| IdentityError::RegistryFormat {
                line: n + 1,
                reason,
            })?;
            registry.add(network)?;
        }
        Ok(registry)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for network in self.networks.values() {
            writeln!(out, "{}", network.to_line()).unwrap();
        }
        out
    }

    pub fn add(&mut self, network: Network) -> Result<(), IdentityError> {
        if self.networks.contains_key(&network.id) {
            return Err(IdentityError::DuplicateNetwork(network.id));
        }
        for existing in self.networks.values() {
            if let Some(d) = existing.domain_suffixes.intersection(&network.domain_suffixes).next() {
                return Err(IdentityError::OverlappingDomain(d.clone()));
            }
        }
        self.networks.insert(network.id.clone(), network);
        Ok(())
    }

    pub fn get(&self, id: &NetworkId) -> Option<&Network> {
        self.networks.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Network> {
        self.networks.values()
    }

    pub fn len(&self) -> usize {
        self.networks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.networks.is_empty()
    }

    /// Network owning the longest registered suffix of the email's domain.
    pub fn network_of(&self, email: &str) -> Result<NetworkId, IdentityError> {
        let (_, domain) = parse_email(email)?;
        self.networks
            .values()
            .flat_map(|n| n.domain_suffixes.iter().map(move |s| (s, &n.id)))
            .filter(|(suffix, _)| {
                domain == **suffix
                    || (domain.len() > suffix.len()
                        && domain.ends_with(suffix.as_str())
                        && domain.as_bytes()[domain.len() - suffix.len() - 1] == b'.')
            })
            .max_by_key(|(suffix, _)| suffix.len())
            .map(|(_, id)| id.clone())
            .ok_or(IdentityError::UnknownDomain(domain))
    }
}

/// Splits an address into local part and lowercased domain.
pub fn parse_email(email: &str) -> Result<(String, String), IdentityError> {
    let (local, domain) = email.trim().split_once('@').ok_or(IdentityError::InvalidEmail)?;
    let local_ok = !local.is_empty()
        && local.len() <= 64
        && local
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "._%+-'".contains(c));
    let domain = domain.to_ascii_lowercase();
    if !local_ok || !valid_domain(&domain) || !domain.contains('.') {
        return Err(IdentityError::InvalidEmail);
    }
    Ok((local.to_string(), domain))
}

fn valid_domain(domain: &str) -> bool {
    !domain.is_empty()
        && domain.len() <= 253
        && domain.split('.').all(|label| {
            !label.is_empty()
                && label.len() <= 63
                && !label.starts_with('-')
                && !label.ends_with('-')
                && label.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
        })
}

pub fn valid_username(username: &str) -> bool {
    (3..=32).contains(&username.len())
        && username
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

/// Newsfeed preferences. Empty sets and a missing radius filter nothing.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Preferences {
    #[serde(default)]
    pub categories: BTreeSet<String>,
    #[serde(default)]
    pub networks: BTreeSet<NetworkId>,
    #[serde(default)]
    pub radius_km: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    pub username: String,
    pub email: String,
    pub network_id: NetworkId,
    pub password: PasswordDigest,
    #[serde(default)]
    pub full_name: Option<String>,
    #[serde(default)]
    pub home_location: Option<GeoPoint>,
    #[serde(default)]
    pub preferences: Preferences,
    pub active: bool,
    pub created_at: DateTime<Utc>,
}

/// Single-use email verification token, stored only as a digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationToken {
    pub digest: String,
    pub user_id: UserId,
    pub expires_at: DateTime<Utc>,
    pub used: bool,
}
