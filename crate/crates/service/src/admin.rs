//! Operator commands. They open the store directly, so the service must not
//! be running against the same data directory.

use std::collections::BTreeMap;
use std::fs;
use std::sync::Arc;

use chrono::{DateTime, Duration, TimeZone, Utc};
use classifieds_core::identity::{Network, NetworkRegistry};
use classifieds_core::marketplace::{ListingDraft, Visibility};
use classifieds_core::schema::{CategorySchema, DataType, Decision, FieldRequest, InputType, SchemaEntry};
use classifieds_core::{GeoPoint, ManualClock, Marketplace, NetworkId, Registration, RequestId, UserId};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

use crate::config::ServiceConfig;
use crate::service::{write_atomically, OpenOptions, Service, ServiceError, StartupError};

#[derive(Debug, Error)]
pub enum AdminError {
    #[error(transparent)]
    Startup(#[from] StartupError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("unknown request id {0}")]
    UnknownRequestId(RequestId),
    #[error(transparent)]
    Domain(#[from] classifieds_core::Error),
    #[error("network registry: {0}")]
    Network(String),
}

pub fn list_requests(config: ServiceConfig) -> Result<Vec<FieldRequest>, AdminError> {
    Ok(Service::open(config)?.field_requests())
}

/// Files a `requestField` document as a pending request.
pub fn submit_request(config: ServiceConfig, xml: &str) -> Result<FieldRequest, AdminError> {
    let request = classifieds_core::schema::parse_field_request(xml).map_err(classifieds_core::Error::from)?;
    let service = Service::open(config)?;
    Ok(service.write_with(|m| m.submit_field_request(request))?)
}

pub fn decide_request(
    config: ServiceConfig,
    id: RequestId,
    decision: Decision,
) -> Result<(FieldRequest, SchemaEntry), AdminError> {
    let service = Service::open(config)?;
    if !service.field_requests().iter().any(|r| r.id == id) {
        return Err(AdminError::UnknownRequestId(id));
    }
    Ok(service.decide_field_request(id, decision)?)
}

/// Appends a network to the registry file after checking it against the
/// existing ones.
pub fn add_network(config: &ServiceConfig, id: &str, display_name: &str, domains: &[String]) -> Result<Network, AdminError> {
    let path = &config.network_registry_path;
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(AdminError::Network(e.to_string())),
    };
    let mut registry = NetworkRegistry::parse(&text).map_err(|e| AdminError::Network(e.to_string()))?;
    let network = Network {
        id: NetworkId::new(id),
        display_name: display_name.to_string(),
        domain_suffixes: domains.iter().map(|d| d.trim().to_ascii_lowercase()).collect(),
    };
    let line = network.to_line();
    let network = Network::parse_line(&line).map_err(AdminError::Network)?;
    registry.add(network.clone()).map_err(|e| AdminError::Network(e.to_string()))?;
    write_atomically(path, registry.to_text().as_bytes()).map_err(|e| AdminError::Network(e.to_string()))?;
    Ok(network)
}

pub fn export_graph(config: ServiceConfig) -> Result<String, AdminError> {
    Ok(Service::open(config)?.export_graph())
}

/// Seeded users all share this password so demos can sign in.
pub const SEED_PASSWORD: &str = "seed-password";

/// Start of the seeded timeline.
pub fn seed_epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedReport {
    pub users: Vec<String>,
    pub listings: usize,
    pub password: &'static str,
}

/// Generates `count` listings from a fixed seed. The same seed on the same
/// schemas and networks always produces the same store contents.
pub fn seed(config: ServiceConfig, count: usize, seed: u64) -> Result<SeedReport, AdminError> {
    if count == 0 {
        return Ok(SeedReport {
            users: Vec::new(),
            listings: 0,
            password: SEED_PASSWORD,
        });
    }
    let clock = Arc::new(ManualClock::new(seed_epoch()));
    let service = Service::open_with(
        config,
        OpenOptions {
            clock: Some(clock.clone()),
            rng_seed: Some(seed),
        },
    )?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let users = service.write_with(seed_users)?;
    let usernames = service.inspect(|m| users.iter().filter_map(|u| m.user(*u)).map(|u| u.username.clone()).collect());
    let schemas: Vec<CategorySchema> = service.inspect(|m| m.schemas().approved_schemas().cloned().collect());
    let mut made = 0;
    if !users.is_empty() && !schemas.is_empty() {
        for i in 0..count {
            clock.advance(Duration::minutes(rng.random_range(1..=240)));
            let owner = *users.choose(&mut rng).expect("users exist");
            let schema = schemas.choose(&mut rng).expect("schemas exist");
            let draft = seed_draft(&mut rng, schema, i);
            service.write_with(|m| m.create_listing(owner, draft))?;
            made += 1;
        }
    }
    Ok(SeedReport {
        users: usernames,
        listings: made,
        password: SEED_PASSWORD,
    })
}

/// Three verified accounts per network, reused when they already exist.
fn seed_users(m: &mut Marketplace) -> classifieds_core::engine::Result<Vec<UserId>> {
    let networks: Vec<(String, String)> = m
        .networks()
        .iter()
        .filter_map(|n| n.domain_suffixes.iter().next().map(|d| (n.id.as_str().to_string(), d.clone())))
        .collect();
    let mut ids = Vec::new();
    for (net, domain) in networks {
        let slug: String = net
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
            .take(24)
            .collect();
        for i in 1..=3 {
            let username = format!("{slug}_seed{i}");
            if let Some(u) = m.user_by_username(&username) {
                ids.push(u.id);
                continue;
            }
            let pending = m.register(Registration {
                email: format!("seed{i}@{domain}"),
                username,
                password: SEED_PASSWORD.into(),
                full_name: Some(format!("Seed User {i}")),
                home_location: Some(BASE),
            })?;
            m.verify(&pending.token)?;
            ids.push(pending.user_id);
        }
    }
    Ok(ids)
}

const BASE: GeoPoint = GeoPoint {
    lat: 39.2904,
    lon: -76.6122,
};

const NOUNS: &[&str] = &[
    "bike", "bicycle", "sofa", "couch", "laptop", "notebook", "desk", "lamp", "chair", "guitar", "textbook",
    "calculator", "monitor", "kettle", "microwave", "ticket", "concert", "party", "lecture", "sublet", "apartment",
    "tutoring", "camera", "headphones", "jacket", "skateboard", "printer", "bookshelf", "mattress", "rug",
];
const ADJECTIVES: &[&str] = &[
    "used", "new", "vintage", "compact", "large", "cheap", "sturdy", "electric", "wooden", "portable", "quiet",
    "spare", "classic", "modern", "blue", "red",
];
const FILLER: &[&str] = &[
    "great", "condition", "pickup", "campus", "weekend", "available", "barely", "works", "perfectly", "moving",
    "sale", "friendly", "offer", "graduating", "must", "go", "clean", "smoke", "free", "home", "semester", "near",
    "library", "station",
];

fn words(rng: &mut ChaCha20Rng, pool: &[&str], n: usize) -> String {
    (0..n).map(|_| *pool.choose(rng).expect("pool")).collect::<Vec<_>>().join(" ")
}

fn seed_point(rng: &mut ChaCha20Rng) -> GeoPoint {
    let lat = BASE.lat + rng.random_range(-0.8..0.8);
    let lon = BASE.lon + rng.random_range(-0.8..0.8);
    GeoPoint::new((lat * 1e4).round() / 1e4, (lon * 1e4).round() / 1e4).expect("near the base point")
}

fn seed_draft(rng: &mut ChaCha20Rng, schema: &CategorySchema, i: usize) -> ListingDraft {
    let title = format!(
        "{} {}",
        ADJECTIVES.choose(rng).expect("adjectives"),
        NOUNS.choose(rng).expect("nouns")
    );
    let mut values = BTreeMap::new();
    for field in &schema.fields {
        let value = if field.label == classifieds_core::schema::TITLE_LABEL {
            title.clone()
        } else {
            match field.data_type {
                DataType::Text if field.input_type == InputType::Textarea => {
                    let n = rng.random_range(4..12);
                    words(rng, FILLER, n)
                }
                DataType::Text => {
                    let n = rng.random_range(1..3);
                    words(rng, NOUNS, n)
                }
                DataType::Number => rng.random_range(1..=12).to_string(),
                DataType::Currency => format!("USD {}.{:02}", rng.random_range(1..500), rng.random_range(0..100)),
                DataType::DateTime => {
                    let t = seed_epoch() + Duration::hours(rng.random_range(0..24 * 365));
                    t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
                }
                DataType::Location => {
                    let p = seed_point(rng);
                    format!("{},{}", p.lat, p.lon)
                }
                DataType::Url => format!("https://example.com/items/{i}"),
            }
        };
        values.insert(field.label.clone(), value);
    }
    let tag_count = rng.random_range(0..3);
    let description_len = rng.random_range(5..16);
    ListingDraft {
        category: schema.category.clone(),
        subcategory: None,
        tags: (0..tag_count).map(|_| NOUNS.choose(rng).expect("nouns").to_string()).collect(),
        description: words(rng, FILLER, description_len),
        values,
        visibility: if rng.random_bool(0.3) {
            Visibility::Public
        } else {
            Visibility::Network
        },
        location: rng.random_bool(0.8).then(|| seed_point(rng)),
    }
}
