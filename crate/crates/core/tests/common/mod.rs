#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{DateTime, TimeZone, Utc};
use classifieds_core::identity::NetworkRegistry;
use classifieds_core::marketplace::{ListingDraft, Visibility};
use classifieds_core::schema::{parse_schema, SchemaRegistry};
use classifieds_core::search::{RankingConfig, Ranker, SynonymTable, Tokenizer};
use classifieds_core::{GeoPoint, ListingId, ManualClock, Marketplace, MarketplaceConfig, Registration, UserId};

pub const NETWORKS: &str = "\
jhu\tThe Johns Hopkins University\tjhu.edu
umd\tUniversity of Maryland\tumd.edu
";

pub const EVENT_XML: &str = r#"<schema id="O198" category="event" creator="admin">
	<field input-type="textbox"  data-type="text"
	visibility-in-search-filter="true">Title</field>
	<field data-type="date-time">Date and Time</field>
</schema>"#;

pub const FORSALE_XML: &str = r#"<schema id="S100" category="forsale" creator="admin">
  <field data-type="text" visibility-in-search-filter="true">Title</field>
  <field data-type="currency" visibility-in-search-filter="true">Price</field>
  <field data-type="text" visibility-in-search-filter="true">Brand</field>
  <field input-type="textarea">Condition</field>
  <field data-type="number" visibility-in-search-filter="true">Year</field>
  <field data-type="location">Pickup</field>
  <field data-type="url">Link</field>
</schema>"#;

pub const BOOKS_XML: &str = r#"<schema id="S200" category="books" creator="admin">
  <field visibility-in-search-filter="true">Title</field>
  <field visibility-in-search-filter="true">Author</field>
  <field data-type="currency" visibility-in-search-filter="true">Price</field>
</schema>"#;

pub const SYNONYMS: &str = "\
bike: bicycle, cycle
sofa: couch
laptop: notebook
";

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
}

pub fn baltimore() -> GeoPoint {
    GeoPoint::new(39.2904, -76.6122).unwrap()
}

pub fn washington() -> GeoPoint {
    GeoPoint::new(38.9072, -77.0369).unwrap()
}

pub fn schemas() -> SchemaRegistry {
    let mut reg = SchemaRegistry::new();
    for xml in [EVENT_XML, FORSALE_XML, BOOKS_XML] {
        reg.insert(parse_schema(xml).unwrap()).unwrap();
    }
    reg
}

pub struct Fixture {
    pub market: Marketplace,
    pub clock: Arc<ManualClock>,
}

pub fn fixture() -> Fixture {
    fixture_with(RankingConfig::default())
}

pub fn fixture_with(ranking: RankingConfig) -> Fixture {
    let clock = Arc::new(ManualClock::new(t0()));
    let config = MarketplaceConfig {
        base_url: "http://market.test".into(),
        password_iterations: 1,
        ..Default::default()
    };
    let ranker = Ranker::new(ranking, Tokenizer::default(), SynonymTable::parse(SYNONYMS).unwrap());
    let market = Marketplace::new(config, schemas(), NetworkRegistry::parse(NETWORKS).unwrap())
        .with_ranker(ranker)
        .with_clock(clock.clone())
        .with_seed(7);
    Fixture { market, clock }
}

impl Fixture {
    /// Registers and verifies `username` at `domain`.
    pub fn user(&mut self, username: &str, domain: &str) -> UserId {
        let pending = self
            .market
            .register(Registration {
                email: format!("{username}@{domain}"),
                username: username.into(),
                password: "password123".into(),
                full_name: Some(format!("Full {username}")),
                home_location: Some(baltimore()),
            })
            .unwrap();
        self.market.verify(&pending.token).unwrap();
        pending.user_id
    }

    pub fn listing(&mut self, owner: UserId, title: &str) -> ListingId {
        self.market.create_listing(owner, draft("forsale", title, &[])).unwrap().id
    }

    pub fn public_listing(&mut self, owner: UserId, title: &str) -> ListingId {
        let mut d = draft("forsale", title, &[]);
        d.visibility = Visibility::Public;
        self.market.create_listing(owner, d).unwrap().id
    }
}

pub fn draft(category: &str, title: &str, values: &[(&str, &str)]) -> ListingDraft {
    let mut map = BTreeMap::from([("Title".to_string(), title.to_string())]);
    for (k, v) in values {
        map.insert(k.to_string(), v.to_string());
    }
    ListingDraft {
        category: category.into(),
        values: map,
        ..Default::default()
    }
}
