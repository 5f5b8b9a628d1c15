//! Deterministic corpora for the benchmarks.

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{Duration, TimeZone, Utc};
use classifieds_core::identity::NetworkRegistry;
use classifieds_core::marketplace::{ListingDraft, Visibility};
use classifieds_core::schema::{parse_schema, SchemaRegistry};
use classifieds_core::search::{Ranker, RankingConfig, SynonymTable, Tokenizer};
use classifieds_core::{GeoPoint, ManualClock, Marketplace, MarketplaceConfig, Registration};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WORDS: &[&str] = &[
    "bike", "bicycle", "sofa", "couch", "laptop", "notebook", "desk", "lamp", "chair", "guitar", "textbook",
    "calculus", "physics", "concert", "ticket", "party", "sublet", "apartment", "tutoring", "camera", "vintage",
    "cheap", "sturdy", "electric", "wooden", "portable", "campus", "pickup", "weekend", "condition", "semester",
    "library", "kettle", "monitor", "printer", "bookshelf", "mattress", "jacket", "skateboard", "headphones",
];

const FORSALE: &str = r#"<schema id="S100" category="forsale" creator="admin">
  <field visibility-in-search-filter="true">Title</field>
  <field data-type="currency" visibility-in-search-filter="true">Price</field>
  <field input-type="textarea">Condition</field>
</schema>"#;

pub fn sentence(rng: &mut impl Rng, n: usize) -> String {
    (0..n).map(|_| *WORDS.choose(rng).expect("words")).collect::<Vec<_>>().join(" ")
}

/// A marketplace holding `listings` active listings from one owner.
pub fn marketplace(listings: usize, seed: u64) -> Marketplace {
    let mut schemas = SchemaRegistry::new();
    schemas.insert(parse_schema(FORSALE).expect("schema")).expect("insert");
    let networks = NetworkRegistry::parse("jhu\tJohns Hopkins\tjhu.edu\n").expect("networks");
    let clock = Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()));
    let synonyms = SynonymTable::parse("bike: bicycle, cycle\nsofa: couch\nlaptop: notebook\n").expect("synonyms");
    let config = MarketplaceConfig {
        password_iterations: 1,
        ..Default::default()
    };
    let mut m = Marketplace::new(config, schemas, networks)
        .with_ranker(Ranker::new(RankingConfig::default(), Tokenizer::default(), synonyms))
        .with_clock(clock.clone())
        .with_seed(seed);
    let pending = m
        .register(Registration {
            email: "bench@jhu.edu".into(),
            username: "bench".into(),
            password: "password123".into(),
            full_name: None,
            home_location: None,
        })
        .expect("register");
    m.verify(&pending.token).expect("verify");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..listings {
        clock.advance(Duration::minutes(rng.random_range(1..120)));
        let title_len = rng.random_range(2..5);
        let condition_len = rng.random_range(3..10);
        let description_len = rng.random_range(5..30);
        let draft = ListingDraft {
            category: "forsale".into(),
            subcategory: None,
            tags: vec![WORDS.choose(&mut rng).expect("words").to_string()],
            description: sentence(&mut rng, description_len),
            values: BTreeMap::from([
                ("Title".to_string(), sentence(&mut rng, title_len)),
                ("Price".to_string(), format!("{}.50", rng.random_range(1..400))),
                ("Condition".to_string(), sentence(&mut rng, condition_len)),
            ]),
            visibility: Visibility::Public,
            location: GeoPoint::new(39.0 + rng.random_range(0.0..1.0), -77.0 + rng.random_range(0.0..1.0)),
        };
        m.create_listing(pending.user_id, draft).expect("listing");
    }
    m.take_changes();
    m
}
