use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use classifieds_core::marketplace::Listing;
use classifieds_core::{GeoPoint, NetworkId, UserId};
use classifieds_service::SearchRequest;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracle::Reference;
use crate::support::{Site, STOPWORDS, SYNONYMS};

/// Words from the seeded vocabulary plus synonyms, stopwords, punctuation,
/// mixed case and words that never occur.
pub const VOCAB: &[&str] = &[
    "bike", "bicycle", "cycle", "sofa", "couch", "laptop", "notebook", "desk", "lamp", "light", "chair",
    "guitar", "textbook", "monitor", "kettle", "ticket", "concert", "apartment", "sublet", "flat", "camera",
    "jacket", "printer", "rug", "used", "new", "vintage", "cheap", "wooden", "portable", "blue", "red",
    "condition", "pickup", "campus", "available", "moving", "free", "library", "great", "the", "and",
    "of", "a", "Bike!", "LAMP", "Couch,", "zeppelin", "x", "2024",
];

pub fn random_terms(rng: &mut ChaCha8Rng) -> Vec<String> {
    let n = rng.random_range(0..=8);
    (0..n).map(|_| VOCAB[rng.random_range(0..VOCAB.len())].to_string()).collect()
}

pub fn random_origin(rng: &mut ChaCha8Rng) -> GeoPoint {
    GeoPoint::new(38.8 + rng.random_range(0.0..1.0), -77.2 + rng.random_range(0.0..1.2)).unwrap()
}

pub fn run(site: &Site) -> String {
    let now = Utc.with_ymd_and_hms(2024, 1, 25, 9, 30, 0).unwrap();
    let service = site.open_at(now);
    let (corpus, networks, viewers) = service.inspect(|m| {
        let corpus: Vec<Listing> = m.listings().cloned().collect();
        let networks: BTreeMap<UserId, NetworkId> = m.users().map(|u| (u.id, u.network_id.clone())).collect();
        let viewers = ["jhu_seed1", "umd_seed2"].map(|n| m.user_by_username(n).expect("seeded user").id);
        (corpus, networks, viewers)
    });
    assert_eq!(corpus.len(), 100, "seeded corpus size");
    let reference = Reference::new(STOPWORDS, SYNONYMS);
    let mut rng = ChaCha8Rng::seed_from_u64(20240125);
    let mut compared = 0;
    let start = Instant::now();
    for q in 0..200 {
        let viewer = viewers[q % 2];
        let terms = random_terms(&mut rng);
        let origin = ((q / 2) % 2 == 0).then(|| random_origin(&mut rng));
        let page = service
            .search(
                Some(viewer),
                SearchRequest {
                    q: terms.join(" "),
                    origin,
                    page_size: Some(100),
                    ..Default::default()
                },
            )
            .unwrap();
        let want = reference.rank(&corpus, &networks, viewer, &terms, origin, now);
        assert_eq!(page.total, want.len(), "match count for {terms:?}");
        let got: Vec<_> = page.items.iter().map(|h| h.listing.listing_id).collect();
        let expected: Vec<_> = want.iter().map(|e| e.id).collect();
        assert_eq!(got, expected, "order for {terms:?} origin {origin:?}");
        for (hit, exp) in page.items.iter().zip(&want) {
            let s = &hit.score;
            for (name, a, b) in [
                ("total", s.score_total, exp.total),
                ("text", s.score_text, exp.text),
                ("location", s.score_location, exp.location),
                ("freshness", s.score_freshness, exp.freshness),
            ] {
                assert!((a - b).abs() <= 1e-9, "{name} for {terms:?} on {}: {a} vs {b}", exp.id);
            }
            assert_eq!(s.matched_terms.len(), exp.matched, "matched terms for {terms:?}");
            compared += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:.2?}");
    format!("200 queries, {compared} ranked hits equal to the reference within 1e-9 in {elapsed:.2?}")
}
