use std::collections::{BTreeMap, BTreeSet};

use chrono::Utc;
use classifieds_core::marketplace::Listing;
use classifieds_core::{ListingId, NetworkId, UserId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::oracle::Reference;
use crate::ranking::{random_origin, random_terms};
use crate::support::{Site, SEED_PASSWORD, STOPWORDS, SYNONYMS};

const CATEGORIES: [&str; 4] = ["event", "forsale", "books", "housing"];

fn ids(page: &Value) -> Vec<ListingId> {
    page["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|h| ListingId(h["listing"]["listing_id"].as_u64().unwrap()))
        .collect()
}

pub fn run(site: &Site) -> String {
    let (corpus, networks, viewer) = site.open_at(Utc::now()).inspect(|m| {
        let corpus: Vec<Listing> = m.listings().cloned().collect();
        let networks: BTreeMap<UserId, NetworkId> = m.users().map(|u| (u.id, u.network_id.clone())).collect();
        (corpus, networks, m.user_by_username("jhu_seed2").unwrap().id)
    });
    let reference = Reference::new(STOPWORDS, SYNONYMS);
    let server = site.serve();
    let client = server.client().login("jhu_seed2", SEED_PASSWORD);
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let (mut pages, mut items) = (0, 0);
    for _ in 0..50 {
        let terms = random_terms(&mut rng);
        let origin = rng.random_bool(0.5).then(|| random_origin(&mut rng));
        let category = rng.random_bool(0.3).then(|| CATEGORIES[rng.random_range(0..CATEGORIES.len())]);
        let page_size = rng.random_range(1..=10);
        let mut base = vec![("q".to_string(), terms.join(" ")), ("page_size".to_string(), page_size.to_string())];
        if let Some(o) = origin {
            base.push(("lat".into(), o.lat.to_string()));
            base.push(("lon".into(), o.lon.to_string()));
        }
        if let Some(c) = category {
            base.push(("category".into(), c.to_string()));
        }

        let expected: BTreeSet<ListingId> = reference
            .rank(&corpus, &networks, viewer, &terms, origin, Utc::now())
            .into_iter()
            .map(|e| e.id)
            .filter(|id| category.is_none_or(|c| corpus.iter().any(|l| l.id == *id && l.category == c)))
            .collect();

        let mut walked = Vec::new();
        let mut page = 0;
        loop {
            let mut query = base.clone();
            query.push(("page".into(), page.to_string()));
            let (status, body) = client.get_query("/search", &query);
            assert_eq!(status, 200, "{body}");
            assert_eq!(body["total"].as_u64().unwrap() as usize, expected.len(), "total for {terms:?}");
            let got = ids(&body);
            assert!(got.len() <= page_size, "page larger than page_size");
            walked.extend(got);
            pages += 1;
            if !body["has_more"].as_bool().unwrap() {
                break;
            }
            page += 1;
            assert!(page <= 100, "pagination does not terminate");
        }
        let mut past = base.clone();
        past.push(("page".into(), (page + 1).to_string()));
        assert!(ids(&client.get_query("/search", &past).1).is_empty(), "page past the end has items");

        let unique: BTreeSet<ListingId> = walked.iter().copied().collect();
        assert_eq!(unique.len(), walked.len(), "a match appeared on two pages for {terms:?}");
        assert_eq!(unique, expected, "walked matches differ from the reference for {terms:?}");

        let mut whole = base.clone();
        whole.retain(|(k, _)| k != "page_size");
        whole.push(("page_size".into(), "100".into()));
        assert_eq!(ids(&client.get_query("/search", &whole).1), walked, "page order differs from one big page");
        items += walked.len();
    }
    server.kill();
    format!("50 queries walked over {pages} pages; {items} matches each seen exactly once")
}
