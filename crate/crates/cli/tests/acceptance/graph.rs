use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use classifieds_core::marketplace::{Action, EdgeKind, ListingEdit, ListingStatus, Visibility};
use classifieds_core::{ListingId, Marketplace, UserId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::support::{forsale, member, Site};

#[derive(Default)]
struct Tracked {
    owner: Option<UserId>,
    buyer: Option<UserId>,
    engaged: BTreeSet<UserId>,
}

/// Exactly one solid edge per non-deleted listing, held by the owner or,
/// after a sale, the buyer.
fn check_solid_edges(m: &Marketplace, model: &BTreeMap<ListingId, Tracked>) {
    for l in m.listings().filter(|l| l.status != ListingStatus::Deleted) {
        let solid: Vec<UserId> = m
            .graph()
            .edges_of(l.id)
            .filter(|e| e.kind == EdgeKind::Solid)
            .map(|e| e.user_id)
            .collect();
        let t = &model[&l.id];
        let holder = t.buyer.or(t.owner).unwrap();
        assert_eq!(solid, [holder], "solid edges of listing {}", l.id);
    }
}

pub fn run() -> String {
    let site = Site::new();
    let service = site.open_at(Utc.with_ymd_and_hms(2024, 7, 1, 8, 0, 0).unwrap());
    let users: Vec<UserId> = (0..12)
        .map(|i| member(&service, &format!("graph{i}"), if i % 3 == 0 { "umd.edu" } else { "jhu.edu" }))
        .collect();
    let mut model: BTreeMap<ListingId, Tracked> = BTreeMap::new();
    let mut ids: Vec<ListingId> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let (mut sales, mut ok_ops) = (0, 0);
    let start = Instant::now();
    for op in 0..10_000 {
        let roll = rng.random_range(0..100);
        if roll < 20 || ids.is_empty() {
            let owner = users[rng.random_range(0..users.len())];
            let visibility = if rng.random_bool(0.5) { Visibility::Public } else { Visibility::Network };
            if let Ok(l) = service.create_listing(owner, forsale(&format!("Thing {op}"), visibility)) {
                model.insert(l.listing_id, Tracked { owner: Some(owner), ..Default::default() });
                ids.push(l.listing_id);
                ok_ops += 1;
            }
        } else if roll < 50 {
            let id = ids[rng.random_range(0..ids.len())];
            let sender = users[rng.random_range(0..users.len())];
            if service.send_message(sender, id, "interested").is_ok() {
                model.get_mut(&id).unwrap().engaged.insert(sender);
                ok_ops += 1;
            }
        } else if roll < 70 {
            let id = ids[rng.random_range(0..ids.len())];
            let t = &model[&id];
            let candidates: Vec<UserId> = t.engaged.iter().copied().collect();
            let owner = t.owner.unwrap();
            let buyer = if candidates.is_empty() || rng.random_bool(0.1) {
                users[rng.random_range(0..users.len())]
            } else {
                candidates[rng.random_range(0..candidates.len())]
            };
            let actor = if rng.random_bool(0.95) { owner } else { buyer };
            let before: BTreeMap<UserId, (EdgeKind, u64)> = service.inspect(|m| {
                m.graph().edges_of(id).map(|e| (e.user_id, (e.kind, e.message_count))).collect()
            });
            let username = service.inspect(|m| m.user(buyer).unwrap().username.clone());
            if service.mark_sold(actor, id, &username).is_ok() {
                assert_eq!(actor, owner, "non-owner sold listing {id}");
                model.get_mut(&id).unwrap().buyer = Some(buyer);
                let after: BTreeMap<UserId, (EdgeKind, u64)> = service.inspect(|m| {
                    m.graph().edges_of(id).map(|e| (e.user_id, (e.kind, e.message_count))).collect()
                });
                assert_eq!(after.len(), before.len(), "edge count of listing {id} changed by the sale");
                assert_eq!(after[&buyer], (EdgeKind::Solid, 0));
                assert_eq!(after[&owner], (EdgeKind::Dashed, before[&buyer].1), "message count not carried over");
                for (u, e) in &before {
                    if *u != buyer && *u != owner {
                        assert_eq!(after[u], *e, "bystander edge changed");
                    }
                }
                sales += 1;
                ok_ops += 1;
            }
        } else {
            let id = ids[rng.random_range(0..ids.len())];
            let owner = model[&id].owner.unwrap();
            let actor = if rng.random_bool(0.9) { owner } else { users[rng.random_range(0..users.len())] };
            let action = match rng.random_range(0..10) {
                0..=2 => Action::Hide,
                3..=5 => Action::Undo,
                6 => Action::Delete,
                _ => Action::Edit(ListingEdit {
                    description: Some(format!("edited at {op}")),
                    ..Default::default()
                }),
            };
            if service.mutate_listing(actor, id, action).is_ok() {
                assert_eq!(actor, owner, "non-owner mutated listing {id}");
                ok_ops += 1;
            }
        }
        if op % 1000 == 999 {
            service.inspect(|m| check_solid_edges(m, &model));
        }
    }
    let elapsed = start.elapsed();
    service.inspect(|m| check_solid_edges(m, &model));
    let problems = service.check_invariants();
    assert!(problems.is_empty(), "{problems:?}");
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:.2?}");

    let exported = service.export_graph();
    drop(service);
    let reopened = site.open_at(Utc.with_ymd_and_hms(2024, 7, 1, 8, 0, 0).unwrap());
    assert_eq!(reopened.export_graph(), exported, "graph differs after reopening the store");
    format!("10000 operations ({ok_ops} accepted, {sales} sales, {} listings) in {elapsed:.2?}", ids.len())
}
