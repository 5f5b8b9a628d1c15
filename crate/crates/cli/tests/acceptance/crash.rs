use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use classifieds_core::marketplace::{EdgeKind, ListingStatus};
use classifieds_core::ListingId;
use classifieds_service::Service;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::support::{Client, Site, SEED_PASSWORD};

const USERS: [&str; 6] = ["jhu_seed1", "jhu_seed2", "jhu_seed3", "umd_seed1", "umd_seed2", "umd_seed3"];

/// What the workload has been told was committed.
#[derive(Default)]
struct Acks {
    listings: BTreeMap<ListingId, (usize, ListingStatus)>,
    engaged: BTreeMap<ListingId, BTreeSet<usize>>,
    /// Listings whose state is unknown since a request about them went
    /// unanswered. A later 200 carries the full state again.
    uncertain: BTreeSet<ListingId>,
    requests: usize,
    errors: Vec<String>,
}

fn status_of(body: &serde_json::Value) -> ListingStatus {
    serde_json::from_value(body["status"].clone()).expect("status in listing body")
}

/// Runs requests until the server stops answering.
fn workload(clients: Vec<Client>, acks: Arc<Mutex<Acks>>, seed: u64, stop: Arc<AtomicBool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while !stop.load(Ordering::Relaxed) {
        let roll = rng.random_range(0..100);
        let user = rng.random_range(0..clients.len());
        let c = &clients[user];
        let known: Vec<(ListingId, usize)> = {
            let a = acks.lock().unwrap();
            a.listings.iter().map(|(id, (owner, _))| (*id, *owner)).collect()
        };
        let reply = if roll < 30 || known.is_empty() {
            let body = json!({
                "category": "forsale",
                "values": {"Title": format!("Crash test item {}", rng.random_range(0..1_000_000)), "Price": "12.00"},
                "visibility": if rng.random_bool(0.5) { "public" } else { "network" },
            });
            c.try_send("POST", "/listings", body).map(|(status, body)| {
                if status == 201 {
                    let id = ListingId(body["listing_id"].as_u64().unwrap());
                    acks.lock().unwrap().listings.insert(id, (user, status_of(&body)));
                }
                status
            })
        } else {
            let (id, owner) = known[rng.random_range(0..known.len())];
            let path = format!("/listings/{id}");
            if roll < 55 {
                let body = json!({"listing_id": id, "body": "is this still available?"});
                clients[user].try_send("POST", "/messages", body).map(|(status, _)| {
                    if status == 201 {
                        acks.lock().unwrap().engaged.entry(id).or_default().insert(user);
                    }
                    status
                })
            } else {
                let request = if roll < 65 {
                    let engaged: Vec<usize> =
                        acks.lock().unwrap().engaged.get(&id).into_iter().flatten().copied().collect();
                    if engaged.is_empty() {
                        continue;
                    }
                    let buyer = USERS[engaged[rng.random_range(0..engaged.len())]];
                    ("POST", format!("{path}/sold"), json!({"buyer": buyer}))
                } else if roll < 90 {
                    let action = ["hide", "undo", "delete", "edit"][rng.random_range(0..4)];
                    ("PATCH", path.clone(), json!({"action": action, "description": "updated"}))
                } else {
                    ("POST", format!("{path}/view"), json!({}))
                };
                acks.lock().unwrap().uncertain.insert(id);
                clients[owner].try_send(request.0, &request.1, request.2).map(|(status, body)| {
                    let mut a = acks.lock().unwrap();
                    if status == 200 {
                        a.listings.insert(id, (owner, status_of(&body)));
                        a.uncertain.remove(&id);
                    }
                    status
                })
            }
        };
        match reply {
            Ok(status) => {
                let mut a = acks.lock().unwrap();
                a.requests += 1;
                if status >= 500 {
                    a.errors.push(format!("server error {status}"));
                }
            }
            Err(_) => return,
        }
    }
}

/// Everything a restart must find: acknowledged listings in their
/// acknowledged state, and no thread or edge pointing at nothing.
fn verify(service: &Service, acks: &Acks) -> usize {
    let problems = service.check_invariants();
    assert!(problems.is_empty(), "invariants after restart: {problems:?}");
    service.inspect(|m| {
        for (id, (_, status)) in &acks.listings {
            let l = m.listing(*id).unwrap_or_else(|| panic!("acknowledged listing {id} lost"));
            if !acks.uncertain.contains(id) {
                assert_eq!(l.status, *status, "listing {id} state differs from the acknowledged one");
            }
        }
        for t in m.threads() {
            assert!(m.listing(t.listing_id).is_some(), "thread {} without listing", t.id);
            assert!(m.user(t.inquirer_id).is_some() && m.user(t.owner_id).is_some(), "thread {} without users", t.id);
            assert!(!t.messages.is_empty(), "empty thread {}", t.id);
            let edge = [t.inquirer_id, t.owner_id]
                .iter()
                .filter_map(|u| m.graph().edge(*u, t.listing_id))
                .any(|e| e.kind == EdgeKind::Dashed);
            assert!(edge, "thread {} has no dashed edge", t.id);
        }
        for e in m.graph().iter() {
            assert!(m.listing(e.listing_id).is_some(), "edge to missing listing {}", e.listing_id);
            assert!(m.user(e.user_id).is_some(), "edge from missing user {}", e.user_id);
        }
        for l in m.listings().filter(|l| l.status != ListingStatus::Deleted) {
            let solid = m.graph().edges_of(l.id).filter(|e| e.kind == EdgeKind::Solid).count();
            assert_eq!(solid, 1, "listing {} has {solid} solid edges", l.id);
        }
        m.listings().count()
    })
}

pub fn run() -> String {
    let mut site = Site::new();
    site.config.fsync = true;
    site.write_config();
    site.admin(&["seed", "--count", "10", "--seed", "7"]);

    let acks = Arc::new(Mutex::new(Acks::default()));
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut listings = 0;
    for round in 0..20 {
        let server = site.serve();
        let anonymous = server.client();
        let clients: Vec<Client> = USERS.iter().map(|u| anonymous.login(u, SEED_PASSWORD)).collect();
        let stop = Arc::new(AtomicBool::new(false));
        let worker = {
            let (acks, stop) = (acks.clone(), stop.clone());
            std::thread::spawn(move || workload(clients, acks, round, stop))
        };
        std::thread::sleep(Duration::from_millis(rng.random_range(20..400)));
        server.kill();
        stop.store(true, Ordering::Relaxed);
        worker.join().expect("workload thread");

        let a = acks.lock().unwrap();
        assert!(a.errors.is_empty(), "round {round}: {:?}", a.errors);
        let service = Service::open(site.config.clone()).expect("store reopens after kill");
        listings = verify(&service, &a);
    }
    let a = acks.lock().unwrap();
    format!(
        "20 kills; {} requests answered, {} acknowledged listings all present; {listings} listings and no orphans",
        a.requests,
        a.listings.len()
    )
}
