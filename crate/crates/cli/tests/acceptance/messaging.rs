use std::collections::BTreeMap;

use chrono::{TimeZone, Utc};
use classifieds_core::marketplace::{Action, EdgeKind, Visibility};
use classifieds_core::messaging::Folder;
use classifieds_core::{ListingId, MessageId, UserId};
use classifieds_service::Service;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::support::{forsale, member, Site};

fn folder_ids(service: &Service, user: UserId, folder: Folder) -> Vec<MessageId> {
    service
        .folder(user, folder, None)
        .unwrap()
        .iter()
        .flat_map(|t| t.messages.iter().map(|m| m.message_id))
        .collect()
}

fn scripted(service: &Service) {
    let owner = member(service, "lifecycle_owner", "jhu.edu");
    let asker = member(service, "lifecycle_asker", "jhu.edu");
    let listing = service.create_listing(owner, forsale("Road bike", Visibility::Network)).unwrap().listing_id;
    let m1 = service.send_message(asker, listing, "Is it available?").unwrap();
    let thread = m1.thread_id;
    let m2 = service.reply(owner, thread, "Yes, still here.").unwrap();
    let m3 = service.send_message(asker, listing, "Can I see it Friday?").unwrap();
    assert_eq!(m3.thread_id, thread, "second message opened a new thread");
    let count = service.inspect(|m| m.graph().edge(asker, listing).map(|e| (e.kind, e.message_count)));
    assert_eq!(count, Some((EdgeKind::Dashed, 3)), "dashed edge after three messages");

    service.delete_message(asker, m1.message_id).unwrap();
    assert_eq!(folder_ids(service, asker, Folder::Deleted), [m1.message_id]);
    assert_eq!(folder_ids(service, asker, Folder::Sent), [m3.message_id]);
    let mut owner_inbox = folder_ids(service, owner, Folder::Inbox);
    owner_inbox.sort();
    assert_eq!(owner_inbox, [m1.message_id, m3.message_id], "asker's delete reached the owner");
    assert!(folder_ids(service, owner, Folder::Deleted).is_empty());

    service.mutate_listing(owner, listing, Action::Delete).unwrap();
    for result in [
        service.send_message(asker, listing, "Still there?"),
        service.reply(asker, thread, "Hello?"),
        service.reply(owner, thread, "Gone, sorry."),
    ] {
        assert_eq!(result.unwrap_err().code(), "ListingDeleted");
    }
    assert_eq!(folder_ids(service, asker, Folder::Inbox), [m2.message_id], "folders unreadable after delete");
    assert_eq!(folder_ids(service, owner, Folder::Sent), [m2.message_id]);
}

struct Model {
    /// Acknowledged messages per (listing, inquirer).
    sent: BTreeMap<(ListingId, UserId), u64>,
    owners: BTreeMap<ListingId, UserId>,
    buyers: BTreeMap<ListingId, UserId>,
    messages: Vec<(MessageId, UserId, UserId)>,
}

pub fn run() -> String {
    let site = Site::new();
    let service = site.open_at(Utc.with_ymd_and_hms(2024, 6, 1, 8, 0, 0).unwrap());
    scripted(&service);

    let users: Vec<UserId> = (0..6)
        .map(|i| member(&service, &format!("chat{i}"), if i < 4 { "jhu.edu" } else { "umd.edu" }))
        .collect();
    let mut model = Model {
        sent: BTreeMap::new(),
        owners: BTreeMap::new(),
        buyers: BTreeMap::new(),
        messages: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for i in 0..10 {
        let owner = users[rng.random_range(0..users.len())];
        let visibility = if i % 3 == 0 { Visibility::Network } else { Visibility::Public };
        let id = service.create_listing(owner, forsale(&format!("Item {i}"), visibility)).unwrap().listing_id;
        model.owners.insert(id, owner);
    }
    let listings: Vec<ListingId> = model.owners.keys().copied().collect();
    let mut acknowledged = 0;
    for event in 0..1000 {
        let roll = rng.random_range(0..100);
        if roll < 45 {
            let sender = users[rng.random_range(0..users.len())];
            let listing = listings[rng.random_range(0..listings.len())];
            if let Ok(m) = service.send_message(sender, listing, &format!("question {event}")) {
                *model.sent.entry((listing, sender)).or_default() += 1;
                model.messages.push((m.message_id, sender, model.owners[&listing]));
                acknowledged += 1;
            }
        } else if roll < 80 {
            let threads: Vec<_> = model.sent.keys().copied().collect();
            if threads.is_empty() {
                continue;
            }
            let (listing, inquirer) = threads[rng.random_range(0..threads.len())];
            let owner = model.owners[&listing];
            let sender = if rng.random_bool(0.5) { owner } else { inquirer };
            let thread = service.inspect(|m| m.thread_for(listing, inquirer).map(|t| t.id)).expect("thread exists");
            if let Ok(m) = service.reply(sender, thread, &format!("reply {event}")) {
                *model.sent.get_mut(&(listing, inquirer)).unwrap() += 1;
                model.messages.push((m.message_id, inquirer, owner));
                acknowledged += 1;
            }
        } else if roll < 94 {
            if model.messages.is_empty() {
                continue;
            }
            let (id, a, b) = model.messages[rng.random_range(0..model.messages.len())];
            let _ = service.delete_message(if rng.random_bool(0.5) { a } else { b }, id);
        } else if roll < 97 {
            let listing = listings[rng.random_range(0..listings.len())];
            let action = if rng.random_bool(0.5) { Action::Hide } else { Action::Undo };
            let _ = service.mutate_listing(model.owners[&listing], listing, action);
        } else {
            let engaged: Vec<_> = model.sent.keys().filter(|(l, _)| !model.buyers.contains_key(l)).copied().collect();
            if engaged.is_empty() {
                continue;
            }
            let (listing, buyer) = engaged[rng.random_range(0..engaged.len())];
            let username = service.inspect(|m| m.user(buyer).unwrap().username.clone());
            if service.mark_sold(model.owners[&listing], listing, &username).is_ok() {
                model.buyers.insert(listing, buyer);
            }
        }
    }

    service.inspect(|m| {
        let threads: BTreeMap<(ListingId, UserId), usize> =
            m.threads().map(|t| ((t.listing_id, t.inquirer_id), t.messages.len())).collect();
        assert_eq!(
            threads.keys().filter(|(l, _)| model.owners.contains_key(l)).count(),
            model.sent.len(),
            "thread count"
        );
        for (&(listing, inquirer), &count) in &model.sent {
            assert_eq!(threads[&(listing, inquirer)] as u64, count, "thread recount for {listing}/{inquirer}");
            let owner = model.owners[&listing];
            let counter = if model.buyers.get(&listing) == Some(&inquirer) { owner } else { inquirer };
            let edge = m.graph().edge(counter, listing).expect("counting edge exists");
            assert_eq!(edge.kind, EdgeKind::Dashed, "counting edge for {listing}/{inquirer}");
            assert_eq!(edge.message_count, count, "dashed edge count for {listing}/{inquirer}");
        }
    });
    let problems = service.check_invariants();
    assert!(problems.is_empty(), "{problems:?}");
    format!(
        "scripted lifecycle holds; 1000 random events ({acknowledged} messages, {} threads, {} sales) keep dashed-edge counts equal to recounts",
        model.sent.len(),
        model.buyers.len()
    )
}
