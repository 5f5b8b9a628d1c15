use std::collections::{BTreeMap, HashMap};

use super::{Change, Marketplace};
use crate::marketplace::{EdgeKind, ListingStatus};

impl Marketplace {
    /// Replays one stored change. Call [`Marketplace::rebuild_index`] once
    /// after replaying a batch.
    pub fn apply_change(&mut self, change: Change) {
        match change {
            Change::Schema(entry) => self.schemas.restore_entry(entry),
            Change::FieldRequest(request) => self.schemas.restore_request(request),
            Change::User(user) => {
                self.ids.users.observe(user.id.0);
                self.by_username.insert(user.username.clone(), user.id);
                self.by_email.insert(user.email.clone(), user.id);
                self.users.insert(user.id, user);
            }
            Change::Token(token) => {
                self.tokens.insert(token.digest.clone(), token);
            }
            Change::Listing(listing) => {
                self.ids.listings.observe(listing.id.0);
                self.listings.insert(listing.id, listing);
            }
            Change::Edge(edge) => self.graph.upsert(edge),
            Change::Thread(thread) => {
                self.ids.threads.observe(thread.id.0);
                for m in &thread.messages {
                    self.ids.messages.observe(m.id.0);
                    self.message_thread.insert(m.id, thread.id);
                }
                self.thread_by_key.insert((thread.listing_id, thread.inquirer_id), thread.id);
                self.threads.insert(thread.id, thread);
            }
            Change::NotificationQueued { slot, notification } => {
                self.notifications.enqueue(slot, notification);
            }
            Change::NotificationDelivered { slot, key } => self.notifications.settle(&slot, &key),
        }
    }

    /// The full state as a change list that rebuilds it when replayed into a
    /// marketplace loaded with the same schema directory. Order is
    /// deterministic.
    pub fn snapshot(&self) -> Vec<Change> {
        let mut out = Vec::new();
        for entry in self.schemas.entries() {
            if !entry.approved || !entry.history.is_empty() {
                out.push(Change::Schema(entry.clone()));
            }
        }
        out.extend(self.schemas.requests().cloned().map(Change::FieldRequest));
        out.extend(self.users.values().cloned().map(Change::User));
        let mut tokens: Vec<_> = self.tokens.values().collect();
        tokens.sort_by(|a, b| a.digest.cmp(&b.digest));
        out.extend(tokens.into_iter().cloned().map(Change::Token));
        out.extend(self.listings.values().cloned().map(Change::Listing));
        out.extend(self.graph.iter().cloned().map(Change::Edge));
        out.extend(self.threads.values().cloned().map(Change::Thread));
        for (slot, notification) in self.notifications.pending() {
            out.push(Change::NotificationQueued {
                slot: slot.to_string(),
                notification: notification.clone(),
            });
        }
        out
    }

    /// Every violated consistency rule, described. Empty when the state is
    /// coherent.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut problems = Vec::new();

        for user in self.users.values() {
            match self.networks.network_of(&user.email) {
                Ok(n) if n == user.network_id => {}
                _ => problems.push(format!("user {} network does not match email", user.id)),
            }
        }

        let mut solid: HashMap<_, usize> = HashMap::new();
        for edge in self.graph.iter() {
            if !self.users.contains_key(&edge.user_id) {
                problems.push(format!("edge to unknown user {}", edge.user_id));
            }
            if !self.listings.contains_key(&edge.listing_id) {
                problems.push(format!("edge to unknown listing {}", edge.listing_id));
            }
            if edge.kind == EdgeKind::Solid {
                *solid.entry(edge.listing_id).or_insert(0) += 1;
                if edge.message_count != 0 {
                    problems.push(format!("solid edge ({}, {}) has messages", edge.user_id, edge.listing_id));
                }
            }
        }
        for listing in self.listings.values() {
            let n = solid.get(&listing.id).copied().unwrap_or(0);
            if n != 1 {
                problems.push(format!("listing {} has {n} solid edges", listing.id));
            }
            let indexed = self.index.contains(listing.id);
            if indexed != (listing.status == ListingStatus::Active) {
                problems.push(format!("listing {} index membership disagrees with status", listing.id));
            }
        }
        for id in self.index.doc_ids() {
            if !self.listings.contains_key(&id) {
                problems.push(format!("index holds unknown listing {id}"));
            }
        }

        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for listing in self.listings.values().filter(|l| l.status == ListingStatus::Active) {
            for term in self.index.weighted_terms(listing, self.ranker.tokenizer()).into_keys() {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        if self.index.terms().count() != df.len() || df.iter().any(|(t, n)| self.index.df(t) != *n) {
            problems.push("document frequencies disagree with a recount".into());
        }

        for thread in self.threads.values() {
            let Some(listing) = self.listings.get(&thread.listing_id) else {
                problems.push(format!("thread {} refers to unknown listing", thread.id));
                continue;
            };
            if thread.inquirer_id == thread.owner_id || thread.owner_id != listing.owner_id {
                problems.push(format!("thread {} has inconsistent participants", thread.id));
            }
            if self.thread_by_key.get(&(thread.listing_id, thread.inquirer_id)) != Some(&thread.id) {
                problems.push(format!("thread {} is not the unique thread for its pair", thread.id));
            }
            match self.counting_edge(thread).and_then(|(u, l)| self.graph.edge(u, l)) {
                Some(edge) if edge.message_count == thread.messages.len() as u64 => {}
                Some(edge) => problems.push(format!(
                    "edge ({}, {}) counts {} messages, thread {} has {}",
                    edge.user_id,
                    edge.listing_id,
                    edge.message_count,
                    thread.id,
                    thread.messages.len()
                )),
                None => problems.push(format!("thread {} has no dashed edge", thread.id)),
            }
        }
        for edge in self.graph.iter().filter(|e| e.kind == EdgeKind::Dashed) {
            let own = self.thread_by_key.contains_key(&(edge.listing_id, edge.user_id));
            let sold = self
                .listings
                .get(&edge.listing_id)
                .is_some_and(|l| l.owner_id == edge.user_id && l.status == ListingStatus::Sold);
            if !own && !sold {
                problems.push(format!("dashed edge ({}, {}) has no thread", edge.user_id, edge.listing_id));
            }
        }
        problems
    }
}
