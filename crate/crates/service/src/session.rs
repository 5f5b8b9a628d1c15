//! Bearer-token sessions.

use std::collections::HashMap;

use chrono::{DateTime, Duration, Utc};
use classifieds_core::UserId;
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::store::SessionRecord;

pub fn token_digest(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

#[derive(Debug, Default)]
pub struct SessionTable {
    by_digest: HashMap<String, SessionRecord>,
}

impl SessionTable {
    pub fn new() -> Self {
        SessionTable::default()
    }

    /// Issues a fresh 128-bit token. Returns the token and the record to store.
    pub fn issue(&mut self, user_id: UserId, now: DateTime<Utc>, ttl: Duration) -> (String, SessionRecord) {
        let bytes: [u8; 16] = rand::rng().random();
        let token = hex::encode(bytes);
        let record = SessionRecord {
            digest: token_digest(&token),
            user_id,
            expires_at: now + ttl,
        };
        self.insert(record.clone());
        (token, record)
    }

    pub fn insert(&mut self, record: SessionRecord) {
        self.by_digest.insert(record.digest.clone(), record);
    }

    /// The signed-in user, if the token names a live session.
    pub fn resolve(&self, token: &str, now: DateTime<Utc>) -> Option<UserId> {
        self.by_digest
            .get(&token_digest(token))
            .filter(|s| now < s.expires_at)
            .map(|s| s.user_id)
    }

    /// Forgets the session. Returns its digest when it existed.
    pub fn revoke(&mut self, token: &str) -> Option<String> {
        let digest = token_digest(token);
        self.by_digest.remove(&digest).map(|s| s.digest)
    }

    pub fn remove_digest(&mut self, digest: &str) {
        self.by_digest.remove(digest);
    }

    /// Live sessions in digest order.
    pub fn live(&self, now: DateTime<Utc>) -> Vec<SessionRecord> {
        let mut out: Vec<_> = self.by_digest.values().filter(|s| now < s.expires_at).cloned().collect();
        out.sort_by(|a, b| a.digest.cmp(&b.digest));
        out
    }
}
