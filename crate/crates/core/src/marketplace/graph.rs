//! Ownership (solid) and interest (dashed) edges between users and listings.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::ids::{ListingId, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Solid,
    Dashed,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Solid => "solid",
            EdgeKind::Dashed => "dashed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub user_id: UserId,
    pub listing_id: ListingId,
    pub kind: EdgeKind,
    /// Messages exchanged in the thread this edge stands for. Always 0 on
    /// solid edges.
    pub message_count: u64,
}

/// At most one edge per (user, listing) pair; keyed listing-first so all
/// edges of one listing are adjacent.
#[derive(Debug, Clone, Default)]
pub struct SocialGraph {
    edges: BTreeMap<(ListingId, UserId), GraphEdge>,
}

impl SocialGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn edge(&self, user: UserId, listing: ListingId) -> Option<&GraphEdge> {
        self.edges.get(&(listing, user))
    }

    pub fn upsert(&mut self, edge: GraphEdge) {
        self.edges.insert((edge.listing_id, edge.user_id), edge);
    }

    pub fn edges_of(&self, listing: ListingId) -> impl Iterator<Item = &GraphEdge> {
        self.edges
            .range((listing, UserId(0))..=(listing, UserId(u64::MAX)))
            .map(|(_, e)| e)
    }

    pub fn solid_holder(&self, listing: ListingId) -> Option<UserId> {
        self.edges_of(listing)
            .find(|e| e.kind == EdgeKind::Solid)
            .map(|e| e.user_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &GraphEdge> {
        self.edges.values()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Diagnostic edge list: `user_id<TAB>listing_id<TAB>solid|dashed<TAB>message_count`.
    pub fn export_tsv(&self) -> String {
        let mut out = String::new();
        for e in self.edges.values() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                e.user_id,
                e.listing_id,
                e.kind.as_str(),
                e.message_count
            )
            .unwrap();
        }
        out
    }
}
