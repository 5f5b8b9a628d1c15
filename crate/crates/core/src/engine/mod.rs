//! The marketplace state machine.
//!
//! Every successful mutation appends [`Change`] records describing the new
//! state of each touched entity. A persistence layer drains them with
//! [`Marketplace::take_changes`] and replays them with
//! [`Marketplace::apply_change`].

mod accounts;
mod listings;
mod messages;
mod replay;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{Clock, SystemClock};
use crate::identity::{IdentityError, NetworkRegistry, User, VerificationToken, Viewer};
use crate::ids::{IdSequence, ListingId, MessageId, ThreadId, UserId};
use crate::marketplace::{GraphEdge, Listing, ListingError, SocialGraph};
use crate::messaging::{MessagingError, MessageThread, NotificationQueue, OutboundNotification};
use crate::schema::{FieldRequest, SchemaEntry, SchemaError, SchemaRegistry};
use crate::search::{InvertedIndex, Ranker, SearchError};

pub use accounts::{PendingRegistration, Registration, SettingsUpdate};
pub use listings::SearchHit;
pub use messages::FolderThread;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Listing(#[from] ListingError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Messaging(#[from] MessagingError),
}

impl Error {
    /// Stable machine-readable name of the error.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Schema(e) => e.code(),
            Error::Identity(e) => e.code(),
            Error::Listing(e) => e.code(),
            Error::Search(e) => e.code(),
            Error::Messaging(e) => e.code(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// New state of one entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Change {
    Schema(SchemaEntry),
    FieldRequest(FieldRequest),
    User(User),
    Token(VerificationToken),
    Listing(Listing),
    Edge(GraphEdge),
    Thread(MessageThread),
    NotificationQueued {
        slot: String,
        notification: OutboundNotification,
    },
    NotificationDelivered {
        slot: String,
        key: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketplaceConfig {
    /// Prefix for links in outgoing email, without a trailing slash.
    pub base_url: String,
    pub verification_ttl: Duration,
    pub password_iterations: u32,
}

impl Default for MarketplaceConfig {
    fn default() -> Self {
        MarketplaceConfig {
            base_url: "http://localhost:8080".into(),
            verification_ttl: Duration::hours(48),
            password_iterations: 100_000,
        }
    }
}

#[derive(Default)]
struct IdSequences {
    users: IdSequence,
    listings: IdSequence,
    threads: IdSequence,
    messages: IdSequence,
}

pub struct Marketplace {
    config: MarketplaceConfig,
    clock: Arc<dyn Clock>,
    rng: ChaCha20Rng,
    schemas: SchemaRegistry,
    networks: NetworkRegistry,
    ranker: Ranker,
    users: BTreeMap<UserId, User>,
    by_username: HashMap<String, UserId>,
    by_email: HashMap<String, UserId>,
    tokens: HashMap<String, VerificationToken>,
    listings: BTreeMap<ListingId, Listing>,
    graph: SocialGraph,
    index: InvertedIndex,
    threads: BTreeMap<ThreadId, MessageThread>,
    thread_by_key: HashMap<(ListingId, UserId), ThreadId>,
    message_thread: HashMap<MessageId, ThreadId>,
    notifications: NotificationQueue,
    ids: IdSequences,
    changes: Vec<Change>,
}

impl Marketplace {
    pub fn new(config: MarketplaceConfig, schemas: SchemaRegistry, networks: NetworkRegistry) -> Self {
        let ranker = Ranker::default();
        Marketplace {
            config,
            clock: Arc::new(SystemClock),
            rng: ChaCha20Rng::from_os_rng(),
            schemas,
            networks,
            index: InvertedIndex::new(ranker.config().field_weights),
            ranker,
            users: BTreeMap::new(),
            by_username: HashMap::new(),
            by_email: HashMap::new(),
            tokens: HashMap::new(),
            listings: BTreeMap::new(),
            graph: SocialGraph::new(),
            threads: BTreeMap::new(),
            thread_by_key: HashMap::new(),
            message_thread: HashMap::new(),
            notifications: NotificationQueue::default(),
            ids: IdSequences::default(),
            changes: Vec::new(),
        }
    }

    pub fn with_ranker(mut self, ranker: Ranker) -> Self {
        self.index = InvertedIndex::new(ranker.config().field_weights);
        self.ranker = ranker;
        self.rebuild_index();
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// Makes salts and tokens reproducible.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng = ChaCha20Rng::seed_from_u64(seed);
        self
    }

    pub fn config(&self) -> &MarketplaceConfig {
        &self.config
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    pub fn schemas(&self) -> &SchemaRegistry {
        &self.schemas
    }

    pub fn networks(&self) -> &NetworkRegistry {
        &self.networks
    }

    pub fn ranker(&self) -> &Ranker {
        &self.ranker
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn graph(&self) -> &SocialGraph {
        &self.graph
    }

    pub fn users(&self) -> impl Iterator<Item = &User> {
        self.users.values()
    }

    pub fn user(&self, id: UserId) -> Option<&User> {
        self.users.get(&id)
    }

    pub fn user_by_username(&self, username: &str) -> Option<&User> {
        self.by_username.get(username).and_then(|id| self.users.get(id))
    }

    pub fn listings(&self) -> impl Iterator<Item = &Listing> {
        self.listings.values()
    }

    pub fn listing(&self, id: ListingId) -> Option<&Listing> {
        self.listings.get(&id)
    }

    pub fn threads(&self) -> impl Iterator<Item = &MessageThread> {
        self.threads.values()
    }

    pub fn thread(&self, id: ThreadId) -> Option<&MessageThread> {
        self.threads.get(&id)
    }

    pub fn thread_for(&self, listing: ListingId, inquirer: UserId) -> Option<&MessageThread> {
        self.thread_by_key
            .get(&(listing, inquirer))
            .and_then(|id| self.threads.get(id))
    }

    pub fn pending_notifications(&self) -> impl Iterator<Item = (&str, &OutboundNotification)> {
        self.notifications.pending()
    }

    /// Drains the change records produced since the last call.
    pub fn take_changes(&mut self) -> Vec<Change> {
        std::mem::take(&mut self.changes)
    }

    pub fn has_changes(&self) -> bool {
        !self.changes.is_empty()
    }

    /// Diagnostic edge list, one `user, listing, kind, count` row per edge.
    pub fn export_graph(&self) -> String {
        self.graph.export_tsv()
    }

    fn viewer(&self, id: Option<UserId>) -> Viewer<'_> {
        match id.and_then(|id| self.users.get(&id)) {
            Some(u) => Viewer::User(u),
            None => Viewer::Anonymous,
        }
    }

    fn push(&mut self, change: Change) {
        self.changes.push(change);
    }
}
