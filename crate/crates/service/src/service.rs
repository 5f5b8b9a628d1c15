//! The marketplace behind a lock, with every mutation journaled before its
//! result is returned.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use classifieds_core::identity::{NetworkRegistry, Preferences, RedactedListing, User};
use classifieds_core::marketplace::{Action, ListingDraft, ListingError, Profile};
use classifieds_core::messaging::{scan_outbox, Folder, MessageView, MessagingError, Party};
use classifieds_core::schema::{
    derive_filter_spec, serialize_schema, CategorySchema, DataType, Decision, FieldRequest, FieldSpec,
    NewFieldRequest, SchemaEntry, SchemaRegistry,
};
use classifieds_core::search::{FieldFilter, Page, Ranker, SearchError, SearchQuery, SynonymTable, Tokenizer};
use classifieds_core::{
    Clock, FolderThread, GeoPoint, ListingId, Marketplace, MessageId, NetworkId, PendingRegistration, Registration,
    RequestId, SearchHit, SettingsUpdate, SystemClock, ThreadId, UserId,
};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ServiceConfig};
use crate::session::SessionTable;
use crate::store::{Record, Store, StoreError};

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("invalid config: {0}")]
    ConfigInvalid(#[from] ConfigError),
    #[error("schema file {}: {reason}", path.display())]
    SchemaLoadFailed { path: PathBuf, reason: String },
    #[error("network registry {}: {reason}", path.display())]
    NetworkRegistryInvalid { path: PathBuf, reason: String },
    #[error("synonym table {}: {reason}", path.display())]
    SynonymTableInvalid { path: PathBuf, reason: String },
    #[error("stopword list {}: {reason}", path.display())]
    StopwordsUnreadable { path: PathBuf, reason: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot listen on {addr}: {source}")]
    PortUnavailable { addr: std::net::SocketAddr, source: io::Error },
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Domain(#[from] classifieds_core::Error),
    #[error("sign in required")]
    AuthenticationRequired,
    #[error("{0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Storage(#[from] StoreError),
    #[error("storage is unavailable after an earlier write failure; restart the service")]
    StorageUnavailable,
    #[error("cannot write {}: {source}", path.display())]
    SchemaWriteFailed { path: PathBuf, source: io::Error },
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Domain(e) => e.code(),
            ServiceError::AuthenticationRequired => "AuthenticationRequired",
            ServiceError::InvalidRequest(_) => "InvalidRequest",
            ServiceError::Storage(_) => "StorageFailure",
            ServiceError::StorageUnavailable => "StorageUnavailable",
            ServiceError::SchemaWriteFailed { .. } => "SchemaWriteFailed",
        }
    }
}

impl From<ListingError> for ServiceError {
    fn from(e: ListingError) -> Self {
        ServiceError::Domain(e.into())
    }
}

impl From<SearchError> for ServiceError {
    fn from(e: SearchError) -> Self {
        ServiceError::Domain(e.into())
    }
}

impl From<MessagingError> for ServiceError {
    fn from(e: MessagingError) -> Self {
        ServiceError::Domain(e.into())
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

/// Overrides for deterministic runs.
#[derive(Default, Clone)]
pub struct OpenOptions {
    pub clock: Option<Arc<dyn Clock>>,
    pub rng_seed: Option<u64>,
}

/// Account details shown only to the account holder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountView {
    pub user_id: UserId,
    pub username: String,
    pub email: String,
    pub network_id: NetworkId,
    pub full_name: Option<String>,
    pub home_location: Option<GeoPoint>,
    pub preferences: Preferences,
    pub active: bool,
    pub created_at: DateTime<Utc>,
}

impl AccountView {
    pub fn of(u: &User) -> Self {
        AccountView {
            user_id: u.id,
            username: u.username.clone(),
            email: u.email.clone(),
            network_id: u.network_id.clone(),
            full_name: u.full_name.clone(),
            home_location: u.home_location,
            preferences: u.preferences.clone(),
            active: u.active,
            created_at: u.created_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoginGrant {
    pub session_token: String,
    pub user_id: UserId,
    pub username: String,
    pub expires_at: DateTime<Utc>,
}

/// An approved category template together with its derived search filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaView {
    #[serde(flatten)]
    pub schema: CategorySchema,
    pub filters: Vec<FieldSpec>,
}

impl SchemaView {
    pub fn of(schema: &CategorySchema) -> Self {
        SchemaView {
            schema: schema.clone(),
            filters: derive_filter_spec(schema),
        }
    }
}

/// Search parameters as they arrive from a client, before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchRequest {
    pub q: String,
    pub category: Option<String>,
    pub subcategory: Option<String>,
    /// Raw filter specs keyed by field label, e.g. `Price` → `range:10..50`.
    pub filters: Vec<(String, String)>,
    pub origin: Option<GeoPoint>,
    pub page: usize,
    pub page_size: Option<usize>,
}

struct State {
    market: Marketplace,
    sessions: SessionTable,
    store: Store,
    broken: bool,
}

impl State {
    /// Journals everything the marketplace changed plus `extra` as one commit.
    fn commit(&mut self, extra: Vec<Record>) -> Result<()> {
        let mut records: Vec<Record> = self.market.take_changes().into_iter().map(|c| Record::Change(Box::new(c))).collect();
        records.extend(extra);
        if let Err(e) = self.store.commit(&records) {
            self.broken = true;
            return Err(e.into());
        }
        Ok(())
    }
}

pub struct Service {
    config: ServiceConfig,
    state: RwLock<State>,
}

fn load_networks(path: &Path) -> Result<NetworkRegistry, StartupError> {
    let fail = |reason: String| StartupError::NetworkRegistryInvalid {
        path: path.to_path_buf(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    NetworkRegistry::parse(&text).map_err(|e| fail(e.to_string()))
}

fn load_ranker(config: &ServiceConfig) -> Result<Ranker, StartupError> {
    let tokenizer = match &config.stopwords_path {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| StartupError::StopwordsUnreadable {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            Tokenizer::from_stopword_file(&text)
        }
        None => Tokenizer::default(),
    };
    let synonyms = match &config.synonym_table_path {
        Some(path) => {
            let fail = |reason: String| StartupError::SynonymTableInvalid {
                path: path.clone(),
                reason,
            };
            let text = fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
            SynonymTable::parse(&text).map_err(|e| fail(e.to_string()))?
        }
        None => SynonymTable::default(),
    };
    Ok(Ranker::new(config.ranking(), tokenizer, synonyms))
}

impl Service {
    pub fn open(config: ServiceConfig) -> Result<Service, StartupError> {
        Service::open_with(config, OpenOptions::default())
    }

    /// Loads schemas and networks, replays the store and compacts it.
    pub fn open_with(config: ServiceConfig, options: OpenOptions) -> Result<Service, StartupError> {
        config.validate()?;
        let schemas = SchemaRegistry::load_dir(&config.schema_dir).map_err(|e| StartupError::SchemaLoadFailed {
            path: e.path,
            reason: e.reason,
        })?;
        let networks = load_networks(&config.network_registry_path)?;
        let ranker = load_ranker(&config)?;
        let (mut store, records) = Store::open(&config.data_dir, config.fsync)?;

        let mut market = Marketplace::new(config.marketplace(), schemas, networks)
            .with_ranker(ranker)
            .with_clock(options.clock.unwrap_or_else(|| Arc::new(SystemClock)));
        if let Some(seed) = options.rng_seed {
            market = market.with_seed(seed);
        }
        let mut sessions = SessionTable::new();
        for record in records {
            match record {
                Record::Change(c) => market.apply_change(*c),
                Record::Session(s) => sessions.insert(s),
                Record::SessionRevoked { digest } => sessions.remove_digest(&digest),
            }
        }
        market.rebuild_index();
        // mail written just before a crash may not have reached the journal
        if let Ok(keys) = scan_outbox(&config.outbox_dir()) {
            market.mark_delivered(keys);
        }
        let now = market.now();
        let mut snapshot: Vec<Record> = market.snapshot().into_iter().map(|c| Record::Change(Box::new(c))).collect();
        snapshot.extend(sessions.live(now).into_iter().map(Record::Session));
        store.compact(&snapshot)?;
        market.take_changes();

        Ok(Service {
            config,
            state: RwLock::new(State {
                market,
                sessions,
                store,
                broken: false,
            }),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn read<T>(&self, f: impl FnOnce(&Marketplace) -> classifieds_core::engine::Result<T>) -> Result<T> {
        Ok(f(&self.state.read().market)?)
    }

    fn write<T>(&self, f: impl FnOnce(&mut Marketplace) -> classifieds_core::engine::Result<T>) -> Result<T> {
        let mut st = self.state.write();
        if st.broken {
            return Err(ServiceError::StorageUnavailable);
        }
        let out = f(&mut st.market);
        st.commit(Vec::new())?;
        Ok(out?)
    }

    /// Read access to the whole marketplace, for diagnostics and tests.
    pub fn inspect<T>(&self, f: impl FnOnce(&Marketplace) -> T) -> T {
        f(&self.state.read().market)
    }

    pub fn check_invariants(&self) -> Vec<String> {
        self.inspect(|m| m.check_invariants())
    }

    // sessions

    /// The user behind a bearer token. Unknown and expired tokens both give
    /// `None`.
    pub fn session_user(&self, token: Option<&str>) -> Option<UserId> {
        let st = self.state.read();
        let user = st.sessions.resolve(token?, st.market.now())?;
        st.market.user(user).filter(|u| u.active).map(|u| u.id)
    }

    pub fn require_user(&self, token: Option<&str>) -> Result<UserId> {
        self.session_user(token).ok_or(ServiceError::AuthenticationRequired)
    }

    pub fn register(&self, registration: Registration) -> Result<PendingRegistration> {
        self.write(|m| m.register(registration))
    }

    pub fn verify(&self, token: &str) -> Result<AccountView> {
        self.write(|m| m.verify(token)).map(|u| AccountView::of(&u))
    }

    pub fn login(&self, login: &str, password: &str) -> Result<LoginGrant> {
        let user = self.read(|m| m.authenticate(login, password).cloned())?;
        let mut st = self.state.write();
        if st.broken {
            return Err(ServiceError::StorageUnavailable);
        }
        let now = st.market.now();
        let (token, record) = st.sessions.issue(user.id, now, self.config.session_ttl());
        let expires_at = record.expires_at;
        st.commit(vec![Record::Session(record)])?;
        Ok(LoginGrant {
            session_token: token,
            user_id: user.id,
            username: user.username,
            expires_at,
        })
    }

    pub fn logout(&self, token: &str) -> Result<()> {
        let mut st = self.state.write();
        if st.broken {
            return Err(ServiceError::StorageUnavailable);
        }
        let now = st.market.now();
        if st.sessions.resolve(token, now).is_none() {
            return Err(ServiceError::AuthenticationRequired);
        }
        match st.sessions.revoke(token) {
            Some(digest) => st.commit(vec![Record::SessionRevoked { digest }]),
            None => Err(ServiceError::AuthenticationRequired),
        }
    }

    pub fn account(&self, user: UserId) -> Result<AccountView> {
        self.inspect(|m| m.user(user).map(AccountView::of))
            .ok_or(ServiceError::AuthenticationRequired)
    }

    pub fn update_settings(&self, user: UserId, update: SettingsUpdate) -> Result<AccountView> {
        self.write(|m| m.update_settings(user, update)).map(|u| AccountView::of(&u))
    }

    // listings

    pub fn feed(&self, viewer: Option<UserId>, page: usize, page_size: Option<usize>) -> Result<Page<RedactedListing>> {
        let size = page_size.unwrap_or(self.config.page_size);
        self.read(|m| m.newsfeed(viewer, page, size))
    }

    pub fn search(&self, viewer: Option<UserId>, request: SearchRequest) -> Result<Page<SearchHit>> {
        let st = self.state.read();
        let market = &st.market;
        let mut query = SearchQuery::text(&request.q);
        query.category = request.category.filter(|c| !c.is_empty());
        query.subcategory = request.subcategory.filter(|c| !c.is_empty());
        query.origin = request.origin;
        query.page = request.page;
        query.page_size = request.page_size.unwrap_or(self.config.page_size);
        for (label, spec) in request.filters {
            let invalid = |why: String| ServiceError::from(SearchError::InvalidFilter(why));
            let category = query
                .category
                .as_deref()
                .ok_or_else(|| invalid("field filters need a category".into()))?;
            let schema = market
                .schemas()
                .approved(category)
                .ok_or_else(|| ListingError::SchemaNotFound(category.to_string()))?;
            let field = derive_filter_spec(schema)
                .into_iter()
                .find(|f| f.label.eq_ignore_ascii_case(&label))
                .ok_or_else(|| invalid(format!("{label:?} is not a search filter of {category}")))?;
            let filter = FieldFilter::parse(&spec, field.data_type).map_err(|e| invalid(format!("{label}: {e}")))?;
            query.field_filters.insert(field.label, filter);
        }
        Ok(market.search(viewer, &query)?)
    }

    pub fn create_listing(&self, owner: UserId, draft: ListingDraft) -> Result<RedactedListing> {
        self.write(|m| {
            let id = m.create_listing(owner, draft)?.id;
            m.view_listing(Some(owner), id)
        })
    }

    pub fn listing(&self, viewer: Option<UserId>, id: ListingId) -> Result<RedactedListing> {
        self.read(|m| m.view_listing(viewer, id))
    }

    pub fn mutate_listing(&self, actor: UserId, id: ListingId, action: Action) -> Result<RedactedListing> {
        self.write(|m| {
            m.mutate_listing(actor, id, action)?;
            m.view_listing(Some(actor), id)
        })
    }

    pub fn record_view(&self, viewer: Option<UserId>, id: ListingId) -> Result<()> {
        self.write(|m| m.record_view(id, viewer)).map(|_| ())
    }

    pub fn mark_sold(&self, actor: UserId, id: ListingId, buyer_username: &str) -> Result<RedactedListing> {
        self.write(|m| {
            let buyer = m
                .user_by_username(buyer_username)
                .ok_or_else(|| ListingError::UnknownUsername(buyer_username.to_string()))?
                .id;
            m.mark_sold(actor, id, buyer)?;
            m.view_listing(Some(actor), id)
        })
    }

    pub fn profile(&self, username: &str, viewer: Option<UserId>) -> Result<Profile> {
        self.read(|m| m.profile_of(username, viewer))
    }

    // messages

    /// Starts or continues the sender's conversation about a listing.
    pub fn send_message(&self, sender: UserId, listing: ListingId, body: &str) -> Result<MessageView> {
        self.write(|m| {
            let message = m.send_message(sender, listing, body)?;
            let thread = m.thread_for(listing, sender).expect("thread exists after send");
            Ok(MessageView::of(thread, Party::Inquirer, &message))
        })
    }

    pub fn reply(&self, sender: UserId, thread: ThreadId, body: &str) -> Result<MessageView> {
        self.write(|m| {
            let message = m.reply(sender, thread, body)?;
            let thread = m.thread(thread).expect("thread exists after reply");
            let party = thread.party_of(sender).expect("sender takes part");
            Ok(MessageView::of(thread, party, &message))
        })
    }

    pub fn folder(&self, user: UserId, folder: Folder, open: Option<ThreadId>) -> Result<Vec<FolderThread>> {
        self.write(|m| m.folder(user, folder, open))
    }

    pub fn delete_message(&self, user: UserId, message: MessageId) -> Result<MessageView> {
        self.write(|m| m.delete_message(user, message))
    }

    pub fn unread_count(&self, user: UserId) -> usize {
        self.inspect(|m| m.unread_count(user))
    }

    /// Writes queued mail to the outbox. Returns how many were written.
    pub fn flush_notifications(&self) -> Result<usize> {
        let outbox = self.config.outbox_dir();
        self.write(|m| m.flush_notifications(&outbox)).map(|sent| sent.len())
    }

    // schemas

    pub fn schemas(&self) -> Vec<SchemaView> {
        self.inspect(|m| m.schemas().approved_schemas().map(SchemaView::of).collect())
    }

    pub fn schema(&self, category: &str) -> Result<SchemaView> {
        self.inspect(|m| m.schemas().approved(category).map(SchemaView::of))
            .ok_or_else(|| ListingError::SchemaNotFound(category.to_string()).into())
    }

    pub fn submit_field_request(
        &self,
        user: UserId,
        category: String,
        label: String,
        data_type: DataType,
    ) -> Result<FieldRequest> {
        self.write(|m| {
            let creator = m
                .user(user)
                .map(|u| u.username.clone())
                .ok_or(ListingError::UnknownUser(user))?;
            m.submit_field_request(NewFieldRequest {
                category,
                label,
                data_type,
                creator,
            })
        })
    }

    pub fn field_requests(&self) -> Vec<FieldRequest> {
        self.inspect(|m| m.schemas().requests().cloned().collect())
    }

    /// Decides a request. An approval also rewrites the category's template
    /// file so the schema directory stays the source of truth at startup.
    pub fn decide_field_request(&self, id: RequestId, decision: Decision) -> Result<(FieldRequest, SchemaEntry)> {
        let (request, entry) = self.write(|m| m.decide_field_request(id, decision))?;
        if decision == Decision::Approve {
            let path = self.config.schema_dir.join(format!("{}.xml", entry.current.category));
            write_atomically(&path, serialize_schema(&entry.current).as_bytes())
                .map_err(|source| ServiceError::SchemaWriteFailed { path, source })?;
        }
        Ok((request, entry))
    }

    pub fn export_graph(&self) -> String {
        self.inspect(|m| m.export_graph())
    }

    /// Runs `f` against the marketplace and journals whatever it changed.
    pub(crate) fn write_with<T>(&self, f: impl FnOnce(&mut Marketplace) -> classifieds_core::engine::Result<T>) -> Result<T> {
        self.write(f)
    }
}

pub(crate) fn write_atomically(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::File::open(&tmp)?.sync_all()?;
    fs::rename(&tmp, path)
}
