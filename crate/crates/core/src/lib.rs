//! Classified-listings marketplace: category templates, network-scoped
//! accounts, listing lifecycle, ranked search and listing-scoped messaging.
//!
//! [`Marketplace`] owns the whole state and is the entry point for every
//! operation. The submodules hold the domain types and the pure algorithms it
//! is built from.

pub mod clock;
pub mod engine;
pub mod geo;
pub mod identity;
pub mod ids;
pub mod marketplace;
pub mod messaging;
pub mod schema;
pub mod search;

pub use clock::{Clock, ManualClock, SystemClock};
pub use engine::{
    Change, Error, FolderThread, Marketplace, MarketplaceConfig, PendingRegistration,
    Registration, SearchHit, SettingsUpdate,
};
pub use geo::GeoPoint;
pub use ids::{ListingId, MessageId, NetworkId, RequestId, ThreadId, UserId};
