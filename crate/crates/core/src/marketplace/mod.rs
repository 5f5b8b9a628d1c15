//! Listings, their lifecycle, and the ownership/interest graph.

mod graph;
mod listing;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ListingId, UserId};
use crate::schema::ValidationReport;

pub use graph::{EdgeKind, GraphEdge, SocialGraph};
pub use listing::{
    transition, Action, Listing, ListingDraft, ListingEdit, ListingStatus, Visibility,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ListingError {
    #[error("no approved schema for category {0:?}")]
    SchemaNotFound(String),
    #[error("listing values failed validation")]
    ValidationFailed(ValidationReport),
    #[error("account is not active")]
    AccountInactive,
    #[error("only the owner may do that")]
    NotOwner,
    #[error("cannot {action} a listing that is {from}")]
    InvalidTransition { from: ListingStatus, action: &'static str },
    #[error("listing {0} not found")]
    ListingNotFound(ListingId),
    #[error("buyer never contacted the owner about this listing")]
    BuyerNeverEngaged,
    #[error("listing was already sold")]
    AlreadySold,
    #[error("owner cannot sell to themselves")]
    SelfSale,
    #[error("unknown username {0:?}")]
    UnknownUsername(String),
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("not visible to this viewer")]
    Denied,
    #[error("invalid listing data: {0}")]
    InvalidDraft(String),
}

impl ListingError {
    pub fn code(&self) -> &'static str {
        match self {
            ListingError::SchemaNotFound(_) => "SchemaNotFound",
            ListingError::ValidationFailed(_) => "ValidationFailed",
            ListingError::AccountInactive => "AccountInactive",
            ListingError::NotOwner => "NotOwner",
            ListingError::InvalidTransition { .. } => "InvalidTransition",
            ListingError::ListingNotFound(_) => "ListingNotFound",
            ListingError::BuyerNeverEngaged => "BuyerNeverEngaged",
            ListingError::AlreadySold => "AlreadySold",
            ListingError::SelfSale => "SelfSale",
            ListingError::UnknownUsername(_) => "UnknownUsername",
            ListingError::UnknownUser(_) => "UnknownUser",
            ListingError::Denied => "Denied",
            ListingError::InvalidDraft(_) => "InvalidDraft",
        }
    }
}

/// A user's public page: a username and a set of listing summaries. Message
/// contents never appear here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub username: String,
    pub listings: Vec<ProfileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub listing_id: ListingId,
    pub title: String,
    pub category: String,
    pub status: ListingStatus,
    pub created_at: chrono::DateTime<chrono::Utc>,
    /// Present only when the owner is looking at their own profile.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub view_count: Option<u64>,
}
