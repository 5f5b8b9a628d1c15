//! Per-viewer listing views.
//!
//! | viewer                              | network-only listing | public listing |
//! |-------------------------------------|----------------------|----------------|
//! | anonymous or unverified account     | anonymous            | anonymous      |
//! | member of the owner's network       | member               | member         |
//! | member of another network           | denied               | member         |
//! | owner                               | full                 | full           |
//!
//! Hidden and deleted listings are denied to everyone but the owner. No level
//! ever carries the owner's email, full name or home location.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{IdentityError, User};
use crate::geo::GeoPoint;
use crate::ids::{ListingId, NetworkId, UserId};
use crate::marketplace::{Listing, ListingStatus, Visibility};
use crate::schema::{CategorySchema, FieldValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RedactionLevel {
    Full,
    Member,
    Anonymous,
}

#[derive(Debug, Clone, Copy)]
pub enum Viewer<'a> {
    Anonymous,
    User(&'a User),
}

impl Viewer<'_> {
    pub fn user_id(&self) -> Option<UserId> {
        match self {
            Viewer::Anonymous => None,
            Viewer::User(u) => Some(u.id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedactedListing {
    pub listing_id: ListingId,
    pub redaction_level: RedactionLevel,
    pub category: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcategory: Option<String>,
    pub tags: BTreeSet<String>,
    pub title: String,
    pub status: ListingStatus,
    pub created_at: DateTime<Utc>,
    /// All values for members and owners; filterable fields only for anonymous viewers.
    pub values: BTreeMap<String, FieldValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub owner_username: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<GeoPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visibility: Option<Visibility>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub updated_at: Option<DateTime<Utc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub view_count: Option<u64>,
}

/// Which view of `listing` the viewer is entitled to, if any.
pub fn access_level(viewer: Viewer<'_>, listing: &Listing, owner: &User) -> Option<RedactionLevel> {
    if let Viewer::User(u) = viewer {
        if u.id == listing.owner_id {
            return Some(RedactionLevel::Full);
        }
    }
    if !matches!(listing.status, ListingStatus::Active | ListingStatus::Sold) {
        return None;
    }
    match viewer {
        Viewer::User(u) if u.active => {
            if u.network_id == owner.network_id || listing.visibility == Visibility::Public {
                Some(RedactionLevel::Member)
            } else {
                None
            }
        }
        _ => Some(RedactionLevel::Anonymous),
    }
}

/// Builds the view of `listing` for `viewer`. `schema` is the listing's
/// category template and decides which values anonymous viewers see.
pub fn redact(
    viewer: Viewer<'_>,
    listing: &Listing,
    owner: &User,
    schema: Option<&CategorySchema>,
) -> Result<RedactedListing, IdentityError> {
    let level = access_level(viewer, listing, owner).ok_or(IdentityError::Denied)?;

    let mut view = RedactedListing {
        listing_id: listing.id,
        redaction_level: level,
        category: listing.category.clone(),
        subcategory: listing.subcategory.clone(),
        tags: listing.tags.clone(),
        title: listing.title.clone(),
        status: listing.status,
        created_at: listing.created_at,
        values: BTreeMap::new(),
        description: None,
        owner_username: None,
        network: None,
        location: None,
        visibility: None,
        updated_at: None,
        view_count: None,
    };

    match level {
        RedactionLevel::Anonymous => {
            if let Some(schema) = schema {
                view.values = listing
                    .values
                    .iter()
                    .filter(|(label, _)| {
                        schema
                            .field(label)
                            .is_some_and(|f| f.visible_in_search_filter)
                    })
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
            }
        }
        RedactionLevel::Member | RedactionLevel::Full => {
            view.values = listing.values.clone();
            view.description = Some(listing.description.clone());
            view.owner_username = Some(owner.username.clone());
            view.network = Some(owner.network_id.clone());
            view.location = listing.location;
            view.visibility = Some(listing.visibility);
            view.updated_at = Some(listing.updated_at);
            if level == RedactionLevel::Full {
                view.view_count = Some(listing.view_count);
            }
        }
    }
    Ok(view)
}
