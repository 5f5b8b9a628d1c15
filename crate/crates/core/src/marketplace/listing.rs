use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::ListingError;
use crate::geo::GeoPoint;
use crate::ids::{ListingId, UserId};
use crate::schema::FieldValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    /// Visible to members of the owner's network only.
    #[default]
    Network,
    Public,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ListingStatus {
    Active,
    Hidden,
    Deleted,
    Sold,
}

impl fmt::Display for ListingStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ListingStatus::Active => "active",
            ListingStatus::Hidden => "hidden",
            ListingStatus::Deleted => "deleted",
            ListingStatus::Sold => "sold",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Listing {
    pub id: ListingId,
    pub owner_id: UserId,
    pub category: String,
    /// Template version the values were validated against.
    pub schema_version: u32,
    pub subcategory: Option<String>,
    pub tags: BTreeSet<String>,
    pub title: String,
    pub description: String,
    pub values: BTreeMap<String, FieldValue>,
    pub location: Option<GeoPoint>,
    pub visibility: Visibility,
    pub status: ListingStatus,
    /// Status to restore on undo; cleared once used.
    pub previous_status: Option<ListingStatus>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub view_count: u64,
}

impl Listing {
    /// Values of text-typed fields other than the title, which is indexed on its own.
    pub fn text_field_values(&self) -> impl Iterator<Item = &str> {
        self.values
            .iter()
            .filter(|(label, _)| !label.eq_ignore_ascii_case(crate::schema::TITLE_LABEL))
            .filter_map(|(_, v)| v.as_text())
    }
}

/// What an owner submits to create a listing. `values` are raw strings keyed by
/// template label and must include the title.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ListingDraft {
    pub category: String,
    #[serde(default)]
    pub subcategory: Option<String>,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub description: String,
    pub values: BTreeMap<String, String>,
    #[serde(default)]
    pub visibility: Visibility,
    #[serde(default)]
    pub location: Option<GeoPoint>,
}

/// Replacement content for an edit; absent parts are kept.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ListingEdit {
    #[serde(default)]
    pub values: Option<BTreeMap<String, String>>,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub tags: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Edit(ListingEdit),
    Hide,
    Delete,
    Undo,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Edit(_) => "edit",
            Action::Hide => "hide",
            Action::Delete => "delete",
            Action::Undo => "undo",
        }
    }
}

/// Lifecycle transition table. Returns the new `(status, previous_status)`.
///
/// | from    | hide            | delete           | undo                  | edit   |
/// |---------|-----------------|------------------|-----------------------|--------|
/// | active  | hidden (active) | deleted (active) | -                     | active |
/// | hidden  | -               | deleted (hidden) | active                | hidden |
/// | deleted | -               | -                | stored previous       | -      |
/// | sold    | -               | -                | -                     | -      |
pub fn transition(
    status: ListingStatus,
    previous: Option<ListingStatus>,
    action: &Action,
) -> Result<(ListingStatus, Option<ListingStatus>), ListingError> {
    use ListingStatus::*;
    let invalid = || ListingError::InvalidTransition {
        from: status,
        action: action.name(),
    };
    match (action, status) {
        (Action::Edit(_), Active | Hidden) => Ok((status, previous)),
        (Action::Hide, Active) => Ok((Hidden, Some(Active))),
        (Action::Delete, Active | Hidden) => Ok((Deleted, Some(status))),
        (Action::Undo, Hidden) => Ok((Active, None)),
        (Action::Undo, Deleted) => previous.map(|p| (p, None)).ok_or_else(invalid),
        _ => Err(invalid()),
    }
}
