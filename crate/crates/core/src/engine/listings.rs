use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Change, Marketplace, Result};
use crate::identity::{access_level, redact, IdentityError, RedactedListing, Viewer};
use crate::ids::{ListingId, UserId};
use crate::marketplace::{
    transition, Action, EdgeKind, GraphEdge, Listing, ListingDraft, ListingEdit, ListingError,
    ListingStatus, Profile, ProfileEntry,
};
use crate::schema::{validate_values, CategorySchema, FieldValue, TITLE_LABEL};
use crate::search::{paginate, Page, RankedResult, SearchQuery};

const MAX_TAGS: usize = 20;
const MAX_TAG_CHARS: usize = 40;
const MAX_DESCRIPTION_CHARS: usize = 10_000;
const MAX_SUBCATEGORY_CHARS: usize = 64;

/// One search result: the viewer's redacted view plus the score breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub listing: RedactedListing,
    pub score: RankedResult,
}

fn normalize_tags(tags: &[String]) -> Result<BTreeSet<String>, ListingError> {
    let set: BTreeSet<String> = tags
        .iter()
        .map(|t| t.trim().to_lowercase())
        .filter(|t| !t.is_empty())
        .collect();
    if set.len() > MAX_TAGS {
        return Err(ListingError::InvalidDraft(format!("at most {MAX_TAGS} tags")));
    }
    if let Some(t) = set
        .iter()
        .find(|t| t.chars().count() > MAX_TAG_CHARS || t.chars().any(char::is_control))
    {
        return Err(ListingError::InvalidDraft(format!("invalid tag {t:?}")));
    }
    Ok(set)
}

fn check_description(description: &str) -> Result<String, ListingError> {
    if description.chars().count() > MAX_DESCRIPTION_CHARS {
        return Err(ListingError::InvalidDraft(format!(
            "description exceeds {MAX_DESCRIPTION_CHARS} characters"
        )));
    }
    Ok(description.trim().to_string())
}

fn normalize_subcategory(sub: &Option<String>) -> Result<Option<String>, ListingError> {
    let sub = sub.as_deref().map(str::trim).filter(|s| !s.is_empty());
    if sub.is_some_and(|s| s.chars().count() > MAX_SUBCATEGORY_CHARS || s.chars().any(char::is_control)) {
        return Err(ListingError::InvalidDraft("invalid subcategory".into()));
    }
    Ok(sub.map(str::to_string))
}

/// Validates raw values against `schema`, returning typed values and the title.
fn typed_values(
    schema: &CategorySchema,
    raw: &BTreeMap<String, String>,
) -> Result<(BTreeMap<String, FieldValue>, String), ListingError> {
    let report = validate_values(schema, raw);
    if !report.is_ok() {
        return Err(ListingError::ValidationFailed(report));
    }
    let values = report.into_values();
    let title = values
        .get(TITLE_LABEL)
        .and_then(FieldValue::as_text)
        .unwrap_or_default()
        .to_string();
    Ok((values, title))
}

impl Marketplace {
    /// Publishes a listing owned by `owner_id`, together with its ownership
    /// edge and index entry.
    pub fn create_listing(&mut self, owner_id: UserId, draft: ListingDraft) -> Result<Listing> {
        let owner = self.users.get(&owner_id).ok_or(ListingError::UnknownUser(owner_id))?;
        if !owner.active {
            return Err(ListingError::AccountInactive.into());
        }
        let schema = self
            .schemas
            .approved(&draft.category)
            .ok_or_else(|| ListingError::SchemaNotFound(draft.category.clone()))?;
        let (values, title) = typed_values(schema, &draft.values)?;
        let schema_version = schema.version;
        let tags = normalize_tags(&draft.tags)?;
        let description = check_description(&draft.description)?;
        let subcategory = normalize_subcategory(&draft.subcategory)?;

        let now = self.now();
        let listing = Listing {
            id: ListingId(self.ids.listings.next()),
            owner_id,
            category: draft.category,
            schema_version,
            subcategory,
            tags,
            title,
            description,
            values,
            location: draft.location,
            visibility: draft.visibility,
            status: ListingStatus::Active,
            previous_status: None,
            created_at: now,
            updated_at: now,
            view_count: 0,
        };
        let edge = GraphEdge {
            user_id: owner_id,
            listing_id: listing.id,
            kind: EdgeKind::Solid,
            message_count: 0,
        };
        self.index.upsert(&listing, self.ranker.tokenizer());
        self.graph.upsert(edge.clone());
        self.listings.insert(listing.id, listing.clone());
        self.push(Change::Listing(listing.clone()));
        self.push(Change::Edge(edge));
        Ok(listing)
    }

    /// Applies an owner action: edit, hide, delete or undo.
    pub fn mutate_listing(&mut self, actor: UserId, id: ListingId, action: Action) -> Result<Listing> {
        let listing = self.listings.get(&id).ok_or(ListingError::ListingNotFound(id))?;
        if listing.owner_id != actor {
            return Err(ListingError::NotOwner.into());
        }
        let (status, previous_status) = transition(listing.status, listing.previous_status, &action)?;
        let mut next = listing.clone();
        if let Action::Edit(edit) = &action {
            self.apply_edit(&mut next, edit)?;
        }
        next.status = status;
        next.previous_status = previous_status;
        next.updated_at = self.now();

        if next.status == ListingStatus::Active {
            self.index.upsert(&next, self.ranker.tokenizer());
        } else {
            self.index.remove(id);
        }
        self.listings.insert(id, next.clone());
        self.push(Change::Listing(next.clone()));
        Ok(next)
    }

    fn apply_edit(&self, listing: &mut Listing, edit: &ListingEdit) -> Result<(), ListingError> {
        if let Some(raw) = &edit.values {
            let schema = self
                .schemas
                .approved(&listing.category)
                .ok_or_else(|| ListingError::SchemaNotFound(listing.category.clone()))?;
            let (values, title) = typed_values(schema, raw)?;
            listing.values = values;
            listing.title = title;
            listing.schema_version = schema.version;
        }
        if let Some(description) = &edit.description {
            listing.description = check_description(description)?;
        }
        if let Some(tags) = &edit.tags {
            listing.tags = normalize_tags(tags)?;
        }
        Ok(())
    }

    /// Counts one view by a viewer allowed to see the listing. Owner views are
    /// not counted. Returns the resulting count.
    pub fn record_view(&mut self, id: ListingId, viewer: Option<UserId>) -> Result<u64> {
        let listing = self.listings.get(&id).ok_or(ListingError::ListingNotFound(id))?;
        let owner = &self.users[&listing.owner_id];
        if access_level(self.viewer(viewer), listing, owner).is_none() {
            return Err(self.hidden_or_denied(listing, viewer).into());
        }
        if viewer == Some(listing.owner_id) {
            return Ok(listing.view_count);
        }
        let listing = self.listings.get_mut(&id).expect("checked above");
        listing.view_count += 1;
        let listing = listing.clone();
        let count = listing.view_count;
        self.push(Change::Listing(listing));
        Ok(count)
    }

    /// Listings outside the viewer's reach that are not live are reported as
    /// missing so their existence does not leak.
    fn hidden_or_denied(&self, listing: &Listing, viewer: Option<UserId>) -> ListingError {
        let is_owner = viewer == Some(listing.owner_id);
        match listing.status {
            ListingStatus::Hidden | ListingStatus::Deleted if !is_owner => {
                ListingError::ListingNotFound(listing.id)
            }
            _ => ListingError::Denied,
        }
    }

    /// Transfers ownership to `buyer`, who must have messaged about the
    /// listing. The buyer's edge becomes solid and the seller's dashed,
    /// carrying the conversation's message count.
    pub fn mark_sold(&mut self, actor: UserId, id: ListingId, buyer: UserId) -> Result<Listing> {
        let listing = self.listings.get(&id).ok_or(ListingError::ListingNotFound(id))?;
        if listing.owner_id != actor {
            return Err(ListingError::NotOwner.into());
        }
        if listing.status == ListingStatus::Sold {
            return Err(ListingError::AlreadySold.into());
        }
        if listing.status != ListingStatus::Active {
            return Err(ListingError::InvalidTransition {
                from: listing.status,
                action: "sell",
            }
            .into());
        }
        if buyer == actor {
            return Err(ListingError::SelfSale.into());
        }
        if !self.users.contains_key(&buyer) {
            return Err(ListingError::UnknownUser(buyer).into());
        }
        let buyer_edge = match self.graph.edge(buyer, id) {
            Some(e) if e.kind == EdgeKind::Dashed => e.clone(),
            _ => return Err(ListingError::BuyerNeverEngaged.into()),
        };
        let seller_edge = GraphEdge {
            user_id: actor,
            listing_id: id,
            kind: EdgeKind::Dashed,
            message_count: buyer_edge.message_count,
        };
        let buyer_edge = GraphEdge {
            kind: EdgeKind::Solid,
            message_count: 0,
            ..buyer_edge
        };

        let mut next = listing.clone();
        next.status = ListingStatus::Sold;
        next.previous_status = None;
        next.updated_at = self.now();
        self.index.remove(id);
        self.graph.upsert(buyer_edge.clone());
        self.graph.upsert(seller_edge.clone());
        self.listings.insert(id, next.clone());
        self.push(Change::Listing(next.clone()));
        self.push(Change::Edge(buyer_edge));
        self.push(Change::Edge(seller_edge));
        Ok(next)
    }

    fn schema_for(&self, listing: &Listing) -> Option<&CategorySchema> {
        self.schemas.entry(&listing.category).map(|e| &e.current)
    }

    fn redact_for(&self, viewer: Viewer<'_>, listing: &Listing) -> Result<RedactedListing, IdentityError> {
        let owner = &self.users[&listing.owner_id];
        redact(viewer, listing, owner, self.schema_for(listing))
    }

    /// The listing as `viewer` is allowed to see it.
    pub fn view_listing(&self, viewer: Option<UserId>, id: ListingId) -> Result<RedactedListing> {
        let listing = self.listings.get(&id).ok_or(ListingError::ListingNotFound(id))?;
        self.redact_for(self.viewer(viewer), listing)
            .map_err(|_| self.hidden_or_denied(listing, viewer).into())
    }

    /// A user's listings as seen by `viewer`. Deleted listings are omitted for
    /// everyone, and listings the viewer may not see are left out.
    pub fn profile_of(&self, username: &str, viewer: Option<UserId>) -> Result<Profile> {
        let user = self
            .user_by_username(username)
            .ok_or_else(|| ListingError::UnknownUsername(username.to_string()))?;
        let is_owner = viewer == Some(user.id);
        let view = self.viewer(viewer);
        let mut listings: Vec<&Listing> = self
            .listings
            .values()
            .filter(|l| l.owner_id == user.id && l.status != ListingStatus::Deleted)
            .filter(|l| access_level(view, l, user).is_some())
            .collect();
        listings.sort_by(|a, b| b.created_at.cmp(&a.created_at).then(a.id.cmp(&b.id)));
        Ok(Profile {
            username: user.username.clone(),
            listings: listings
                .into_iter()
                .map(|l| ProfileEntry {
                    listing_id: l.id,
                    title: l.title.clone(),
                    category: l.category.clone(),
                    status: l.status,
                    created_at: l.created_at,
                    view_count: is_owner.then_some(l.view_count),
                })
                .collect(),
        })
    }

    /// Ranked, redacted search over the active listings `viewer` may see.
    pub fn search(&self, viewer: Option<UserId>, query: &SearchQuery) -> Result<Page<SearchHit>> {
        query.check_page_size()?;
        let schema = query.category.as_deref().and_then(|c| self.schemas.approved(c));
        query.check_filters(schema)?;
        let view = self.viewer(viewer);
        let candidates = self.listings.values().filter(|l| {
            l.status == ListingStatus::Active
                && query.admits(l)
                && access_level(view, l, &self.users[&l.owner_id]).is_some()
        });
        let ranked = self.ranker.rank(&self.index, candidates, query, self.now());
        let page = paginate(ranked, query.page, query.page_size);
        Ok(page.map(|score| {
            let listing = &self.listings[&score.listing_id];
            let listing = self.redact_for(view, listing).expect("candidates are visible");
            SearchHit { listing, score }
        }))
    }

    /// Recent active listings. Signed-in viewers see what they may access,
    /// narrowed by their preferences; anonymous viewers see public listings.
    pub fn newsfeed(&self, viewer: Option<UserId>, page: usize, page_size: usize) -> Result<Page<RedactedListing>> {
        SearchQuery {
            page_size,
            ..Default::default()
        }
        .check_page_size()?;
        let view = self.viewer(viewer);
        let user = match view {
            Viewer::User(u) => Some(u),
            Viewer::Anonymous => None,
        };
        let mut feed: Vec<&Listing> = self
            .listings
            .values()
            .filter(|l| l.status == ListingStatus::Active)
            .filter(|l| {
                let owner = &self.users[&l.owner_id];
                match user {
                    None => l.visibility == crate::marketplace::Visibility::Public,
                    Some(u) => {
                        let prefs = &u.preferences;
                        access_level(view, l, owner).is_some()
                            && (prefs.categories.is_empty() || prefs.categories.contains(&l.category))
                            && (prefs.networks.is_empty() || prefs.networks.contains(&owner.network_id))
                            && match (prefs.radius_km, u.home_location, l.location) {
                                (Some(r), Some(home), Some(at)) => home.distance_km(&at) <= r,
                                _ => true,
                            }
                    }
                }
            })
            .collect();
        feed.sort_by(|a, b| b.created_at.cmp(&a.created_at).then(a.id.cmp(&b.id)));
        let page = paginate(feed, page, page_size);
        Ok(page.map(|l| self.redact_for(view, l).expect("feed entries are visible")))
    }

    /// Rebuilds the search index from the active listings.
    pub fn rebuild_index(&mut self) {
        self.index.clear();
        for listing in self.listings.values().filter(|l| l.status == ListingStatus::Active) {
            self.index.upsert(listing, self.ranker.tokenizer());
        }
    }
}
