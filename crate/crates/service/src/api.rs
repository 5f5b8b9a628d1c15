//! JSON over HTTP.
//!
//! Errors are returned as `{"error_code", "message", "details"?}` with a
//! status derived from the code. Sessions travel in an
//! `Authorization: Bearer <token>` header.

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Path, Request, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use classifieds_core::marketplace::{Action, ListingEdit, ListingError};
use classifieds_core::messaging::{Folder, MessagingError};
use classifieds_core::schema::DataType;
use classifieds_core::search::Page;
use classifieds_core::{GeoPoint, ListingId, MessageId, Registration, SettingsUpdate, ThreadId, UserId};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::service::{Service, ServiceError};

pub type AppState = Arc<Service>;

/// Every route the service answers, as `(method, path)`.
pub const ROUTES: &[(&str, &str)] = &[
    ("POST", "/auth/register"),
    ("GET", "/verify/{token}"),
    ("POST", "/auth/login"),
    ("POST", "/auth/logout"),
    ("GET", "/settings"),
    ("PATCH", "/settings"),
    ("GET", "/feed"),
    ("GET", "/search"),
    ("POST", "/listings"),
    ("GET", "/listings/{id}"),
    ("PATCH", "/listings/{id}"),
    ("POST", "/listings/{id}/view"),
    ("POST", "/listings/{id}/sold"),
    ("GET", "/directory/profile/{username}"),
    ("POST", "/messages"),
    ("GET", "/messages/unread-count"),
    ("GET", "/messages/{folder}"),
    ("DELETE", "/messages/{id}"),
    ("GET", "/schemas"),
    ("GET", "/schemas/{category}"),
    ("POST", "/schema-requests"),
    ("GET", "/health"),
];

pub fn router(service: AppState) -> Router {
    Router::new()
        .route("/auth/register", post(register))
        .route("/verify/{token}", get(verify))
        .route("/auth/login", post(login))
        .route("/auth/logout", post(logout))
        .route("/settings", get(settings).patch(update_settings))
        .route("/feed", get(feed))
        .route("/search", get(search))
        .route("/listings", post(create_listing))
        .route("/listings/{id}", get(get_listing).patch(patch_listing))
        .route("/listings/{id}/view", post(record_view))
        .route("/listings/{id}/sold", post(mark_sold))
        .route("/directory/profile/{username}", get(profile))
        .route("/messages", post(send_message))
        .route("/messages/unread-count", get(unread_count))
        .route("/messages/{key}", get(folder).delete(delete_message))
        .route("/schemas", get(schemas))
        .route("/schemas/{category}", get(schema))
        .route("/schema-requests", post(submit_field_request))
        .route("/health", get(health))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "RouteNotFound", "no such route") })
        .with_state(service)
}

// errors

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
    details: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.to_string(),
            message: message.into(),
            details: None,
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "InvalidRequest", message)
    }
}

/// HTTP status for an error code.
pub fn status_for(code: &str) -> StatusCode {
    match code {
        "AuthenticationRequired" | "InvalidCredentials" => StatusCode::UNAUTHORIZED,
        "Denied" | "NotOwner" | "NotParticipant" | "AccountInactive" => StatusCode::FORBIDDEN,
        "ListingNotFound" | "MessageNotFound" | "ThreadNotFound" | "SchemaNotFound" | "UnknownUsername"
        | "UnknownUser" | "UnknownRequestId" | "TokenUnknown" | "UnknownFolder" | "RouteNotFound" => {
            StatusCode::NOT_FOUND
        }
        "EmailAlreadyRegistered" | "UsernameTaken" | "AlreadySold" | "InvalidTransition" | "TokenAlreadyUsed"
        | "DuplicateFieldLabel" | "DuplicateCategory" | "RequestNotPending" => StatusCode::CONFLICT,
        "ListingDeleted" | "TokenExpired" => StatusCode::GONE,
        "StorageUnavailable" => StatusCode::SERVICE_UNAVAILABLE,
        "StorageFailure" | "SchemaWriteFailed" | "OutboxUnwritable" | "Internal" => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_REQUEST,
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let code = e.code();
        let details = match &e {
            ServiceError::Domain(classifieds_core::Error::Listing(ListingError::ValidationFailed(report))) => {
                serde_json::to_value(report).ok()
            }
            ServiceError::Domain(classifieds_core::Error::Listing(ListingError::InvalidTransition { from, action })) => {
                Some(json!({ "from": from, "action": action }))
            }
            _ => None,
        };
        ApiError {
            status: status_for(code),
            code: code.to_string(),
            message: e.to_string(),
            details,
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error_code: &'a str,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    details: Option<&'a Value>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error_code: &self.code,
            message: &self.message,
            details: self.details.as_ref(),
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

// extractors

/// JSON body whose parse failures become `InvalidRequest` errors.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(ApiError::invalid(json_rejection_text(e))),
        }
    }
}

fn json_rejection_text(e: JsonRejection) -> String {
    e.body_text()
}

/// Query string whose parse failures become `InvalidRequest` errors.
pub struct Params<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for Params<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        match axum::extract::Query::<T>::from_request_parts(parts, state).await {
            Ok(q) => Ok(Params(q.0)),
            Err(e) => Err(ApiError::invalid(query_rejection_text(e))),
        }
    }
}

fn query_rejection_text(e: QueryRejection) -> String {
    e.body_text()
}

/// The bearer token, if one was sent.
pub struct Bearer(pub Option<String>);

impl<S: Send + Sync> FromRequestParts<S> for Bearer {
    type Rejection = std::convert::Infallible;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, Self::Rejection> {
        let token = parts
            .headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer ").or_else(|| v.strip_prefix("bearer ")))
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty());
        Ok(Bearer(token))
    }
}

fn id_from(raw: &str) -> ApiResult<u64> {
    raw.parse().map_err(|_| ApiError::invalid(format!("{raw:?} is not an id")))
}

/// Runs a blocking service call off the async workers.
async fn call<T: Send + 'static>(
    service: &AppState,
    f: impl FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
) -> ApiResult<T> {
    let service = service.clone();
    match tokio::task::spawn_blocking(move || f(&service)).await {
        Ok(result) => result.map_err(ApiError::from),
        Err(_) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", "request handler failed")),
    }
}

/// The signed-in user. Rejects with `AuthenticationRequired` before any body
/// is read.
pub struct Authed(pub UserId);

impl FromRequestParts<AppState> for Authed {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let Bearer(token) = Bearer::from_request_parts(parts, state).await.expect("infallible");
        state
            .require_user(token.as_deref())
            .map(Authed)
            .map_err(ApiError::from)
    }
}

/// The signed-in user, or `None` for anonymous and expired sessions.
pub struct Viewer(pub Option<UserId>);

impl FromRequestParts<AppState> for Viewer {
    type Rejection = std::convert::Infallible;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let Bearer(token) = Bearer::from_request_parts(parts, state).await?;
        Ok(Viewer(state.session_user(token.as_deref())))
    }
}

#[derive(Serialize)]
struct PageBody<T> {
    items: Vec<T>,
    page: usize,
    page_size: usize,
    total: usize,
    has_more: bool,
}

impl<T> From<Page<T>> for PageBody<T> {
    fn from(p: Page<T>) -> Self {
        PageBody {
            has_more: p.has_more(),
            items: p.items,
            page: p.page,
            page_size: p.page_size,
            total: p.total,
        }
    }
}

// handlers

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn register(State(s): State<AppState>, Body(reg): Body<Registration>) -> ApiResult<(StatusCode, Json<Value>)> {
    let pending = call(&s, move |s| s.register(reg)).await?;
    let account = call(&s, move |s| s.account(pending.user_id)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "account": account, "verification": "sent" }))))
}

async fn verify(State(s): State<AppState>, Path(token): Path<String>) -> ApiResult<Json<Value>> {
    let account = call(&s, move |s| s.verify(&token)).await?;
    Ok(Json(json!({ "account": account })))
}

#[derive(Deserialize)]
struct LoginBody {
    login: String,
    password: String,
}

async fn login(State(s): State<AppState>, Body(b): Body<LoginBody>) -> ApiResult<Json<Value>> {
    let grant = call(&s, move |s| s.login(&b.login, &b.password)).await?;
    Ok(Json(serde_json::to_value(grant).expect("grant serializes")))
}

async fn logout(State(s): State<AppState>, bearer: Bearer) -> ApiResult<StatusCode> {
    let token = bearer.0.ok_or_else(|| ApiError::from(ServiceError::AuthenticationRequired))?;
    call(&s, move |s| s.logout(&token)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn settings(State(s): State<AppState>, Authed(user): Authed) -> ApiResult<Json<Value>> {
    let account = call(&s, move |s| s.account(user)).await?;
    Ok(Json(json!({ "account": account })))
}

async fn update_settings(
    State(s): State<AppState>,
    Authed(user): Authed,
    Body(update): Body<SettingsUpdate>,
) -> ApiResult<Json<Value>> {
    let account = call(&s, move |s| s.update_settings(user, update)).await?;
    Ok(Json(json!({ "account": account })))
}

#[derive(Deserialize)]
struct PageParams {
    #[serde(default)]
    page: usize,
    page_size: Option<usize>,
}

async fn feed(State(s): State<AppState>, Viewer(viewer): Viewer, Params(p): Params<PageParams>) -> ApiResult<Json<Value>> {
    let page = call(&s, move |s| s.feed(viewer, p.page, p.page_size)).await?;
    Ok(Json(serde_json::to_value(PageBody::from(page)).expect("page serializes")))
}

/// Result presentation requested by the client. It never changes ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewMode {
    List,
    Thumbnails,
    Map,
    Tabular,
}

impl ViewMode {
    fn parse(raw: &str) -> ApiResult<ViewMode> {
        match raw {
            "list" | "" => Ok(ViewMode::List),
            "thumbnails" => Ok(ViewMode::Thumbnails),
            "map" => Ok(ViewMode::Map),
            "tabular" => Ok(ViewMode::Tabular),
            other => Err(ApiError::invalid(format!("unknown view {other:?}"))),
        }
    }

    /// Listing fields a client should render in this mode.
    pub fn display_fields(self) -> &'static [&'static str] {
        match self {
            ViewMode::List => &[
                "title",
                "owner_username",
                "description",
                "network",
                "category",
                "subcategory",
                "created_at",
            ],
            ViewMode::Thumbnails => &["title", "values"],
            ViewMode::Map => &["title", "location"],
            ViewMode::Tabular => &["title", "category", "values", "created_at"],
        }
    }
}

/// Parses `/search` parameters. Field filters are given as
/// `f.<Label>=contains:<text>` or `f.<Label>=range:<lo>..<hi>`.
fn search_request(pairs: Vec<(String, String)>) -> ApiResult<(crate::service::SearchRequest, ViewMode)> {
    let mut req = crate::service::SearchRequest::default();
    let mut view = ViewMode::List;
    let (mut lat, mut lon) = (None, None);
    let number = |k: &str, v: &str| -> ApiResult<f64> {
        v.parse::<f64>().map_err(|_| ApiError::invalid(format!("`{k}` must be a number")))
    };
    for (k, v) in pairs {
        match k.as_str() {
            "q" => req.q = v,
            "category" => req.category = Some(v),
            "subcategory" => req.subcategory = Some(v),
            "view" => view = ViewMode::parse(&v)?,
            "page" => req.page = v.parse().map_err(|_| ApiError::invalid("`page` must be a non-negative integer"))?,
            "page_size" => {
                req.page_size = Some(v.parse().map_err(|_| ApiError::invalid("`page_size` must be an integer"))?)
            }
            "lat" => lat = Some(number("lat", &v)?),
            "lon" => lon = Some(number("lon", &v)?),
            other => match other.strip_prefix("f.") {
                Some(label) if !label.is_empty() => req.filters.push((label.to_string(), v)),
                _ => return Err(ApiError::invalid(format!("unknown parameter `{other}`"))),
            },
        }
    }
    req.origin = match (lat, lon) {
        (Some(lat), Some(lon)) => {
            Some(GeoPoint::new(lat, lon).ok_or_else(|| ApiError::invalid("coordinates out of range"))?)
        }
        (None, None) => None,
        _ => return Err(ApiError::invalid("`lat` and `lon` go together")),
    };
    Ok((req, view))
}

async fn search(
    State(s): State<AppState>,
    Viewer(viewer): Viewer,
    Params(pairs): Params<Vec<(String, String)>>,
) -> ApiResult<Json<Value>> {
    let (req, view) = search_request(pairs)?;
    let page = call(&s, move |s| s.search(viewer, req)).await?;
    let mut body = serde_json::to_value(PageBody::from(page)).expect("page serializes");
    body["view"] = json!(view);
    body["display_fields"] = json!(view.display_fields());
    Ok(Json(body))
}

async fn create_listing(
    State(s): State<AppState>,
    Authed(user): Authed,
    Body(draft): Body<classifieds_core::marketplace::ListingDraft>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let listing = call(&s, move |s| s.create_listing(user, draft)).await?;
    Ok((StatusCode::CREATED, Json(serde_json::to_value(listing).expect("listing serializes"))))
}

async fn get_listing(State(s): State<AppState>, Viewer(viewer): Viewer, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let id = ListingId(id_from(&id)?);
    let listing = call(&s, move |s| s.listing(viewer, id)).await?;
    Ok(Json(serde_json::to_value(listing).expect("listing serializes")))
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum ActionName {
    Edit,
    Hide,
    Delete,
    Undo,
}

#[derive(Deserialize)]
struct PatchBody {
    action: ActionName,
    #[serde(flatten)]
    edit: ListingEdit,
}

async fn patch_listing(
    State(s): State<AppState>,
    Authed(user): Authed,
    Path(id): Path<String>,
    Body(body): Body<PatchBody>,
) -> ApiResult<Json<Value>> {
    let id = ListingId(id_from(&id)?);
    let action = match body.action {
        ActionName::Edit => Action::Edit(body.edit),
        ActionName::Hide => Action::Hide,
        ActionName::Delete => Action::Delete,
        ActionName::Undo => Action::Undo,
    };
    let listing = call(&s, move |s| s.mutate_listing(user, id, action)).await?;
    Ok(Json(serde_json::to_value(listing).expect("listing serializes")))
}

async fn record_view(State(s): State<AppState>, Viewer(viewer): Viewer, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let id = ListingId(id_from(&id)?);
    call(&s, move |s| s.record_view(viewer, id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
struct SoldBody {
    buyer: String,
}

async fn mark_sold(
    State(s): State<AppState>,
    Authed(user): Authed,
    Path(id): Path<String>,
    Body(body): Body<SoldBody>,
) -> ApiResult<Json<Value>> {
    let id = ListingId(id_from(&id)?);
    let listing = call(&s, move |s| s.mark_sold(user, id, &body.buyer)).await?;
    Ok(Json(serde_json::to_value(listing).expect("listing serializes")))
}

async fn profile(State(s): State<AppState>, Viewer(viewer): Viewer, Path(username): Path<String>) -> ApiResult<Json<Value>> {
    let profile = call(&s, move |s| s.profile(&username, viewer)).await?;
    Ok(Json(serde_json::to_value(profile).expect("profile serializes")))
}

/// A first message names the listing; a reply names the thread.
#[derive(Deserialize)]
struct MessageBody {
    listing_id: Option<ListingId>,
    thread_id: Option<ThreadId>,
    body: String,
}

async fn send_message(
    State(s): State<AppState>,
    Authed(user): Authed,
    Body(m): Body<MessageBody>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let view = match (m.listing_id, m.thread_id) {
        (Some(listing), None) => call(&s, move |s| s.send_message(user, listing, &m.body)).await?,
        (None, Some(thread)) => call(&s, move |s| s.reply(user, thread, &m.body)).await?,
        _ => return Err(ApiError::invalid("give exactly one of `listing_id` and `thread_id`")),
    };
    Ok((StatusCode::CREATED, Json(serde_json::to_value(view).expect("message serializes"))))
}

#[derive(Deserialize)]
struct FolderParams {
    thread: Option<ThreadId>,
}

async fn folder(
    State(s): State<AppState>,
    Authed(user): Authed,
    Path(name): Path<String>,
    Params(p): Params<FolderParams>,
) -> ApiResult<Json<Value>> {
    let folder: Folder = name
        .parse()
        .map_err(|_| ApiError::from(ServiceError::from(MessagingError::UnknownFolder(name.clone()))))?;
    let threads = call(&s, move |s| s.folder(user, folder, p.thread)).await?;
    Ok(Json(json!({ "folder": folder.as_str(), "threads": threads })))
}

async fn delete_message(State(s): State<AppState>, Authed(user): Authed, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let id = MessageId(id_from(&id)?);
    let view = call(&s, move |s| s.delete_message(user, id)).await?;
    Ok(Json(serde_json::to_value(view).expect("message serializes")))
}

async fn unread_count(State(s): State<AppState>, Authed(user): Authed) -> ApiResult<Json<Value>> {
    let unread = call(&s, move |s| Ok(s.unread_count(user))).await?;
    Ok(Json(json!({ "unread": unread })))
}

async fn schemas(State(s): State<AppState>) -> ApiResult<Json<Value>> {
    let all = call(&s, |s| Ok(s.schemas())).await?;
    Ok(Json(json!({ "schemas": all })))
}

async fn schema(State(s): State<AppState>, Path(category): Path<String>) -> ApiResult<Json<Value>> {
    let view = call(&s, move |s| s.schema(&category)).await?;
    let xml = classifieds_core::schema::serialize_schema(&view.schema);
    let mut body = serde_json::to_value(view).expect("schema serializes");
    body["xml"] = json!(xml);
    Ok(Json(body))
}

#[derive(Deserialize)]
struct FieldRequestBody {
    category: String,
    label: String,
    #[serde(default)]
    data_type: DataType,
}

async fn submit_field_request(
    State(s): State<AppState>,
    Authed(user): Authed,
    Body(b): Body<FieldRequestBody>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let request = call(&s, move |s| s.submit_field_request(user, b.category, b.label, b.data_type)).await?;
    Ok((StatusCode::CREATED, Json(serde_json::to_value(request).expect("request serializes"))))
}
