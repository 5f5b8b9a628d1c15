//! HTTP service, persistence and administration for the classifieds
//! marketplace.
//!
//! [`Service`] wraps a [`classifieds_core::Marketplace`] and journals every
//! change through [`store::Store`] before answering. [`api::router`] exposes
//! it as JSON over HTTP and [`server::serve`] runs it.

pub mod admin;
pub mod api;
pub mod config;
pub mod server;
pub mod service;
pub mod session;
pub mod store;

pub use config::{ConfigError, ServiceConfig};
pub use service::{
    AccountView, LoginGrant, OpenOptions, SchemaView, SearchRequest, Service, ServiceError, StartupError,
};
