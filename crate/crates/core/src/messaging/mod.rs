//! Listing-scoped message threads and outbound notifications.

mod notify;
mod thread;

use thiserror::Error;

use crate::ids::{ListingId, MessageId, ThreadId};

pub use notify::{
    render_notification, scan_outbox, FlushOutcome, NotificationKind, NotificationQueue, OutboundNotification,
};
pub use thread::{
    folder_messages, unread_in, Folder, Message, MessageThread, MessageView, Party, MAX_BODY_CHARS,
};

#[derive(Debug, Error)]
pub enum MessagingError {
    #[error("listing {0} has been deleted; no further messages can be sent")]
    ListingDeleted(ListingId),
    #[error("listing {0} not found")]
    ListingNotFound(ListingId),
    #[error("thread {0} not found")]
    ThreadNotFound(ThreadId),
    #[error("message {0} not found")]
    MessageNotFound(MessageId),
    #[error("not permitted to message about this listing")]
    Denied,
    #[error("owners cannot start a conversation on their own listing")]
    SelfMessage,
    #[error("message body is empty")]
    EmptyBody,
    #[error("message body exceeds {MAX_BODY_CHARS} characters")]
    BodyTooLong,
    #[error("not a participant in this conversation")]
    NotParticipant,
    #[error("unknown folder {0:?}")]
    UnknownFolder(String),
    #[error("outbox is not writable: {0}")]
    OutboxUnwritable(#[source] std::io::Error),
}

impl MessagingError {
    pub fn code(&self) -> &'static str {
        match self {
            MessagingError::ListingDeleted(_) => "ListingDeleted",
            MessagingError::ListingNotFound(_) => "ListingNotFound",
            MessagingError::ThreadNotFound(_) => "ThreadNotFound",
            MessagingError::MessageNotFound(_) => "MessageNotFound",
            MessagingError::Denied => "Denied",
            MessagingError::SelfMessage => "SelfMessage",
            MessagingError::EmptyBody => "EmptyBody",
            MessagingError::BodyTooLong => "BodyTooLong",
            MessagingError::NotParticipant => "NotParticipant",
            MessagingError::UnknownFolder(_) => "UnknownFolder",
            MessagingError::OutboxUnwritable(_) => "OutboxUnwritable",
        }
    }
}

/// Trims nothing; rejects blank and oversized bodies.
pub fn check_body(body: &str) -> Result<(), MessagingError> {
    if body.trim().is_empty() {
        return Err(MessagingError::EmptyBody);
    }
    if body.chars().count() > MAX_BODY_CHARS {
        return Err(MessagingError::BodyTooLong);
    }
    Ok(())
}
