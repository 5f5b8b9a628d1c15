use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::MessagingError;
use crate::ids::{ListingId, MessageId, ThreadId, UserId};

pub const MAX_BODY_CHARS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Inquirer,
    Owner,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::Inquirer => Party::Owner,
            Party::Owner => Party::Inquirer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: MessageId,
    pub sender: Party,
    pub body: String,
    pub sent_at: DateTime<Utc>,
    pub read_by_recipient: bool,
    #[serde(default)]
    pub deleted_by: BTreeSet<Party>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageThread {
    pub id: ThreadId,
    pub listing_id: ListingId,
    pub inquirer_id: UserId,
    pub owner_id: UserId,
    /// Listing title when the thread was opened; never updated.
    pub subject: String,
    pub created_at: DateTime<Utc>,
    pub messages: Vec<Message>,
}

impl MessageThread {
    pub fn party_of(&self, user: UserId) -> Option<Party> {
        if user == self.inquirer_id {
            Some(Party::Inquirer)
        } else if user == self.owner_id {
            Some(Party::Owner)
        } else {
            None
        }
    }

    pub fn user_of(&self, party: Party) -> UserId {
        match party {
            Party::Inquirer => self.inquirer_id,
            Party::Owner => self.owner_id,
        }
    }

    pub fn message(&self, id: MessageId) -> Option<&Message> {
        self.messages.iter().find(|m| m.id == id)
    }

    pub fn message_mut(&mut self, id: MessageId) -> Option<&mut Message> {
        self.messages.iter_mut().find(|m| m.id == id)
    }

    /// Marks every message addressed to `party` as read. Returns whether
    /// anything changed.
    pub fn mark_read(&mut self, party: Party) -> bool {
        let mut changed = false;
        for m in self.messages.iter_mut().filter(|m| m.sender != party) {
            if !m.read_by_recipient {
                m.read_by_recipient = true;
                changed = true;
            }
        }
        changed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Folder {
    Inbox,
    Sent,
    Deleted,
}

impl Folder {
    pub const ALL: [Folder; 3] = [Folder::Inbox, Folder::Sent, Folder::Deleted];

    pub fn as_str(self) -> &'static str {
        match self {
            Folder::Inbox => "inbox",
            Folder::Sent => "sent",
            Folder::Deleted => "deleted",
        }
    }

    /// Whether `message` belongs in this folder for `party`.
    pub fn contains(self, party: Party, message: &Message) -> bool {
        let deleted = message.deleted_by.contains(&party);
        match self {
            Folder::Inbox => message.sender != party && !deleted,
            Folder::Sent => message.sender == party && !deleted,
            Folder::Deleted => deleted,
        }
    }
}

impl fmt::Display for Folder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Folder {
    type Err = MessagingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Folder::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| MessagingError::UnknownFolder(s.to_string()))
    }
}

/// One message as seen by a participant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageView {
    pub message_id: MessageId,
    pub thread_id: ThreadId,
    pub from_me: bool,
    pub body: String,
    pub sent_at: DateTime<Utc>,
    pub read: bool,
    pub deleted: bool,
}

impl MessageView {
    pub fn of(thread: &MessageThread, party: Party, m: &Message) -> Self {
        MessageView {
            message_id: m.id,
            thread_id: thread.id,
            from_me: m.sender == party,
            body: m.body.clone(),
            sent_at: m.sent_at,
            read: m.sender == party || m.read_by_recipient,
            deleted: m.deleted_by.contains(&party),
        }
    }
}

/// Messages of `thread` that `user` sees in `folder`, oldest first.
pub fn folder_messages(thread: &MessageThread, user: UserId, folder: Folder) -> Vec<MessageView> {
    let Some(party) = thread.party_of(user) else {
        return Vec::new();
    };
    thread
        .messages
        .iter()
        .filter(|m| folder.contains(party, m))
        .map(|m| MessageView::of(thread, party, m))
        .collect()
}

/// Unread messages addressed to `user` in `thread` that the user has not deleted.
pub fn unread_in(thread: &MessageThread, user: UserId) -> usize {
    let Some(party) = thread.party_of(user) else {
        return 0;
    };
    thread
        .messages
        .iter()
        .filter(|m| m.sender != party && !m.read_by_recipient && !m.deleted_by.contains(&party))
        .count()
}
