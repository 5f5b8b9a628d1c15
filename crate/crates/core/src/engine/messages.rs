use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Change, Marketplace, Result};
use crate::identity::{access_level, IdentityError};
use crate::ids::{ListingId, MessageId, ThreadId, UserId};
use crate::marketplace::{EdgeKind, GraphEdge, ListingStatus};
use crate::messaging::{
    check_body, folder_messages, unread_in, Folder, Message, MessageThread, MessageView,
    MessagingError, NotificationKind, OutboundNotification, Party,
};

/// A thread as listed in one of a user's folders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FolderThread {
    pub thread_id: ThreadId,
    pub listing_id: ListingId,
    pub subject: String,
    /// Username of the other participant.
    pub counterpart: String,
    pub unread: usize,
    pub messages: Vec<MessageView>,
}

impl Marketplace {
    /// Sends `body` about a listing from a non-owner, opening the
    /// conversation on first contact.
    pub fn send_message(&mut self, sender: UserId, listing_id: ListingId, body: &str) -> Result<Message> {
        let user = self.users.get(&sender).ok_or(IdentityError::UnknownUser)?;
        if !user.active {
            return Err(IdentityError::AccountInactive.into());
        }
        let listing = self
            .listings
            .get(&listing_id)
            .ok_or(MessagingError::ListingNotFound(listing_id))?;
        if listing.owner_id == sender {
            return Err(MessagingError::SelfMessage.into());
        }
        if let Some(&thread_id) = self.thread_by_key.get(&(listing_id, sender)) {
            return self.reply(sender, thread_id, body);
        }
        match listing.status {
            ListingStatus::Deleted => return Err(MessagingError::ListingDeleted(listing_id).into()),
            ListingStatus::Hidden => return Err(MessagingError::ListingNotFound(listing_id).into()),
            ListingStatus::Sold => return Err(MessagingError::Denied.into()),
            ListingStatus::Active => {}
        }
        let owner = &self.users[&listing.owner_id];
        if access_level(crate::identity::Viewer::User(user), listing, owner).is_none() {
            return Err(MessagingError::Denied.into());
        }
        check_body(body)?;

        let thread = MessageThread {
            id: ThreadId(self.ids.threads.next()),
            listing_id,
            inquirer_id: sender,
            owner_id: listing.owner_id,
            subject: listing.title.clone(),
            created_at: self.now(),
            messages: Vec::new(),
        };
        if self.graph.edge(sender, listing_id).is_none() {
            self.graph.upsert(GraphEdge {
                user_id: sender,
                listing_id,
                kind: EdgeKind::Dashed,
                message_count: 0,
            });
        }
        self.thread_by_key.insert((listing_id, sender), thread.id);
        let thread_id = thread.id;
        self.threads.insert(thread_id, thread);
        Ok(self.append(thread_id, Party::Inquirer, body))
    }

    /// Adds a message to an existing conversation from either participant.
    pub fn reply(&mut self, sender: UserId, thread_id: ThreadId, body: &str) -> Result<Message> {
        let thread = self
            .threads
            .get(&thread_id)
            .ok_or(MessagingError::ThreadNotFound(thread_id))?;
        let party = thread.party_of(sender).ok_or(MessagingError::NotParticipant)?;
        if self.users.get(&sender).is_none_or(|u| !u.active) {
            return Err(IdentityError::AccountInactive.into());
        }
        let deleted = self
            .listings
            .get(&thread.listing_id)
            .is_none_or(|l| l.status == ListingStatus::Deleted);
        if deleted {
            return Err(MessagingError::ListingDeleted(thread.listing_id).into());
        }
        check_body(body)?;
        Ok(self.append(thread_id, party, body))
    }

    /// The edge carrying a thread's message count: the inquirer's while it is
    /// dashed, otherwise the original owner's after a sale to the inquirer.
    pub(super) fn counting_edge(&self, thread: &MessageThread) -> Option<(UserId, ListingId)> {
        [thread.inquirer_id, thread.owner_id]
            .into_iter()
            .find(|u| {
                self.graph
                    .edge(*u, thread.listing_id)
                    .is_some_and(|e| e.kind == EdgeKind::Dashed)
            })
            .map(|u| (u, thread.listing_id))
    }

    fn append(&mut self, thread_id: ThreadId, sender: Party, body: &str) -> Message {
        let now = self.now();
        let message = Message {
            id: MessageId(self.ids.messages.next()),
            sender,
            body: body.to_string(),
            sent_at: now,
            read_by_recipient: false,
            deleted_by: BTreeSet::new(),
        };
        let thread = self.threads.get_mut(&thread_id).expect("caller checked thread");
        thread.messages.push(message.clone());
        let thread = thread.clone();
        self.message_thread.insert(message.id, thread_id);

        let edge = self.counting_edge(&thread).and_then(|(u, l)| {
            let mut edge = self.graph.edge(u, l)?.clone();
            edge.message_count += 1;
            self.graph.upsert(edge.clone());
            Some(edge)
        });

        let recipient = &self.users[&thread.user_of(sender.other())];
        let slot = format!("msg:{}:{}", recipient.id, thread.id);
        let notification = OutboundNotification {
            recipient_email: recipient.email.clone(),
            kind: NotificationKind::NewMessage,
            subject: "You have a new message".into(),
            link: format!("{}/messages/inbox", self.config.base_url),
            dedup_key: format!("{slot}:{}", message.id),
            created_at: now,
        };
        self.notifications.enqueue(slot.clone(), notification.clone());

        self.push(Change::Thread(thread));
        if let Some(edge) = edge {
            self.push(Change::Edge(edge));
        }
        self.push(Change::NotificationQueued { slot, notification });
        message
    }

    /// Threads with messages in `folder` for `user`, most recent first. When
    /// `open` names a thread, only that thread is returned and its incoming
    /// messages are marked read.
    pub fn folder(&mut self, user: UserId, folder: Folder, open: Option<ThreadId>) -> Result<Vec<FolderThread>> {
        if !self.users.contains_key(&user) {
            return Err(IdentityError::UnknownUser.into());
        }
        if let Some(id) = open {
            let thread = self.threads.get_mut(&id).ok_or(MessagingError::ThreadNotFound(id))?;
            let party = thread.party_of(user).ok_or(MessagingError::NotParticipant)?;
            if thread.mark_read(party) {
                let thread = thread.clone();
                self.push(Change::Thread(thread));
            }
        }
        let mut out: Vec<FolderThread> = self
            .threads
            .values()
            .filter(|t| open.is_none_or(|id| id == t.id))
            .filter_map(|t| {
                let party = t.party_of(user)?;
                let messages = folder_messages(t, user, folder);
                if messages.is_empty() && open.is_none() {
                    return None;
                }
                Some(FolderThread {
                    thread_id: t.id,
                    listing_id: t.listing_id,
                    subject: t.subject.clone(),
                    counterpart: self.users[&t.user_of(party.other())].username.clone(),
                    unread: unread_in(t, user),
                    messages,
                })
            })
            .collect();
        out.sort_by(|a, b| {
            let latest = |t: &FolderThread| t.messages.iter().map(|m| (m.sent_at, m.message_id)).max();
            latest(b).cmp(&latest(a)).then(b.thread_id.cmp(&a.thread_id))
        });
        Ok(out)
    }

    /// Moves a message to `user`'s deleted folder. Repeating it changes nothing.
    pub fn delete_message(&mut self, user: UserId, message_id: MessageId) -> Result<MessageView> {
        let thread_id = *self
            .message_thread
            .get(&message_id)
            .ok_or(MessagingError::MessageNotFound(message_id))?;
        let thread = self.threads.get_mut(&thread_id).expect("index is coherent");
        let party = thread.party_of(user).ok_or(MessagingError::NotParticipant)?;
        let message = thread.message_mut(message_id).expect("index is coherent");
        let changed = message.deleted_by.insert(party);
        let view = MessageView::of(thread, party, thread.message(message_id).expect("present"));
        if changed {
            let thread = thread.clone();
            self.push(Change::Thread(thread));
        }
        Ok(view)
    }

    /// Unread messages addressed to `user` that the user has not deleted.
    pub fn unread_count(&self, user: UserId) -> usize {
        self.threads.values().map(|t| unread_in(t, user)).sum()
    }

    /// Writes queued notifications to `outbox`. Notifications written before a
    /// failure stay delivered; the rest remain queued.
    pub fn flush_notifications(&mut self, outbox: &Path) -> Result<Vec<OutboundNotification>> {
        let now = self.now();
        let outcome = self.notifications.flush(outbox, now);
        let mut delivered = Vec::with_capacity(outcome.delivered.len());
        for (slot, notification) in outcome.delivered {
            self.push(Change::NotificationDelivered {
                slot,
                key: notification.dedup_key.clone(),
            });
            delivered.push(notification);
        }
        match outcome.error {
            Some(e) => Err(e.into()),
            None => Ok(delivered),
        }
    }

    /// Records keys already present in the outbox so they are not sent twice.
    pub fn mark_delivered(&mut self, keys: impl IntoIterator<Item = String>) {
        self.notifications.mark_delivered(keys);
    }
}
