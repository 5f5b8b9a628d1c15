use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::MessagingError;

const DEDUP_HEADER: &str = "X-Dedup-Key";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotificationKind {
    NewMessage,
    Verification,
}

/// An email waiting for the outbox. Carries a link only, never message text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboundNotification {
    pub recipient_email: String,
    pub kind: NotificationKind,
    pub subject: String,
    pub link: String,
    pub dedup_key: String,
    pub created_at: DateTime<Utc>,
}

/// Pending notifications keyed by slot. A later notification for the same
/// slot (same recipient and thread) replaces the earlier one.
#[derive(Debug, Clone, Default)]
pub struct NotificationQueue {
    pending: BTreeMap<String, OutboundNotification>,
    delivered: HashSet<String>,
    seq: u64,
}

/// What a flush managed to write before stopping.
#[derive(Debug, Default)]
pub struct FlushOutcome {
    pub delivered: Vec<(String, OutboundNotification)>,
    pub error: Option<MessagingError>,
}

impl NotificationQueue {
    pub fn enqueue(&mut self, slot: String, notification: OutboundNotification) {
        self.pending.insert(slot, notification);
    }

    /// Drops `slot` if it still holds `dedup_key`.
    pub fn settle(&mut self, slot: &str, dedup_key: &str) {
        if self.pending.get(slot).is_some_and(|n| n.dedup_key == dedup_key) {
            self.pending.remove(slot);
        }
        self.delivered.insert(dedup_key.to_string());
    }

    pub fn mark_delivered(&mut self, keys: impl IntoIterator<Item = String>) {
        self.delivered.extend(keys);
    }

    pub fn pending(&self) -> impl Iterator<Item = (&str, &OutboundNotification)> {
        self.pending.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Writes each pending notification to `outbox` as one file. Keys already
    /// present in the outbox are settled without writing again. Stops at the
    /// first write failure, leaving the rest queued.
    pub fn flush(&mut self, outbox: &Path, now: DateTime<Utc>) -> FlushOutcome {
        let mut outcome = FlushOutcome::default();
        if self.pending.is_empty() {
            return outcome;
        }
        if let Err(e) = fs::create_dir_all(outbox) {
            outcome.error = Some(MessagingError::OutboxUnwritable(e));
            return outcome;
        }
        let slots: Vec<String> = self.pending.keys().cloned().collect();
        for slot in slots {
            let notification = self.pending[&slot].clone();
            if !self.delivered.contains(&notification.dedup_key) {
                if let Err(e) = self.write_file(outbox, &notification, now) {
                    outcome.error = Some(MessagingError::OutboxUnwritable(e));
                    break;
                }
            }
            self.settle(&slot, &notification.dedup_key);
            outcome.delivered.push((slot, notification));
        }
        outcome
    }

    fn write_file(&mut self, outbox: &Path, n: &OutboundNotification, now: DateTime<Utc>) -> io::Result<()> {
        let text = render_notification(n);
        loop {
            self.seq += 1;
            let name = format!("{}-{}.eml", now.timestamp(), self.seq);
            let target = outbox.join(&name);
            if target.exists() {
                continue;
            }
            let tmp = outbox.join(format!(".{name}.tmp"));
            let mut file = fs::File::create(&tmp)?;
            file.write_all(text.as_bytes())?;
            file.sync_all()?;
            drop(file);
            return fs::rename(&tmp, &target);
        }
    }
}

/// RFC 5322 style plain-text email.
pub fn render_notification(n: &OutboundNotification) -> String {
    let intro = match n.kind {
        NotificationKind::NewMessage => {
            "You have a new message. Sign in to read and reply to it:"
        }
        NotificationKind::Verification => "Confirm your email address by opening this link:",
    };
    format!(
        "To: {to}\r\nSubject: {subject}\r\nDate: {date}\r\n{DEDUP_HEADER}: {key}\r\nMIME-Version: 1.0\r\nContent-Type: text/plain; charset=utf-8\r\n\r\n{intro}\r\n{link}\r\n",
        to = n.recipient_email,
        subject = n.subject,
        date = n.created_at.to_rfc2822(),
        key = n.dedup_key,
        link = n.link,
    )
}

/// Dedup keys of every notification already in `outbox`.
pub fn scan_outbox(outbox: &Path) -> io::Result<HashSet<String>> {
    let mut keys = HashSet::new();
    let entries = match fs::read_dir(outbox) {
        Ok(entries) => entries,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(keys),
        Err(e) => return Err(e),
    };
    for entry in entries {
        let path = entry?.path();
        if path.extension().is_none_or(|e| e != "eml") {
            continue;
        }
        let text = fs::read_to_string(&path)?;
        let key = text
            .lines()
            .take_while(|l| !l.is_empty())
            .find_map(|l| l.strip_prefix(DEDUP_HEADER)?.strip_prefix(':'))
            .map(str::trim);
        if let Some(key) = key {
            keys.insert(key.to_string());
        }
    }
    Ok(keys)
}
