use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Change, Marketplace, Result};
use crate::geo::GeoPoint;
use crate::identity::{
    token_digest, valid_username, IdentityError, PasswordDigest, Preferences, User,
    VerificationToken, MIN_PASSWORD_CHARS,
};
use crate::ids::{NetworkId, UserId};
use crate::messaging::{NotificationKind, OutboundNotification};
use crate::schema::{Decision, FieldRequest, NewFieldRequest, SchemaEntry, SchemaError};

const MAX_FULL_NAME_CHARS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registration {
    pub email: String,
    pub username: String,
    pub password: String,
    #[serde(default)]
    pub full_name: Option<String>,
    #[serde(default)]
    pub home_location: Option<GeoPoint>,
}

/// A created but unverified account. The token is the only copy of the
/// secret; the store keeps a digest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingRegistration {
    pub user_id: UserId,
    pub token: String,
}

/// Partial settings change; `None` leaves a setting untouched.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SettingsUpdate {
    #[serde(default)]
    pub preferences: Option<Preferences>,
    /// `Some(None)` clears the home location.
    #[serde(default, with = "double_option")]
    pub home_location: Option<Option<GeoPoint>>,
    #[serde(default, with = "double_option")]
    pub full_name: Option<Option<String>>,
}

mod double_option {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T: Serialize, S: Serializer>(v: &Option<Option<T>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(inner) => inner.serialize(s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, T: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<Option<Option<T>>, D::Error> {
        Option::<T>::deserialize(d).map(Some)
    }
}

fn check_full_name(name: &Option<String>) -> Result<Option<String>, IdentityError> {
    let name = name.as_deref().map(str::trim).filter(|n| !n.is_empty());
    match name {
        Some(n) if n.chars().count() > MAX_FULL_NAME_CHARS || n.chars().any(char::is_control) => {
            Err(IdentityError::InvalidFullName)
        }
        other => Ok(other.map(str::to_string)),
    }
}

impl Marketplace {
    /// Creates an inactive account and queues its verification email.
    pub fn register(&mut self, reg: Registration) -> Result<PendingRegistration> {
        if !valid_username(&reg.username) {
            return Err(IdentityError::InvalidUsername.into());
        }
        if reg.password.chars().count() < MIN_PASSWORD_CHARS {
            return Err(IdentityError::WeakPassword.into());
        }
        let email = reg.email.trim().to_ascii_lowercase();
        let network_id = self.networks.network_of(&email)?;
        if self.by_email.contains_key(&email) {
            return Err(IdentityError::EmailAlreadyRegistered.into());
        }
        if self.by_username.contains_key(&reg.username) {
            return Err(IdentityError::UsernameTaken.into());
        }
        let full_name = check_full_name(&reg.full_name)?;

        let now = self.now();
        let id = UserId(self.ids.users.next());
        let salt: [u8; 16] = self.rng.random();
        let user = User {
            id,
            username: reg.username,
            email: email.clone(),
            network_id,
            password: PasswordDigest::new(&reg.password, salt, self.config.password_iterations),
            full_name,
            home_location: reg.home_location,
            preferences: Preferences::default(),
            active: false,
            created_at: now,
        };
        let token_bytes: [u8; 16] = self.rng.random();
        let token = hex::encode(token_bytes);
        let record = VerificationToken {
            digest: token_digest(&token),
            user_id: id,
            expires_at: now + self.config.verification_ttl,
            used: false,
        };
        let slot = format!("verify:{id}");
        let notification = OutboundNotification {
            recipient_email: email.clone(),
            kind: NotificationKind::Verification,
            subject: "Confirm your email address".into(),
            link: format!("{}/verify/{token}", self.config.base_url),
            dedup_key: format!("{slot}:{}", &record.digest[..16]),
            created_at: now,
        };

        self.by_email.insert(email, id);
        self.by_username.insert(user.username.clone(), id);
        self.users.insert(id, user.clone());
        self.tokens.insert(record.digest.clone(), record.clone());
        self.notifications.enqueue(slot.clone(), notification.clone());
        self.push(Change::User(user));
        self.push(Change::Token(record));
        self.push(Change::NotificationQueued { slot, notification });
        Ok(PendingRegistration { user_id: id, token })
    }

    /// Consumes a verification token and activates its account.
    pub fn verify(&mut self, token: &str) -> Result<User> {
        let digest = token_digest(token.trim());
        let now = self.now();
        let record = self.tokens.get_mut(&digest).ok_or(IdentityError::TokenUnknown)?;
        if record.used {
            return Err(IdentityError::TokenAlreadyUsed.into());
        }
        if now > record.expires_at {
            return Err(IdentityError::TokenExpired.into());
        }
        record.used = true;
        let record = record.clone();
        let user = self
            .users
            .get_mut(&record.user_id)
            .ok_or(IdentityError::UnknownUser)?;
        user.active = true;
        let user = user.clone();
        self.push(Change::Token(record));
        self.push(Change::User(user.clone()));
        // an unsent confirmation mail is pointless once the account is active
        let slot = format!("verify:{}", user.id);
        let queued = self.notifications.pending().find(|(s, _)| *s == slot).map(|(_, n)| n.dedup_key.clone());
        if let Some(key) = queued {
            self.notifications.settle(&slot, &key);
            self.push(Change::NotificationDelivered { slot, key });
        }
        Ok(user)
    }

    /// Checks a username or email and password. Unknown logins and wrong
    /// passwords are indistinguishable.
    pub fn authenticate(&self, login: &str, password: &str) -> Result<&User> {
        let login = login.trim();
        let id = self
            .by_username
            .get(login)
            .or_else(|| self.by_email.get(&login.to_ascii_lowercase()))
            .ok_or(IdentityError::InvalidCredentials)?;
        let user = &self.users[id];
        if !user.password.verify(password) {
            return Err(IdentityError::InvalidCredentials.into());
        }
        if !user.active {
            return Err(IdentityError::AccountInactive.into());
        }
        Ok(user)
    }

    pub fn update_settings(&mut self, user_id: UserId, update: SettingsUpdate) -> Result<User> {
        if let Some(prefs) = &update.preferences {
            if prefs.radius_km.is_some_and(|r| !(r.is_finite() && r > 0.0)) {
                return Err(IdentityError::InvalidPreferences("radius_km must be positive".into()).into());
            }
            if let Some(unknown) = prefs.networks.iter().find(|n| self.networks.get(n).is_none()) {
                return Err(IdentityError::InvalidPreferences(format!("unknown network {unknown}")).into());
            }
        }
        let full_name = update.full_name.as_ref().map(check_full_name).transpose()?;
        let user = self.users.get_mut(&user_id).ok_or(IdentityError::UnknownUser)?;
        if let Some(prefs) = update.preferences {
            user.preferences = prefs;
        }
        if let Some(home) = update.home_location {
            user.home_location = home;
        }
        if let Some(name) = full_name {
            user.full_name = name;
        }
        let user = user.clone();
        self.push(Change::User(user.clone()));
        Ok(user)
    }

    /// Number of active users per network.
    pub fn network_members(&self) -> std::collections::BTreeMap<NetworkId, usize> {
        let mut counts = std::collections::BTreeMap::new();
        for user in self.users.values().filter(|u| u.active) {
            *counts.entry(user.network_id.clone()).or_insert(0) += 1;
        }
        counts
    }

    pub fn submit_field_request(&mut self, new: NewFieldRequest) -> Result<FieldRequest> {
        let (request, opened) = self.schemas.submit(new)?;
        if let Some(entry) = opened {
            self.push(Change::Schema(entry));
        }
        self.push(Change::FieldRequest(request.clone()));
        Ok(request)
    }

    /// Approves or rejects a pending request. An approval that would duplicate
    /// a label is recorded as a rejection and reported as an error.
    pub fn decide_field_request(
        &mut self,
        id: crate::ids::RequestId,
        decision: Decision,
    ) -> Result<(FieldRequest, SchemaEntry)> {
        match self.schemas.decide(id, decision) {
            Ok((request, entry)) => {
                self.push(Change::FieldRequest(request.clone()));
                self.push(Change::Schema(entry.clone()));
                Ok((request, entry))
            }
            Err(err @ SchemaError::DuplicateFieldLabel(_)) => {
                if let Some(request) = self.schemas.request(id) {
                    self.push(Change::FieldRequest(request.clone()));
                }
                Err(err.into())
            }
            Err(err) => Err(err.into()),
        }
    }
}
