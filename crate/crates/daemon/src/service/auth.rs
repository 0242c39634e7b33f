//! Credentials and session tokens.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use rand::Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;

use crate::clock::Clock;

pub const SESSION_TTL: Duration = Duration::from_secs(30 * 60);
const SALT_LEN: usize = 16;

/// A configured user: `username = <salt hex>:<sha256(salt || password) hex>`.
#[derive(Clone, PartialEq, Eq)]
pub struct Credential {
    pub username: String,
    salt: Vec<u8>,
    digest: [u8; 32],
}

impl std::fmt::Debug for Credential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Credential").field("username", &self.username).finish_non_exhaustive()
    }
}

fn digest(salt: &[u8], password: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(salt);
    h.update(password.as_bytes());
    h.finalize().into()
}

impl Credential {
    pub fn from_stored(username: &str, stored: &str) -> Result<Self, String> {
        let (salt, hash) = stored
            .split_once(':')
            .ok_or_else(|| format!("user `{username}`: expected `<salt hex>:<hash hex>`"))?;
        let salt = hex::decode(salt).map_err(|e| format!("user `{username}`: bad salt: {e}"))?;
        let digest: [u8; 32] = hex::decode(hash)
            .ok()
            .and_then(|d| d.try_into().ok())
            .ok_or_else(|| format!("user `{username}`: hash must be 64 hex digits"))?;
        Ok(Self {
            username: username.to_string(),
            salt,
            digest,
        })
    }

    /// Hashes `password` under a fresh random salt.
    pub fn hashed(username: &str, password: &str) -> Self {
        let mut salt = vec![0u8; SALT_LEN];
        rand::rng().fill(&mut salt[..]);
        Self {
            username: username.to_string(),
            digest: digest(&salt, password),
            salt,
        }
    }

    /// The `<salt>:<hash>` form stored in the config file.
    pub fn stored(&self) -> String {
        format!("{}:{}", hex::encode(&self.salt), hex::encode(self.digest))
    }

    pub fn verify(&self, password: &str) -> bool {
        digest(&self.salt, password).ct_eq(&self.digest).into()
    }
}

/// Checks passwords without revealing which usernames exist: an unknown
/// user still costs one hash and one comparison.
pub struct Authenticator {
    users: Vec<Credential>,
    decoy: Credential,
}

impl Authenticator {
    pub fn new(users: Vec<Credential>) -> Self {
        Self {
            users,
            decoy: Credential::hashed("", "decoy"),
        }
    }

    pub fn verify(&self, username: &str, password: &str) -> bool {
        let mut matched = false;
        let mut known = false;
        for user in &self.users {
            let same_name: bool = user.username.as_bytes().ct_eq(username.as_bytes()).into();
            if same_name {
                known = true;
                matched = user.verify(password);
            }
        }
        if !known {
            let _ = self.decoy.verify(password);
        }
        matched
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Session {
    pub token: String,
    pub username: String,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

/// Live sessions. Expiry slides forward on every successful use.
pub struct SessionStore {
    sessions: Mutex<HashMap<String, Session>>,
    ttl: chrono::Duration,
    clock: Arc<dyn Clock>,
}

impl SessionStore {
    pub fn new(ttl: Duration, clock: Arc<dyn Clock>) -> Self {
        Self {
            sessions: Mutex::new(HashMap::new()),
            ttl: chrono::Duration::from_std(ttl).expect("session TTL fits chrono range"),
            clock,
        }
    }

    /// 128 random bits as 32 lowercase hex digits.
    fn new_token() -> String {
        let bytes: [u8; 16] = rand::rng().random();
        hex::encode(bytes)
    }

    pub fn issue(&self, username: &str) -> Session {
        let now = self.clock.now();
        let mut sessions = self.sessions.lock().unwrap();
        sessions.retain(|_, s| s.expires_at > now);
        let session = loop {
            let token = Self::new_token();
            if !sessions.contains_key(&token) {
                break Session {
                    token,
                    username: username.to_string(),
                    issued_at: now,
                    expires_at: now + self.ttl,
                };
            }
        };
        sessions.insert(session.token.clone(), session.clone());
        session
    }

    /// Returns the renewed session, or `None` for unknown and expired tokens.
    pub fn validate(&self, token: &str) -> Option<Session> {
        let now = self.clock.now();
        let mut sessions = self.sessions.lock().unwrap();
        let session = sessions.get_mut(token)?;
        if session.expires_at <= now {
            sessions.remove(token);
            return None;
        }
        session.expires_at = now + self.ttl;
        Some(session.clone())
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
