//! Mailbox access. One contract ([`MailStore`]) with three realizations: an
//! IMAP4rev1 client over TLS, a maildir-style fixture directory, and the same
//! client in plaintext against a loopback test server.

mod fixture;
mod imap;
pub mod maildir;
mod server;
mod wire;

use std::fmt;
use std::net::{IpAddr, ToSocketAddrs};
use std::path::PathBuf;
use std::time::Duration;

use email_assistant_core::RawMessage;
use serde::{Deserialize, Serialize};

pub use fixture::FixtureStore;
pub use imap::{ImapSession, Trace};
pub use server::{LoopbackServer, ServerOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreMode {
    ImapTls,
    Fixture,
    LoopbackPlain,
}

/// Connection parameters: server, port, folder, timeout and batch size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreConfig {
    pub server: String,
    pub port: u16,
    pub mail_folder: String,
    pub timeout_ms: u64,
    /// Most messages taken per run, newest first.
    pub top: usize,
    pub mode: StoreMode,
    /// Root of the fixture tree in fixture mode.
    pub fixture_root: Option<PathBuf>,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            server: "imap.gmail.com".into(),
            port: 993,
            mail_folder: "Inbox".into(),
            timeout_ms: 30_000,
            top: 9,
            mode: StoreMode::ImapTls,
            fixture_root: None,
        }
    }
}

impl StoreConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.port == 0 {
            return Err("store.port must be in 1..=65535".into());
        }
        if self.timeout_ms == 0 {
            return Err("store.timeout_ms must be positive".into());
        }
        if self.mail_folder.trim().is_empty() {
            return Err("store.mail_folder must not be empty".into());
        }
        match self.mode {
            StoreMode::Fixture if self.fixture_root.is_none() => {
                Err("fixture mode needs store.fixture_root (or --fixture)".into())
            }
            StoreMode::ImapTls | StoreMode::LoopbackPlain if self.server.trim().is_empty() => {
                Err("store.server must not be empty".into())
            }
            _ => Ok(()),
        }
    }
}

/// Password wrapper that never prints its contents.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(<redacted>)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Credentials {
    pub email: String,
    pub password: Secret,
}

impl Credentials {
    pub fn new(email: impl Into<String>, password: impl Into<String>) -> Self {
        Self {
            email: email.into(),
            password: Secret::new(password),
        }
    }
}

/// A message's identity within one folder of one session.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MessageHandle {
    pub store_uid: String,
    pub folder: String,
    pub seen: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    MoveToLabel,
    MoveToTrash,
    MarkSeen,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreAction {
    pub kind: ActionKind,
    pub target: Option<String>,
    pub handle: MessageHandle,
}

impl StoreAction {
    pub fn move_to_label(handle: MessageHandle, label: &str) -> Self {
        Self {
            kind: ActionKind::MoveToLabel,
            target: Some(label.to_owned()),
            handle,
        }
    }

    pub fn move_to_trash(handle: MessageHandle, trash_folder: &str) -> Self {
        Self {
            kind: ActionKind::MoveToTrash,
            target: Some(trash_folder.to_owned()),
            handle,
        }
    }

    pub fn mark_seen(handle: MessageHandle) -> Self {
        Self {
            kind: ActionKind::MarkSeen,
            target: None,
            handle,
        }
    }

    /// Destination folder of a move; rejects moves without one.
    pub(crate) fn destination(&self) -> Result<&str, StoreError> {
        match self.target.as_deref().map(str::trim) {
            Some(t) if !t.is_empty() => Ok(t),
            _ => Err(StoreError::ActionFailure(format!(
                "{:?} needs a target folder",
                self.kind
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FolderSummary {
    pub total: usize,
    pub unseen: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("timed out connecting to {0}")]
    ConnectTimeout(String),
    #[error("cannot connect to {addr}: {source}")]
    ConnectFailure {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("TLS failure: {0}")]
    TlsFailure(String),
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("no such folder {0:?}")]
    NoSuchFolder(String),
    #[error("fetch failed: {0}")]
    FetchFailure(String),
    #[error("action failed: {0}")]
    ActionFailure(String),
    #[error("refusing plaintext IMAP to non-loopback host {0:?}")]
    InsecureTransport(String),
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The mailbox operations the triage loop needs.
pub trait MailStore {
    fn select_folder(&mut self, folder: &str) -> Result<FolderSummary, StoreError>;

    /// Up to `top` unseen messages of the selected folder, newest first.
    /// Fetching never marks anything seen.
    fn fetch_unseen_top(
        &mut self,
        top: usize,
    ) -> Result<Vec<(MessageHandle, RawMessage)>, StoreError>;

    fn apply_action(&mut self, action: &StoreAction) -> Result<(), StoreError>;

    fn logout(&mut self) -> Result<(), StoreError>;

    /// Protocol trace lines, when the realization keeps one.
    fn trace(&self) -> Option<&Trace> {
        None
    }
}

fn is_loopback_host(host: &str, port: u16) -> bool {
    if host.eq_ignore_ascii_case("localhost") {
        return true;
    }
    if let Ok(ip) = host.trim_matches(['[', ']']).parse::<IpAddr>() {
        return ip.is_loopback();
    }
    (host, port)
        .to_socket_addrs()
        .map(|mut addrs| addrs.all(|a| a.ip().is_loopback()))
        .unwrap_or(false)
}

/// Opens and authenticates a session for the configured mode.
///
/// Fixture mode ignores the credentials. Plaintext mode only talks to
/// loopback addresses.
pub fn connect_and_authenticate(
    cfg: &StoreConfig,
    creds: &Credentials,
) -> Result<Box<dyn MailStore>, StoreError> {
    match cfg.mode {
        StoreMode::Fixture => {
            let root = cfg
                .fixture_root
                .clone()
                .ok_or_else(|| StoreError::NoSuchFolder("<no fixture root>".into()))?;
            Ok(Box::new(FixtureStore::open(root)?))
        }
        StoreMode::LoopbackPlain => {
            if !is_loopback_host(&cfg.server, cfg.port) {
                return Err(StoreError::InsecureTransport(cfg.server.clone()));
            }
            Ok(Box::new(ImapSession::connect_plain(cfg, creds)?))
        }
        StoreMode::ImapTls => Ok(Box::new(ImapSession::connect_tls(cfg, creds)?)),
    }
}
