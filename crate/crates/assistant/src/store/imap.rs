//! IMAP4rev1 client subset: LOGIN, CAPABILITY, SELECT, UID SEARCH, UID FETCH,
//! UID STORE, UID MOVE (or COPY + STORE \Deleted + EXPUNGE), CREATE, LOGOUT.

use std::io::{self, BufReader, Read, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use email_assistant_core::{peek_date, RawMessage};
use rustls::pki_types::ServerName;

use super::maildir::newest_first;
use super::wire::{self, Encoded, Line, Tok};
use super::{
    ActionKind, Credentials, FolderSummary, MailStore, MessageHandle, StoreAction, StoreConfig,
    StoreError,
};

pub trait Stream: Read + Write + Send {}
impl<T: Read + Write + Send> Stream for T {}

/// Client/server exchange as text lines. Passwords never enter it: LOGIN
/// arguments are replaced before recording and every line is scrubbed again
/// on the way in.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    lines: Vec<String>,
    scrub: Option<String>,
}

impl Trace {
    fn push(&mut self, dir: &str, text: &str) {
        let mut line = format!("{dir} {text}");
        if let Some(s) = self.scrub.as_deref().filter(|s| !s.is_empty()) {
            line = line.replace(s, "<redacted>");
        }
        log::debug!("imap {line}");
        self.lines.push(line);
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn to_text(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Ok,
    No,
    Bad,
}

/// Tagged completion plus the untagged responses that preceded it.
#[derive(Debug)]
struct Done {
    status: Status,
    code: Option<String>,
    text: String,
    untagged: Vec<Line>,
}

impl Done {
    fn describe(&self) -> String {
        match &self.code {
            Some(c) => format!("[{c}] {}", self.text),
            None => self.text.clone(),
        }
    }

    fn has_code(&self, code: &str) -> bool {
        self.code
            .as_deref()
            .and_then(|c| c.split_whitespace().next())
            .is_some_and(|c| c.eq_ignore_ascii_case(code))
    }
}

enum Arg<'a> {
    Raw(&'a str),
    Str(&'a str),
    Secret(&'a str),
}

/// Splits `OK [CODE args] text` into status, code and text.
fn parse_status(rest: &str) -> Option<(Status, Option<String>, String)> {
    let (word, tail) = rest.split_once(' ').unwrap_or((rest, ""));
    let status = match word.to_ascii_uppercase().as_str() {
        "OK" | "PREAUTH" => Status::Ok,
        "NO" | "BYE" => Status::No,
        "BAD" => Status::Bad,
        _ => return None,
    };
    let tail = tail.trim_start();
    if let Some(inner) = tail.strip_prefix('[') {
        if let Some(end) = inner.find(']') {
            return Some((
                status,
                Some(inner[..end].to_owned()),
                inner[end + 1..].trim().to_owned(),
            ));
        }
    }
    Some((status, None, tail.to_owned()))
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(
        e.kind(),
        io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock
    )
}

fn parse_internaldate(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_str(s.trim(), "%d-%b-%Y %H:%M:%S %z")
        .ok()
        .map(|d| d.with_timezone(&Utc))
}

#[derive(Debug, Default)]
struct FetchItem {
    uid: Option<u32>,
    internal_date: Option<DateTime<Utc>>,
    body: Option<Vec<u8>>,
}

fn parse_fetch(line: &Line) -> Option<FetchItem> {
    let toks = line.tokens().ok()?;
    if toks.len() < 4 || !toks[0].is_atom("*") || !toks[2].is_atom("FETCH") {
        return None;
    }
    let items = toks[3].list()?;
    let mut out = FetchItem::default();
    for pair in items.chunks(2) {
        let [key, value] = pair else { break };
        let Some(k) = key.atom() else { continue };
        let k = k.to_ascii_uppercase();
        if k == "UID" {
            out.uid = value.atom().and_then(|v| v.parse().ok());
        } else if k == "INTERNALDATE" {
            out.internal_date = value.text().as_deref().and_then(parse_internaldate);
        } else if k.starts_with("BODY[") || k == "RFC822" {
            if let Tok::Str(b) = value {
                out.body = Some(b.clone());
            }
        }
    }
    Some(out)
}

fn parse_search(lines: &[Line]) -> Vec<u32> {
    let mut out = Vec::new();
    for l in lines {
        let Ok(toks) = l.tokens() else { continue };
        if toks.len() >= 2 && toks[0].is_atom("*") && toks[1].is_atom("SEARCH") {
            out.extend(
                toks[2..]
                    .iter()
                    .filter_map(|t| t.atom()?.parse::<u32>().ok()),
            );
        }
    }
    out
}

fn parse_exists(lines: &[Line]) -> Option<usize> {
    lines.iter().find_map(|l| {
        let toks = l.tokens().ok()?;
        if toks.len() == 3 && toks[0].is_atom("*") && toks[2].is_atom("EXISTS") {
            toks[1].atom()?.parse().ok()
        } else {
            None
        }
    })
}

/// An authenticated IMAP session.
pub struct ImapSession {
    io: BufReader<Box<dyn Stream>>,
    next_tag: u32,
    caps: Vec<String>,
    selected: Option<String>,
    trace: Trace,
}

impl std::fmt::Debug for ImapSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImapSession")
            .field("caps", &self.caps)
            .field("selected", &self.selected)
            .finish_non_exhaustive()
    }
}

fn tcp_connect(cfg: &StoreConfig) -> Result<TcpStream, StoreError> {
    let label = format!("{}:{}", cfg.server, cfg.port);
    let addrs: Vec<SocketAddr> = (cfg.server.as_str(), cfg.port)
        .to_socket_addrs()
        .map_err(|source| StoreError::ConnectFailure {
            addr: label.clone(),
            source,
        })?
        .collect();
    let mut last = io::Error::new(io::ErrorKind::NotFound, "no addresses");
    for addr in addrs {
        match TcpStream::connect_timeout(&addr, cfg.timeout()) {
            Ok(s) => {
                s.set_read_timeout(Some(cfg.timeout()))?;
                s.set_write_timeout(Some(cfg.timeout()))?;
                s.set_nodelay(true)?;
                return Ok(s);
            }
            Err(e) => last = e,
        }
    }
    if is_timeout(&last) {
        Err(StoreError::ConnectTimeout(label))
    } else {
        Err(StoreError::ConnectFailure {
            addr: label,
            source: last,
        })
    }
}

fn tls_config() -> Result<rustls::ClientConfig, StoreError> {
    let roots = rustls::RootCertStore::from_iter(webpki_roots::TLS_SERVER_ROOTS.iter().cloned());
    Ok(rustls::ClientConfig::builder_with_provider(Arc::new(
        rustls::crypto::ring::default_provider(),
    ))
    .with_safe_default_protocol_versions()
    .map_err(|e| StoreError::TlsFailure(e.to_string()))?
    .with_root_certificates(roots)
    .with_no_client_auth())
}

impl ImapSession {
    /// TLS session (implicit TLS, as on port 993).
    pub fn connect_tls(cfg: &StoreConfig, creds: &Credentials) -> Result<Self, StoreError> {
        Self::connect_tls_with(cfg, creds, tls_config()?)
    }

    /// TLS session with a caller-supplied client configuration.
    pub fn connect_tls_with(
        cfg: &StoreConfig,
        creds: &Credentials,
        tls: rustls::ClientConfig,
    ) -> Result<Self, StoreError> {
        let mut tcp = tcp_connect(cfg)?;
        let name = ServerName::try_from(cfg.server.clone())
            .map_err(|e| StoreError::TlsFailure(format!("{}: {e}", cfg.server)))?;
        let mut conn = rustls::ClientConnection::new(Arc::new(tls), name)
            .map_err(|e| StoreError::TlsFailure(e.to_string()))?;
        while conn.is_handshaking() {
            conn.complete_io(&mut tcp).map_err(|e| {
                if is_timeout(&e) {
                    StoreError::ConnectTimeout(format!(
                        "{}:{} (TLS handshake)",
                        cfg.server, cfg.port
                    ))
                } else {
                    StoreError::TlsFailure(e.to_string())
                }
            })?;
        }
        Self::start(Box::new(rustls::StreamOwned::new(conn, tcp)), creds)
    }

    /// Plaintext session. Callers are responsible for only using this on
    /// loopback addresses.
    pub fn connect_plain(cfg: &StoreConfig, creds: &Credentials) -> Result<Self, StoreError> {
        let tcp = tcp_connect(cfg)?;
        Self::start(Box::new(tcp), creds)
    }

    /// Reads the greeting and logs in over an already open stream.
    pub fn start(stream: Box<dyn Stream>, creds: &Credentials) -> Result<Self, StoreError> {
        let mut s = Self {
            io: BufReader::new(stream),
            next_tag: 1,
            caps: Vec::new(),
            selected: None,
            trace: Trace {
                lines: Vec::new(),
                scrub: Some(creds.password.expose().to_owned()),
            },
        };
        let connect_err = |e: io::Error| {
            if is_timeout(&e) {
                StoreError::ConnectTimeout("waiting for greeting".into())
            } else {
                StoreError::ConnectFailure {
                    addr: "greeting".into(),
                    source: e,
                }
            }
        };
        let greeting = s.read_line().map_err(connect_err)?;
        let head = greeting.head();
        let status = head
            .strip_prefix("* ")
            .and_then(parse_status)
            .ok_or_else(|| StoreError::Protocol(format!("bad greeting {head:?}")))?;
        if status.0 != Status::Ok {
            return Err(StoreError::ConnectFailure {
                addr: "greeting".into(),
                source: io::Error::new(io::ErrorKind::ConnectionRefused, status.2),
            });
        }
        s.absorb_caps(status.1.as_deref());

        let done = s
            .run(&[
                Arg::Raw("LOGIN"),
                Arg::Str(&creds.email),
                Arg::Secret(creds.password.expose()),
            ])
            .map_err(|e| match e {
                StoreError::Io(e) if is_timeout(&e) => StoreError::ConnectTimeout("LOGIN".into()),
                other => other,
            })?;
        match done.status {
            Status::Ok => {}
            Status::No => return Err(StoreError::AuthFailure(done.describe())),
            Status::Bad => return Err(StoreError::Protocol(format!("LOGIN: {}", done.describe()))),
        }
        s.absorb_caps(done.code.as_deref());
        s.absorb_untagged_caps(&done.untagged);
        if s.caps.is_empty() {
            let done = s.run(&[Arg::Raw("CAPABILITY")])?;
            s.absorb_untagged_caps(&done.untagged);
        }
        Ok(s)
    }

    pub fn capabilities(&self) -> &[String] {
        &self.caps
    }

    fn has_cap(&self, cap: &str) -> bool {
        self.caps.iter().any(|c| c.eq_ignore_ascii_case(cap))
    }

    fn absorb_caps(&mut self, code: Option<&str>) {
        if let Some(rest) = code.and_then(|c| {
            c.get(..11)
                .filter(|p| p.eq_ignore_ascii_case("CAPABILITY "))
                .map(|_| &c[11..])
        }) {
            self.caps = rest.split_whitespace().map(str::to_owned).collect();
        }
    }

    fn absorb_untagged_caps(&mut self, lines: &[Line]) {
        for l in lines {
            let head = l.head();
            if let Some(rest) = head.strip_prefix("* ") {
                if rest.len() > 11 && rest[..11].eq_ignore_ascii_case("CAPABILITY ") {
                    self.caps = rest[11..].split_whitespace().map(str::to_owned).collect();
                }
            }
        }
    }

    fn read_line(&mut self) -> io::Result<Line> {
        let line = wire::read_line(&mut self.io, || Ok(()))?;
        self.trace.push("S:", &line.summary());
        Ok(line)
    }

    fn send(&mut self, bytes: &[u8]) -> io::Result<()> {
        let w = self.io.get_mut();
        w.write_all(bytes)?;
        w.flush()
    }

    /// Sends one tagged command and collects responses up to its completion.
    fn run(&mut self, args: &[Arg<'_>]) -> Result<Done, StoreError> {
        let tag = format!("A{:04}", self.next_tag);
        self.next_tag += 1;
        let mut pending = tag.clone();
        let mut shown = tag.clone();
        for arg in args {
            pending.push(' ');
            shown.push(' ');
            let (enc, secret) = match arg {
                Arg::Raw(r) => (Encoded::Text((*r).to_owned()), false),
                Arg::Str(s) => (wire::astring(s), false),
                Arg::Secret(s) => (wire::astring(s), true),
            };
            match enc {
                Encoded::Text(t) => {
                    pending.push_str(&t);
                    shown.push_str(if secret { "<redacted>" } else { &t });
                }
                Encoded::Literal(bytes) => {
                    pending.push_str(&format!("{{{}}}\r\n", bytes.len()));
                    shown.push_str(&format!("{{{} bytes}}", bytes.len()));
                    self.send(pending.as_bytes())?;
                    pending.clear();
                    loop {
                        let l = self.read_line()?;
                        let head = l.head();
                        if head.starts_with('+') {
                            break;
                        }
                        if head.starts_with(&tag) {
                            self.trace.push("C:", &shown);
                            let (status, code, text) = parse_status(head[tag.len()..].trim_start())
                                .ok_or_else(|| StoreError::Protocol(head.clone()))?;
                            return Ok(Done {
                                status,
                                code,
                                text,
                                untagged: Vec::new(),
                            });
                        }
                    }
                    self.send(&bytes)?;
                }
            }
        }
        pending.push_str("\r\n");
        self.trace.push("C:", &shown);
        self.send(pending.as_bytes())?;

        let mut untagged = Vec::new();
        loop {
            let l = self.read_line()?;
            let head = l.head();
            if let Some(rest) = head.strip_prefix(&tag) {
                let (status, code, text) = parse_status(rest.trim_start())
                    .ok_or_else(|| StoreError::Protocol(format!("bad completion {head:?}")))?;
                return Ok(Done {
                    status,
                    code,
                    text,
                    untagged,
                });
            }
            if head.starts_with('+') {
                return Err(StoreError::Protocol(
                    "unexpected continuation request".into(),
                ));
            }
            untagged.push(l);
        }
    }

    fn require_selected(&self) -> Result<&str, StoreError> {
        self.selected
            .as_deref()
            .ok_or_else(|| StoreError::Protocol("no folder selected".into()))
    }

    fn search_unseen(&mut self) -> Result<Vec<u32>, StoreError> {
        let done = self.run(&[Arg::Raw("UID SEARCH UNSEEN")])?;
        if done.status != Status::Ok {
            return Err(StoreError::FetchFailure(format!(
                "SEARCH: {}",
                done.describe()
            )));
        }
        Ok(parse_search(&done.untagged))
    }

    fn uid_fetch(&mut self, uids: &[u32], items: &str) -> Result<Vec<FetchItem>, StoreError> {
        let set = wire::sequence_set(uids);
        let cmd = format!("UID FETCH {set} {items}");
        let done = self.run(&[Arg::Raw(&cmd)])?;
        if done.status != Status::Ok {
            return Err(StoreError::FetchFailure(format!(
                "FETCH: {}",
                done.describe()
            )));
        }
        Ok(done.untagged.iter().filter_map(parse_fetch).collect())
    }

    fn store_flags(&mut self, uid: &str, op: &str, flag: &str) -> Result<Done, StoreError> {
        let cmd = format!("UID STORE {uid} {op}FLAGS.SILENT ({flag})");
        self.run(&[Arg::Raw(&cmd)])
    }

    /// Runs a command that names a destination folder, creating the folder
    /// once if the server answers TRYCREATE.
    fn with_trycreate(&mut self, verb: &str, uid: &str, target: &str) -> Result<Done, StoreError> {
        let mailbox = wire::encode_mailbox(target);
        let cmd = format!("UID {verb} {uid}");
        let done = self.run(&[Arg::Raw(&cmd), Arg::Str(&mailbox)])?;
        if done.status == Status::No && done.has_code("TRYCREATE") {
            let created = self.run(&[Arg::Raw("CREATE"), Arg::Str(&mailbox)])?;
            if created.status != Status::Ok {
                return Err(StoreError::ActionFailure(format!(
                    "CREATE {target}: {}",
                    created.describe()
                )));
            }
            return self.run(&[Arg::Raw(&cmd), Arg::Str(&mailbox)]);
        }
        Ok(done)
    }

    fn move_message(&mut self, uid: &str, target: &str) -> Result<(), StoreError> {
        if self.has_cap("MOVE") {
            let done = self.with_trycreate("MOVE", uid, target)?;
            return match done.status {
                Status::Ok => Ok(()),
                _ => Err(StoreError::ActionFailure(format!(
                    "MOVE: {}",
                    done.describe()
                ))),
            };
        }
        let done = self.with_trycreate("COPY", uid, target)?;
        if done.status != Status::Ok {
            return Err(StoreError::ActionFailure(format!(
                "COPY: {}",
                done.describe()
            )));
        }
        let done = self.store_flags(uid, "+", "\\Deleted")?;
        if done.status != Status::Ok {
            return Err(StoreError::ActionFailure(format!(
                "STORE: {}",
                done.describe()
            )));
        }
        let expunge = if self.has_cap("UIDPLUS") {
            format!("UID EXPUNGE {uid}")
        } else {
            "EXPUNGE".to_owned()
        };
        let done = self.run(&[Arg::Raw(&expunge)])?;
        if done.status != Status::Ok {
            return Err(StoreError::ActionFailure(format!(
                "EXPUNGE: {}",
                done.describe()
            )));
        }
        Ok(())
    }
}

fn action_err(e: StoreError) -> StoreError {
    match e {
        StoreError::Io(e) => StoreError::ActionFailure(e.to_string()),
        other => other,
    }
}

fn fetch_err(e: StoreError) -> StoreError {
    match e {
        StoreError::Io(e) => StoreError::FetchFailure(e.to_string()),
        StoreError::Protocol(p) => StoreError::FetchFailure(p),
        other => other,
    }
}

impl MailStore for ImapSession {
    fn select_folder(&mut self, folder: &str) -> Result<FolderSummary, StoreError> {
        let mailbox = wire::encode_mailbox(folder);
        let done = self.run(&[Arg::Raw("SELECT"), Arg::Str(&mailbox)])?;
        match done.status {
            Status::Ok => {}
            Status::No => return Err(StoreError::NoSuchFolder(folder.to_owned())),
            Status::Bad => {
                return Err(StoreError::Protocol(format!("SELECT: {}", done.describe())))
            }
        }
        let total = parse_exists(&done.untagged).unwrap_or(0);
        self.selected = Some(folder.to_owned());
        let unseen = self.search_unseen().map_err(fetch_err)?.len();
        Ok(FolderSummary { total, unseen })
    }

    fn fetch_unseen_top(
        &mut self,
        top: usize,
    ) -> Result<Vec<(MessageHandle, RawMessage)>, StoreError> {
        let folder = self.require_selected()?.to_owned();
        let inner = |s: &mut Self| -> Result<Vec<(MessageHandle, RawMessage)>, StoreError> {
            let uids = s.search_unseen()?;
            if uids.is_empty() || top == 0 {
                return Ok(Vec::new());
            }
            let heads = s.uid_fetch(&uids, "(UID INTERNALDATE BODY.PEEK[HEADER.FIELDS (DATE)])")?;
            let mut dated = Vec::with_capacity(heads.len());
            for h in heads {
                let uid = h
                    .uid
                    .ok_or_else(|| StoreError::FetchFailure("FETCH response without UID".into()))?;
                let date = h
                    .body
                    .as_deref()
                    .and_then(|b| {
                        let mut hb = b.to_vec();
                        hb.extend_from_slice(b"\r\n");
                        peek_date(&hb)
                    })
                    .or(h.internal_date);
                dated.push((date, uid));
            }
            newest_first(&mut dated);
            let chosen: Vec<u32> = dated.iter().take(top).map(|d| d.1).collect();
            let bodies = s.uid_fetch(&chosen, "(UID INTERNALDATE BODY.PEEK[])")?;
            let mut out = Vec::with_capacity(chosen.len());
            for uid in chosen {
                let item = bodies.iter().find(|b| b.uid == Some(uid)).ok_or_else(|| {
                    StoreError::FetchFailure(format!("UID {uid} missing from FETCH"))
                })?;
                let body = item
                    .body
                    .clone()
                    .ok_or_else(|| StoreError::FetchFailure(format!("UID {uid} has no body")))?;
                let mut raw = RawMessage::new(body, uid.to_string())
                    .map_err(|e| StoreError::FetchFailure(format!("UID {uid}: {e}")))?;
                if let Some(t) = item.internal_date {
                    raw = raw.with_received_at(t);
                }
                out.push((
                    MessageHandle {
                        store_uid: uid.to_string(),
                        folder: folder.clone(),
                        seen: false,
                    },
                    raw,
                ));
            }
            Ok(out)
        };
        inner(self).map_err(fetch_err)
    }

    fn apply_action(&mut self, action: &StoreAction) -> Result<(), StoreError> {
        let selected = self.require_selected()?.to_owned();
        let h = &action.handle;
        if h.folder != selected {
            return Err(StoreError::ActionFailure(format!(
                "handle belongs to {:?}, selected folder is {selected:?}",
                h.folder
            )));
        }
        if h.store_uid.is_empty() || !h.store_uid.bytes().all(|b| b.is_ascii_digit()) {
            return Err(StoreError::ActionFailure(format!(
                "bad UID {:?}",
                h.store_uid
            )));
        }
        let uid = h.store_uid.as_str();
        let result = match action.kind {
            ActionKind::MarkSeen => {
                self.store_flags(uid, "+", "\\Seen")
                    .and_then(|d| match d.status {
                        Status::Ok => Ok(()),
                        _ => Err(StoreError::ActionFailure(format!(
                            "STORE: {}",
                            d.describe()
                        ))),
                    })
            }
            ActionKind::MoveToLabel | ActionKind::MoveToTrash => {
                let target = action.destination()?.to_owned();
                // Flag first so the message arrives in the target as read.
                let flagged = self.store_flags(uid, "+", "\\Seen")?;
                if flagged.status != Status::Ok {
                    return Err(StoreError::ActionFailure(format!(
                        "STORE: {}",
                        flagged.describe()
                    )));
                }
                let moved = self.move_message(uid, &target);
                if moved.is_err() && !h.seen {
                    let _ = self.store_flags(uid, "-", "\\Seen");
                }
                moved
            }
        };
        result.map_err(action_err)
    }

    fn logout(&mut self) -> Result<(), StoreError> {
        let done = self.run(&[Arg::Raw("LOGOUT")]);
        self.selected = None;
        match done {
            Ok(_) => Ok(()),
            Err(StoreError::Io(e)) if e.kind() == io::ErrorKind::UnexpectedEof => Ok(()),
            Err(e) => Err(e),
        }
    }

    fn trace(&self) -> Option<&Trace> {
        Some(&self.trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn status_lines() {
        let (s, c, t) = parse_status("NO [TRYCREATE] no such mailbox").unwrap();
        assert_eq!(s, Status::No);
        assert_eq!(c.as_deref(), Some("TRYCREATE"));
        assert_eq!(t, "no such mailbox");
        let (s, c, _) = parse_status("OK done").unwrap();
        assert_eq!((s, c), (Status::Ok, None));
        assert!(parse_status("WHAT").is_none());
    }

    #[test]
    fn internaldate_formats() {
        let want = Utc.with_ymd_and_hms(1996, 7, 17, 9, 44, 25).unwrap();
        assert_eq!(parse_internaldate("17-Jul-1996 02:44:25 -0700"), Some(want));
        assert_eq!(
            parse_internaldate(" 7-Jul-1996 02:44:25 +0000"),
            Some(Utc.with_ymd_and_hms(1996, 7, 7, 2, 44, 25).unwrap())
        );
    }

    #[test]
    fn fetch_and_search_responses() {
        let mut cur = io::Cursor::new(
            b"* 2 FETCH (UID 9 INTERNALDATE \"01-Jan-2022 00:00:00 +0000\" BODY[] {3}\r\nabc)\r\n"
                .to_vec(),
        );
        let l = wire::read_line(&mut cur, || Ok(())).unwrap();
        let f = parse_fetch(&l).unwrap();
        assert_eq!(f.uid, Some(9));
        assert_eq!(f.body.as_deref(), Some(&b"abc"[..]));
        assert!(f.internal_date.is_some());
        let s = wire::read_line(&mut io::Cursor::new(b"* SEARCH 3 5 8\r\n".to_vec()), || {
            Ok(())
        })
        .unwrap();
        assert_eq!(parse_search(&[s]), [3, 5, 8]);
    }
}
