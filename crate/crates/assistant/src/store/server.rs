//! Plaintext IMAP test server on 127.0.0.1, backed by a maildir tree.
//!
//! Serves one client at a time. UIDs are assigned per folder in file-name
//! order the first time a folder is seen and stay fixed for the server's
//! lifetime. `\Seen` is the file's place (`cur/` vs `new/`); `\Deleted` lives
//! in memory until EXPUNGE.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, BufReader, Write};
use std::net::{Ipv4Addr, SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use chrono::{DateTime, Utc};

use super::maildir::{Entry, Maildir};
use super::wire::{self, Encoded, Tok};
use super::StoreError;

#[derive(Debug, Clone)]
pub struct ServerOptions {
    pub user: String,
    pub password: String,
    /// Advertise and accept UID MOVE. Without it clients must fall back to
    /// COPY + STORE \Deleted + EXPUNGE.
    pub move_supported: bool,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            user: "test@example.com".into(),
            password: "test-password".into(),
            move_supported: true,
        }
    }
}

#[derive(Debug, Default)]
struct FolderState {
    next_uid: u32,
    uids: BTreeMap<u32, String>,
    deleted: BTreeSet<u32>,
}

impl FolderState {
    /// Reconciles the UID map with the directory.
    fn sync(&mut self, md: &Maildir, folder: &str) -> io::Result<()> {
        if self.next_uid == 0 {
            self.next_uid = 1;
        }
        let mut names: Vec<String> = md.entries(folder)?.into_iter().map(|e| e.name).collect();
        names.sort();
        let present: BTreeSet<&String> = names.iter().collect();
        self.uids.retain(|_, n| present.contains(n));
        let deleted: BTreeSet<u32> = self
            .deleted
            .iter()
            .copied()
            .filter(|u| self.uids.contains_key(u))
            .collect();
        self.deleted = deleted;
        let known: BTreeSet<String> = self.uids.values().cloned().collect();
        for n in names {
            if !known.contains(&n) {
                self.uids.insert(self.next_uid, n);
                self.next_uid += 1;
            }
        }
        Ok(())
    }

    fn seq_of(&self, uid: u32) -> Option<usize> {
        self.uids.keys().position(|&u| u == uid).map(|p| p + 1)
    }
}

/// A running loopback server. Dropping it stops the accept loop.
#[derive(Debug)]
pub struct LoopbackServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
    log: Arc<Mutex<Vec<String>>>,
}

impl LoopbackServer {
    /// Binds 127.0.0.1:`port` (0 picks a free port) and starts serving.
    pub fn start(
        fixture_root: impl Into<PathBuf>,
        port: u16,
        opts: ServerOptions,
    ) -> Result<Self, StoreError> {
        let md = Maildir::open(fixture_root.into())?;
        let listener = TcpListener::bind((Ipv4Addr::LOCALHOST, port)).map_err(|e| {
            if e.kind() == io::ErrorKind::AddrInUse {
                StoreError::PortInUse(port)
            } else {
                StoreError::Io(e)
            }
        })?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let log = Arc::new(Mutex::new(Vec::new()));
        let handle = {
            let stop = stop.clone();
            let log = log.clone();
            std::thread::spawn(move || {
                let mut folders: HashMap<String, FolderState> = HashMap::new();
                for conn in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(conn) = conn else { continue };
                    let mut s = Session {
                        md: &md,
                        opts: &opts,
                        log: &log,
                        folders: &mut folders,
                        authed: false,
                        selected: None,
                    };
                    if let Err(e) = s.serve(conn) {
                        log::debug!("loopback session ended: {e}");
                    }
                }
            })
        };
        Ok(Self {
            addr,
            stop,
            handle: Some(handle),
            log,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    /// Commands received so far, without tags. LOGIN arguments are redacted.
    pub fn commands(&self) -> Vec<String> {
        self.log.lock().map(|l| l.clone()).unwrap_or_default()
    }

    /// Blocks until the accept loop ends (it only ends via [`Self::shutdown`]
    /// from another handle, so this serves forever).
    pub fn wait(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_secs(1));
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for LoopbackServer {
    fn drop(&mut self) {
        if self.handle.is_some() {
            self.stop_now();
        }
    }
}

struct Session<'a> {
    md: &'a Maildir,
    opts: &'a ServerOptions,
    log: &'a Mutex<Vec<String>>,
    folders: &'a mut HashMap<String, FolderState>,
    authed: bool,
    selected: Option<String>,
}

type Reply = Result<String, String>;

/// What a command produced: untagged data and the tagged completion.
struct Out {
    data: Vec<u8>,
}

impl Out {
    fn line(&mut self, s: &str) {
        self.data.extend_from_slice(s.as_bytes());
        self.data.extend_from_slice(b"\r\n");
    }
}

fn internaldate(t: Option<DateTime<Utc>>) -> String {
    t.unwrap_or(DateTime::UNIX_EPOCH)
        .format("%d-%b-%Y %H:%M:%S +0000")
        .to_string()
}

fn header_end(b: &[u8]) -> usize {
    if let Some(p) = b.windows(4).position(|w| w == b"\r\n\r\n") {
        return p + 4;
    }
    if let Some(p) = b.windows(2).position(|w| w == b"\n\n") {
        return p + 2;
    }
    b.len()
}

/// The named header fields (with continuation lines), then a blank line.
fn header_fields(msg: &[u8], names: &[String]) -> Vec<u8> {
    let head = &msg[..header_end(msg)];
    let mut out = Vec::new();
    let mut keep = false;
    for line in head.split_inclusive(|&b| b == b'\n') {
        let body = line.strip_suffix(b"\n").unwrap_or(line);
        let body = body.strip_suffix(b"\r").unwrap_or(body);
        if body.is_empty() {
            break;
        }
        if !matches!(body[0], b' ' | b'\t') {
            let name = body.split(|&b| b == b':').next().unwrap_or_default();
            keep = names
                .iter()
                .any(|n| n.as_bytes().eq_ignore_ascii_case(name));
        }
        if keep {
            out.extend_from_slice(body);
            out.extend_from_slice(b"\r\n");
        }
    }
    out.extend_from_slice(b"\r\n");
    out
}

fn flag_names(toks: &[Tok]) -> Vec<String> {
    let mut out = Vec::new();
    for t in toks {
        match t {
            Tok::List(l) => out.extend(flag_names(l)),
            other => out.extend(other.text()),
        }
    }
    out
}

fn mailbox_arg(t: Option<&Tok>) -> Result<String, String> {
    let raw = t.and_then(Tok::text).ok_or("missing mailbox")?;
    wire::decode_mailbox(&raw).ok_or_else(|| "bad mailbox name".to_owned())
}

fn quote_mailbox(name: &str) -> String {
    match wire::astring(&wire::encode_mailbox(name)) {
        Encoded::Text(t) if t.starts_with('"') => t,
        Encoded::Text(t) => format!("\"{t}\""),
        Encoded::Literal(_) => "\"?\"".into(),
    }
}

impl Session<'_> {
    fn serve(&mut self, conn: TcpStream) -> io::Result<()> {
        conn.set_read_timeout(Some(Duration::from_secs(120)))?;
        let mut writer = conn.try_clone()?;
        let mut reader = BufReader::new(conn);
        writer.write_all(
            format!("* OK [CAPABILITY {}] loopback IMAP ready\r\n", self.caps()).as_bytes(),
        )?;
        loop {
            let line = {
                let w = &mut writer;
                wire::read_line(&mut reader, || w.write_all(b"+ Ready for literal\r\n"))?
            };
            let toks = match line.tokens() {
                Ok(t) if t.len() >= 2 => t,
                _ => {
                    writer.write_all(b"* BAD unparseable command\r\n")?;
                    continue;
                }
            };
            let tag = toks[0].text().unwrap_or_else(|| "*".into());
            let cmd = toks[1].text().unwrap_or_default().to_ascii_uppercase();
            self.record(&cmd, &line.summary(), &tag);
            let mut out = Out { data: Vec::new() };
            let result = self.dispatch(&cmd, &toks[2..], &mut out);
            let tail = match result {
                Ok(text) => format!("{tag} OK {text}\r\n"),
                Err(text) if text.starts_with("BAD") => format!("{tag} {text}\r\n"),
                Err(text) => format!("{tag} NO {text}\r\n"),
            };
            out.data.extend_from_slice(tail.as_bytes());
            writer.write_all(&out.data)?;
            writer.flush()?;
            if cmd == "LOGOUT" {
                return Ok(());
            }
        }
    }

    fn record(&self, cmd: &str, summary: &str, tag: &str) {
        let entry = if cmd == "LOGIN" {
            "LOGIN <redacted>".to_owned()
        } else {
            summary
                .strip_prefix(tag)
                .unwrap_or(summary)
                .trim()
                .to_owned()
        };
        if let Ok(mut l) = self.log.lock() {
            l.push(entry);
        }
    }

    fn caps(&self) -> String {
        let mut c = "IMAP4rev1".to_owned();
        if self.opts.move_supported {
            c.push_str(" MOVE");
        }
        c
    }

    fn dispatch(&mut self, cmd: &str, args: &[Tok], out: &mut Out) -> Reply {
        match cmd {
            "CAPABILITY" => {
                out.line(&format!("* CAPABILITY {}", self.caps()));
                Ok("CAPABILITY completed".into())
            }
            "NOOP" => Ok("NOOP completed".into()),
            "LOGOUT" => {
                out.line("* BYE loopback server logging out");
                Ok("LOGOUT completed".into())
            }
            "LOGIN" => self.login(args),
            _ if !self.authed => Err("BAD authenticate first".into()),
            "LIST" => self.list(args, out),
            "CREATE" => self.create(args),
            "SELECT" => self.select(args, out),
            "CLOSE" => {
                let folder = self.folder()?;
                self.expunge(&folder, None)?;
                self.selected = None;
                Ok("CLOSE completed".into())
            }
            _ if self.selected.is_none() => Err("BAD no folder selected".into()),
            "EXPUNGE" => {
                let folder = self.folder()?;
                self.expunge(&folder, Some(out))?;
                Ok("EXPUNGE completed".into())
            }
            "SEARCH" => self.search(args, false, out),
            "FETCH" => self.fetch(args, false, out),
            "STORE" => self.store(args, false, out),
            "COPY" => self.copy_move(args, false, false, out),
            "MOVE" if self.opts.move_supported => self.copy_move(args, false, true, out),
            "UID" => {
                let sub = args
                    .first()
                    .and_then(Tok::text)
                    .unwrap_or_default()
                    .to_ascii_uppercase();
                let rest = &args[1.min(args.len())..];
                match sub.as_str() {
                    "SEARCH" => self.search(rest, true, out),
                    "FETCH" => self.fetch(rest, true, out),
                    "STORE" => self.store(rest, true, out),
                    "COPY" => self.copy_move(rest, true, false, out),
                    "MOVE" if self.opts.move_supported => self.copy_move(rest, true, true, out),
                    _ => Err(format!("BAD unsupported UID command {sub}")),
                }
            }
            _ => Err(format!("BAD unsupported command {cmd}")),
        }
    }

    fn login(&mut self, args: &[Tok]) -> Reply {
        let (Some(user), Some(pass)) = (
            args.first().and_then(Tok::bytes),
            args.get(1).and_then(Tok::bytes),
        ) else {
            return Err("BAD LOGIN needs user and password".into());
        };
        if user == self.opts.user.as_bytes() && pass == self.opts.password.as_bytes() {
            self.authed = true;
            Ok(format!("[CAPABILITY {}] LOGIN completed", self.caps()))
        } else {
            Err("[AUTHENTICATIONFAILED] invalid credentials".into())
        }
    }

    fn folder(&self) -> Result<String, String> {
        self.selected
            .clone()
            .ok_or_else(|| "BAD no folder selected".into())
    }

    fn state(&mut self, folder: &str) -> Result<&mut FolderState, String> {
        let st = self.folders.entry(folder.to_owned()).or_default();
        st.sync(self.md, folder).map_err(|e| e.to_string())?;
        Ok(st)
    }

    fn list(&mut self, args: &[Tok], out: &mut Out) -> Reply {
        let pattern = args.get(1).and_then(Tok::text).unwrap_or_default();
        if pattern.is_empty() {
            out.line("* LIST (\\Noselect) \"/\" \"\"");
            return Ok("LIST completed".into());
        }
        let pattern = wire::decode_mailbox(&pattern).ok_or("BAD bad pattern")?;
        for f in self.md.folders().map_err(|e| e.to_string())? {
            let hit = match pattern.as_str() {
                "*" => true,
                "%" => !f.contains('/'),
                p => p == f || (p.eq_ignore_ascii_case("inbox") && f.eq_ignore_ascii_case("inbox")),
            };
            if hit {
                out.line(&format!(
                    "* LIST (\\HasNoChildren) \"/\" {}",
                    quote_mailbox(&f)
                ));
            }
        }
        Ok("LIST completed".into())
    }

    fn create(&mut self, args: &[Tok]) -> Reply {
        let name = mailbox_arg(args.first())?;
        if self.md.resolve(&name).is_some() {
            return Err("[ALREADYEXISTS] mailbox exists".into());
        }
        self.md.create(&name).map_err(|e| format!("[CANNOT] {e}"))?;
        Ok("CREATE completed".into())
    }

    fn select(&mut self, args: &[Tok], out: &mut Out) -> Reply {
        self.selected = None;
        let name = mailbox_arg(args.first())?;
        let folder = self
            .md
            .resolve(&name)
            .ok_or("[NONEXISTENT] no such mailbox")?;
        let md = self.md;
        let st = self.state(&folder)?;
        let entries = md.entries(&folder).map_err(|e| e.to_string())?;
        let unseen_seq = st
            .uids
            .values()
            .position(|n| entries.iter().any(|e| &e.name == n && !e.seen))
            .map(|p| p + 1);
        out.line("* FLAGS (\\Seen \\Deleted)");
        out.line(&format!("* {} EXISTS", st.uids.len()));
        out.line("* 0 RECENT");
        if let Some(s) = unseen_seq {
            out.line(&format!("* OK [UNSEEN {s}] first unseen"));
        }
        out.line("* OK [UIDVALIDITY 1] UIDs valid");
        out.line(&format!(
            "* OK [UIDNEXT {}] predicted next UID",
            st.next_uid
        ));
        self.selected = Some(folder);
        Ok("[READ-WRITE] SELECT completed".into())
    }

    /// Resolves a sequence set to (seq, uid, entry) triples in seq order.
    fn messages(&mut self, set: &str, by_uid: bool) -> Result<Vec<(usize, u32, Entry)>, String> {
        let folder = self.folder()?;
        let md = self.md;
        let st = self.state(&folder)?;
        let entries = md.entries(&folder).map_err(|e| e.to_string())?;
        let max = if by_uid {
            st.uids.keys().next_back().copied().unwrap_or(0)
        } else {
            st.uids.len() as u32
        };
        let ranges = wire::parse_sequence_set(set, max).ok_or("BAD bad sequence set")?;
        let mut out = Vec::new();
        for (i, (&uid, name)) in st.uids.iter().enumerate() {
            let key = if by_uid { uid } else { i as u32 + 1 };
            if ranges.iter().any(|&(a, b)| a <= key && key <= b) {
                if let Some(e) = entries.iter().find(|e| &e.name == name) {
                    out.push((i + 1, uid, e.clone()));
                }
            }
        }
        Ok(out)
    }

    fn flags_of(&self, folder: &str, uid: u32, e: &Entry) -> String {
        let mut f = Vec::new();
        if e.seen {
            f.push("\\Seen");
        }
        if self
            .folders
            .get(folder)
            .is_some_and(|s| s.deleted.contains(&uid))
        {
            f.push("\\Deleted");
        }
        format!("({})", f.join(" "))
    }

    fn search(&mut self, args: &[Tok], by_uid: bool, out: &mut Out) -> Reply {
        let mut keys: Vec<String> = args
            .iter()
            .filter_map(Tok::text)
            .map(|k| k.to_ascii_uppercase())
            .collect();
        if keys.first().is_some_and(|k| k == "CHARSET") {
            keys.drain(..2.min(keys.len()));
        }
        let folder = self.folder()?;
        let all = self.messages("1:*", false).unwrap_or_default();
        let deleted = self
            .folders
            .get(&folder)
            .map(|s| s.deleted.clone())
            .unwrap_or_default();
        let mut hits = Vec::new();
        for (seq, uid, e) in all {
            let mut ok = true;
            for k in &keys {
                ok &= match k.as_str() {
                    "ALL" => true,
                    "SEEN" => e.seen,
                    "UNSEEN" => !e.seen,
                    "DELETED" => deleted.contains(&uid),
                    "UNDELETED" => !deleted.contains(&uid),
                    other => return Err(format!("BAD unsupported search key {other}")),
                };
            }
            if ok {
                hits.push(if by_uid { uid as usize } else { seq });
            }
        }
        let mut line = "* SEARCH".to_owned();
        for h in hits {
            line.push_str(&format!(" {h}"));
        }
        out.line(&line);
        Ok("SEARCH completed".into())
    }

    fn fetch(&mut self, args: &[Tok], by_uid: bool, out: &mut Out) -> Reply {
        let set = args
            .first()
            .and_then(Tok::text)
            .ok_or("BAD missing sequence set")?;
        let mut items: Vec<String> = match args.get(1) {
            Some(Tok::List(l)) => l.iter().filter_map(Tok::text).collect(),
            Some(t) => t.text().into_iter().collect(),
            None => return Err("BAD missing fetch items".into()),
        };
        items = items
            .into_iter()
            .flat_map(|i| match i.to_ascii_uppercase().as_str() {
                "ALL" | "FAST" | "FULL" => {
                    vec!["FLAGS".into(), "INTERNALDATE".into(), "RFC822.SIZE".into()]
                }
                _ => vec![i],
            })
            .collect();
        if by_uid && !items.iter().any(|i| i.eq_ignore_ascii_case("UID")) {
            items.insert(0, "UID".into());
        }
        let folder = self.folder()?;
        for (seq, uid, mut e) in self.messages(&set, by_uid)? {
            let bytes = e.read().map_err(|err| err.to_string())?;
            let mut parts: Vec<Vec<u8>> = Vec::new();
            let mut set_seen = false;
            for item in &items {
                let up = item.to_ascii_uppercase();
                match up.as_str() {
                    "UID" => parts.push(format!("UID {uid}").into_bytes()),
                    "FLAGS" => parts.push(
                        b"FLAGS "
                            .iter()
                            .copied()
                            .chain(self.flags_of(&folder, uid, &e).into_bytes())
                            .collect(),
                    ),
                    "INTERNALDATE" => parts
                        .push(format!("INTERNALDATE \"{}\"", internaldate(e.mtime())).into_bytes()),
                    "RFC822.SIZE" => {
                        parts.push(format!("RFC822.SIZE {}", bytes.len()).into_bytes())
                    }
                    _ => {
                        let (name, section, peek) = if up == "RFC822" {
                            ("RFC822".to_owned(), String::new(), false)
                        } else if let Some(rest) = up.strip_prefix("BODY.PEEK[") {
                            (
                                "BODY".to_owned(),
                                rest.trim_end_matches(']').to_owned(),
                                true,
                            )
                        } else if let Some(rest) = up.strip_prefix("BODY[") {
                            (
                                "BODY".to_owned(),
                                rest.trim_end_matches(']').to_owned(),
                                false,
                            )
                        } else {
                            return Err(format!("BAD unsupported fetch item {item}"));
                        };
                        let payload: Vec<u8> = if section.is_empty() {
                            bytes.clone()
                        } else if section == "HEADER" {
                            bytes[..header_end(&bytes)].to_vec()
                        } else if section == "TEXT" {
                            bytes[header_end(&bytes)..].to_vec()
                        } else if let Some(list) = section.strip_prefix("HEADER.FIELDS") {
                            let names: Vec<String> = list
                                .trim()
                                .trim_start_matches('(')
                                .trim_end_matches(')')
                                .split_whitespace()
                                .map(str::to_owned)
                                .collect();
                            if list.trim_start().starts_with(".NOT") || names.is_empty() {
                                return Err(format!("BAD unsupported section {section}"));
                            }
                            header_fields(&bytes, &names)
                        } else {
                            return Err(format!("BAD unsupported section {section}"));
                        };
                        set_seen |= !peek;
                        let label = if name == "RFC822" {
                            name
                        } else {
                            // Echo the section as the client sent it.
                            let orig = &item[item.find('[').unwrap_or(0)..];
                            format!("BODY{orig}")
                        };
                        let mut p = format!("{label} {{{}}}\r\n", payload.len()).into_bytes();
                        p.extend_from_slice(&payload);
                        parts.push(p);
                    }
                }
            }
            if set_seen && !e.seen {
                e = self
                    .md
                    .set_seen(&folder, &e, true)
                    .map_err(|err| err.to_string())?;
                self.rename(&folder, uid, &e.name);
                parts.push(
                    b"FLAGS "
                        .iter()
                        .copied()
                        .chain(self.flags_of(&folder, uid, &e).into_bytes())
                        .collect(),
                );
            }
            let mut line = format!("* {seq} FETCH (").into_bytes();
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    line.push(b' ');
                }
                line.extend_from_slice(p);
            }
            line.extend_from_slice(b")\r\n");
            out.data.extend_from_slice(&line);
        }
        Ok("FETCH completed".into())
    }

    fn rename(&mut self, folder: &str, uid: u32, name: &str) {
        if let Some(st) = self.folders.get_mut(folder) {
            st.uids.insert(uid, name.to_owned());
        }
    }

    fn store(&mut self, args: &[Tok], by_uid: bool, out: &mut Out) -> Reply {
        let set = args
            .first()
            .and_then(Tok::text)
            .ok_or("BAD missing sequence set")?;
        let op = args
            .get(1)
            .and_then(Tok::text)
            .ok_or("BAD missing store operation")?
            .to_ascii_uppercase();
        let flags: Vec<String> = flag_names(&args[2.min(args.len())..])
            .into_iter()
            .map(|f| f.to_ascii_lowercase())
            .collect();
        let silent = op.ends_with(".SILENT");
        let mode = op.trim_end_matches(".SILENT");
        if !matches!(mode, "FLAGS" | "+FLAGS" | "-FLAGS") {
            return Err(format!("BAD bad store operation {op}"));
        }
        let folder = self.folder()?;
        let want_seen = flags.iter().any(|f| f == "\\seen");
        let want_deleted = flags.iter().any(|f| f == "\\deleted");
        for (seq, uid, e) in self.messages(&set, by_uid)? {
            let seen = match mode {
                "FLAGS" => want_seen,
                "+FLAGS" => e.seen || want_seen,
                _ => e.seen && !want_seen,
            };
            let deleted_now = self
                .folders
                .get(&folder)
                .is_some_and(|s| s.deleted.contains(&uid));
            let deleted = match mode {
                "FLAGS" => want_deleted,
                "+FLAGS" => deleted_now || want_deleted,
                _ => deleted_now && !want_deleted,
            };
            let e = self
                .md
                .set_seen(&folder, &e, seen)
                .map_err(|err| err.to_string())?;
            self.rename(&folder, uid, &e.name);
            if let Some(st) = self.folders.get_mut(&folder) {
                if deleted {
                    st.deleted.insert(uid);
                } else {
                    st.deleted.remove(&uid);
                }
            }
            if !silent {
                out.line(&format!(
                    "* {seq} FETCH (UID {uid} FLAGS {})",
                    self.flags_of(&folder, uid, &e)
                ));
            }
        }
        Ok("STORE completed".into())
    }

    fn copy_move(&mut self, args: &[Tok], by_uid: bool, is_move: bool, out: &mut Out) -> Reply {
        let set = args
            .first()
            .and_then(Tok::text)
            .ok_or("BAD missing sequence set")?;
        let name = mailbox_arg(args.get(1))?;
        let target = self
            .md
            .resolve(&name)
            .ok_or("[TRYCREATE] no such mailbox")?;
        let folder = self.folder()?;
        if is_move && target == folder {
            return Err("[CANNOT] source and target are the same".into());
        }
        let msgs = self.messages(&set, by_uid)?;
        for (_, _, e) in &msgs {
            if is_move {
                self.md
                    .move_to(e, &target, e.seen)
                    .map_err(|err| format!("[CANNOT] {err}"))?;
            } else {
                self.md
                    .copy_to(e, &target, e.seen)
                    .map_err(|err| format!("[CANNOT] {err}"))?;
            }
        }
        if is_move {
            let mut seqs: Vec<usize> = msgs.iter().map(|m| m.0).collect();
            seqs.sort_unstable_by(|a, b| b.cmp(a));
            for s in seqs {
                out.line(&format!("* {s} EXPUNGE"));
            }
            if let Some(st) = self.folders.get_mut(&folder) {
                for (_, uid, _) in &msgs {
                    st.uids.remove(uid);
                    st.deleted.remove(uid);
                }
            }
        }
        Ok(format!(
            "{} completed",
            if is_move { "MOVE" } else { "COPY" }
        ))
    }

    fn expunge(&mut self, folder: &str, out: Option<&mut Out>) -> Result<(), String> {
        let doomed: Vec<(usize, u32, Entry)> = {
            let deleted = self
                .folders
                .get(folder)
                .map(|s| s.deleted.clone())
                .unwrap_or_default();
            self.messages("1:*", false)
                .unwrap_or_default()
                .into_iter()
                .filter(|m| deleted.contains(&m.1))
                .collect()
        };
        for (_, _, e) in &doomed {
            self.md.remove(e).map_err(|err| err.to_string())?;
        }
        let st = self.folders.entry(folder.to_owned()).or_default();
        let mut seqs: Vec<usize> = Vec::new();
        for (_, uid, _) in &doomed {
            seqs.push(st.seq_of(*uid).unwrap_or(0));
        }
        for (_, uid, _) in &doomed {
            st.uids.remove(uid);
            st.deleted.remove(uid);
        }
        seqs.sort_unstable_by(|a, b| b.cmp(a));
        if let Some(o) = out {
            for s in seqs {
                o.line(&format!("* {s} EXPUNGE"));
            }
        }
        Ok(())
    }
}
