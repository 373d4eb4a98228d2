#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use email_assistant::audit::FixedClock;
use email_assistant::config::{AppConfig, RunMode};
use email_assistant::store::{StoreConfig, StoreMode};
use sha2::{Digest, Sha256};

pub const PASSWORD: &str = "S3cret-Pa55word!";
pub const USER: &str = "tester@example.com";

pub fn sample_fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/sample")
}

pub fn copy_tree(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for e in fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let dst = to.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            copy_tree(&e.path(), &dst);
        } else {
            fs::copy(e.path(), &dst).unwrap();
        }
    }
}

/// Relative path → SHA-256 of contents, for every file under `root`.
pub fn tree_hash(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    if !root.exists() {
        return out;
    }
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let e = e.unwrap();
            if e.file_type().unwrap().is_dir() {
                stack.push(e.path());
            } else {
                let rel = e
                    .path()
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .replace('\\', "/");
                out.insert(
                    rel,
                    hex::encode(Sha256::digest(fs::read(e.path()).unwrap())),
                );
            }
        }
    }
    out
}

/// Files directly under `dir`, dotfiles aside (0 if it does not exist).
pub fn count_files(dir: &Path) -> usize {
    fs::read_dir(dir)
        .map(|rd| {
            rd.map(|e| e.unwrap())
                .filter(|e| e.file_type().unwrap().is_file())
                .filter(|e| !e.file_name().to_string_lossy().starts_with('.'))
                .count()
        })
        .unwrap_or(0)
}

/// Message files in a maildir folder, `new/` and `cur/` together.
pub fn folder_count(mailbox: &Path, folder: &str) -> usize {
    let dir = mailbox.join(folder);
    count_files(&dir.join("new")) + count_files(&dir.join("cur"))
}

/// Workspace copy of the sample fixture with a config pointing into it.
pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn sample() -> Self {
        let dir = tempfile::tempdir().unwrap();
        copy_tree(&sample_fixture(), dir.path());
        Self { dir }
    }

    pub fn empty() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("mailbox/Inbox/new")).unwrap();
        fs::create_dir_all(dir.path().join("mailbox/Inbox/cur")).unwrap();
        Self { dir }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn mailbox(&self) -> PathBuf {
        self.path().join("mailbox")
    }

    pub fn files(&self) -> PathBuf {
        self.path().join("out/files")
    }

    pub fn reports(&self) -> PathBuf {
        self.path().join("out/reports")
    }

    pub fn inbox_new(&self) -> PathBuf {
        self.mailbox().join("Inbox/new")
    }

    /// Fixture-mode config; the sample rules/blocklist/manifest when present.
    pub fn config(&self, mode: RunMode) -> AppConfig {
        let opt = |name: &str| {
            let p = self.path().join(name);
            p.exists().then_some(p)
        };
        AppConfig {
            store: StoreConfig {
                mode: StoreMode::Fixture,
                fixture_root: Some(self.mailbox()),
                ..StoreConfig::default()
            },
            rules_path: opt("rules.json"),
            blocklist_path: opt("blocklist.txt"),
            manifest_path: opt("manifest.json"),
            layout_root: self.files(),
            report_dir: self.reports(),
            run_mode: mode,
            ..AppConfig::default()
        }
    }
}

pub fn clock() -> FixedClock {
    use chrono::TimeZone;
    FixedClock(chrono::Utc.with_ymd_and_hms(2022, 1, 20, 9, 0, 0).unwrap())
}

/// Quoted-printable encoder written independently of the decoder under
/// test: every byte outside printable ASCII, plus '=', is escaped, and lines
/// are soft-broken before 76 characters.
pub fn qp_encode(data: &[u8]) -> String {
    let mut out = String::new();
    let mut line_len = 0;
    for &b in data {
        let piece = if (33..=126).contains(&b) && b != b'=' {
            (b as char).to_string()
        } else {
            format!("={b:02X}")
        };
        if line_len + piece.len() > 75 {
            out.push_str("=\r\n");
            line_len = 0;
        }
        line_len += piece.len();
        out.push_str(&piece);
    }
    out
}

pub fn b64_encode(data: &[u8]) -> String {
    use base64::Engine;
    let s = base64::engine::general_purpose::STANDARD.encode(data);
    let mut out = String::new();
    for chunk in s.as_bytes().chunks(76) {
        out.push_str(std::str::from_utf8(chunk).unwrap());
        out.push_str("\r\n");
    }
    out
}

/// A message with one attachment in the given transfer encoding.
pub fn message_with_attachment(
    from: &str,
    subject: &str,
    date: &str,
    filename: &str,
    payload: &[u8],
    encoding: &str,
) -> Vec<u8> {
    let body = match encoding {
        "base64" => b64_encode(payload),
        "quoted-printable" => qp_encode(payload),
        other => panic!("unsupported test encoding {other}"),
    };
    format!(
        "From: {from}\r\nTo: hr@company.example\r\nSubject: {subject}\r\nDate: {date}\r\n\
         MIME-Version: 1.0\r\nContent-Type: multipart/mixed; boundary=\"b0undary\"\r\n\r\n\
         --b0undary\r\nContent-Type: text/plain\r\n\r\nSee attached.\r\n\
         --b0undary\r\nContent-Type: application/octet-stream\r\n\
         Content-Disposition: attachment; filename=\"{filename}\"\r\n\
         Content-Transfer-Encoding: {encoding}\r\n\r\n{body}\r\n--b0undary--\r\n"
    )
    .into_bytes()
}

/// Every occurrence of `needle` in the files under `root`.
pub fn scan_for(root: &Path, needle: &[u8]) -> Vec<PathBuf> {
    let mut hits = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(rd) = fs::read_dir(&d) else { continue };
        for e in rd {
            let e = e.unwrap();
            if e.file_type().unwrap().is_dir() {
                stack.push(e.path());
            } else {
                let data = fs::read(e.path()).unwrap();
                if data.windows(needle.len()).any(|w| w == needle) {
                    hits.push(e.path());
                }
            }
        }
    }
    hits
}
