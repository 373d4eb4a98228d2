//! Maildir-style folder tree: `<root>/<Folder>/new/*.eml` holds unseen
//! messages and `<root>/<Folder>/cur/*.eml` seen ones. Backs both the fixture
//! store and the loopback server.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use email_assistant_core::peek_date;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub name: String,
    pub seen: bool,
    pub path: PathBuf,
}

impl Entry {
    pub fn read(&self) -> io::Result<Vec<u8>> {
        fs::read(&self.path)
    }

    pub fn mtime(&self) -> Option<DateTime<Utc>> {
        fs::metadata(&self.path)
            .and_then(|m| m.modified())
            .ok()
            .map(DateTime::<Utc>::from)
    }

    /// Date header if there is one, else the file's mtime.
    pub fn sort_date(&self, bytes: &[u8]) -> Option<DateTime<Utc>> {
        peek_date(bytes).or_else(|| self.mtime())
    }
}

/// Orders `(date, key)` pairs newest first, ties broken by key ascending.
pub fn newest_first<K: Ord>(items: &mut [(Option<DateTime<Utc>>, K)]) {
    items.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
}

#[derive(Debug, Clone)]
pub struct Maildir {
    root: PathBuf,
}

fn invalid(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidInput, msg)
}

impl Maildir {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(io::Error::new(
                io::ErrorKind::NotFound,
                format!("{} is not a directory", root.display()),
            ));
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Maps a folder name (components separated by `/`) to its directory.
    fn folder_dir(&self, name: &str) -> io::Result<PathBuf> {
        let mut p = self.root.clone();
        for comp in name.split('/') {
            if comp.is_empty()
                || comp == "."
                || comp == ".."
                || comp.contains(['\\', '\0'])
                || comp == "new"
                || comp == "cur"
                || comp == "tmp"
            {
                return Err(invalid(format!("invalid folder name {name:?}")));
            }
            p.push(comp);
        }
        Ok(p)
    }

    fn is_folder_dir(p: &Path) -> bool {
        p.join("new").is_dir() || p.join("cur").is_dir()
    }

    /// The folder's canonical name, if it exists. `INBOX` matches any
    /// casing of the inbox directory.
    pub fn resolve(&self, name: &str) -> Option<String> {
        let dir = self.folder_dir(name).ok()?;
        if Self::is_folder_dir(&dir) {
            return Some(name.to_owned());
        }
        if name.eq_ignore_ascii_case("inbox") {
            return self
                .folders()
                .ok()?
                .into_iter()
                .find(|f| f.eq_ignore_ascii_case("inbox"));
        }
        None
    }

    /// Creates the folder (idempotent).
    pub fn create(&self, name: &str) -> io::Result<()> {
        let dir = self.folder_dir(name)?;
        fs::create_dir_all(dir.join("new"))?;
        fs::create_dir_all(dir.join("cur"))
    }

    /// All folder names, sorted.
    pub fn folders(&self) -> io::Result<Vec<String>> {
        let mut out = Vec::new();
        let mut stack = vec![(self.root.clone(), String::new())];
        while let Some((dir, prefix)) = stack.pop() {
            for e in fs::read_dir(&dir)? {
                let e = e?;
                if !e.file_type()?.is_dir() {
                    continue;
                }
                let Ok(name) = e.file_name().into_string() else {
                    continue;
                };
                if matches!(name.as_str(), "new" | "cur" | "tmp") {
                    continue;
                }
                let full = if prefix.is_empty() {
                    name
                } else {
                    format!("{prefix}/{name}")
                };
                if Self::is_folder_dir(&e.path()) {
                    out.push(full.clone());
                }
                stack.push((e.path(), full));
            }
        }
        out.sort();
        Ok(out)
    }

    /// Messages of a folder, unseen then seen, each sorted by file name.
    pub fn entries(&self, folder: &str) -> io::Result<Vec<Entry>> {
        let dir = self.folder_dir(folder)?;
        let mut out = Vec::new();
        for (sub, seen) in [("new", false), ("cur", true)] {
            let d = dir.join(sub);
            if !d.is_dir() {
                continue;
            }
            let mut names = Vec::new();
            for e in fs::read_dir(&d)? {
                let e = e?;
                if !e.file_type()?.is_file() {
                    continue;
                }
                if let Ok(name) = e.file_name().into_string() {
                    if !name.starts_with('.') {
                        names.push(name);
                    }
                }
            }
            names.sort();
            out.extend(names.into_iter().map(|name| Entry {
                path: d.join(&name),
                name,
                seen,
            }));
        }
        Ok(out)
    }

    pub fn find(&self, folder: &str, name: &str) -> io::Result<Option<Entry>> {
        Ok(self.entries(folder)?.into_iter().find(|e| e.name == name))
    }

    fn sub_dir(&self, folder: &str, seen: bool) -> io::Result<PathBuf> {
        let d = self
            .folder_dir(folder)?
            .join(if seen { "cur" } else { "new" });
        fs::create_dir_all(&d)?;
        Ok(d)
    }

    /// A file name under `dir` that is not taken, starting from `name`.
    fn free_name(dir: &Path, name: &str) -> String {
        if !dir.join(name).exists() {
            return name.to_owned();
        }
        let (stem, ext) = match name.rfind('.') {
            Some(p) if p > 0 => (&name[..p], &name[p..]),
            _ => (name, ""),
        };
        (1u32..)
            .map(|k| format!("{stem}-{k}{ext}"))
            .find(|n| !dir.join(n).exists())
            .expect("unbounded suffix search")
    }

    /// Moves a file from `new/` to `cur/` (or back). Returns the entry at
    /// its new place.
    pub fn set_seen(&self, folder: &str, entry: &Entry, seen: bool) -> io::Result<Entry> {
        if entry.seen == seen {
            return Ok(entry.clone());
        }
        let dir = self.sub_dir(folder, seen)?;
        let name = Self::free_name(&dir, &entry.name);
        let path = dir.join(&name);
        fs::rename(&entry.path, &path)?;
        Ok(Entry { name, seen, path })
    }

    /// Moves a message into `target`, keeping its file name unless that
    /// would clobber an existing file.
    pub fn move_to(&self, entry: &Entry, target: &str, seen: bool) -> io::Result<Entry> {
        let dir = self.sub_dir(target, seen)?;
        let name = Self::free_name(&dir, &entry.name);
        let path = dir.join(&name);
        fs::rename(&entry.path, &path)?;
        Ok(Entry { name, seen, path })
    }

    /// Copies a message into `target`, preserving its modification time.
    pub fn copy_to(&self, entry: &Entry, target: &str, seen: bool) -> io::Result<Entry> {
        let dir = self.sub_dir(target, seen)?;
        let name = Self::free_name(&dir, &entry.name);
        let path = dir.join(&name);
        fs::copy(&entry.path, &path)?;
        if let Ok(mtime) = fs::metadata(&entry.path).and_then(|m| m.modified()) {
            let f = fs::File::options().write(true).open(&path)?;
            f.set_modified(mtime)?;
        }
        Ok(Entry { name, seen, path })
    }

    pub fn remove(&self, entry: &Entry) -> io::Result<()> {
        fs::remove_file(&entry.path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn tree() -> (tempfile::TempDir, Maildir) {
        let t = tempfile::tempdir().unwrap();
        let m = Maildir::open(t.path()).unwrap();
        m.create("Inbox").unwrap();
        fs::write(t.path().join("Inbox/new/b.eml"), b"Date: x\r\n\r\n").unwrap();
        fs::write(t.path().join("Inbox/new/a.eml"), b"\r\n").unwrap();
        (t, m)
    }

    #[test]
    fn folders_and_entries() {
        let (_t, m) = tree();
        m.create("Work").unwrap();
        m.create("Work").unwrap();
        m.create("[Gmail]/Trash").unwrap();
        assert_eq!(m.folders().unwrap(), ["Inbox", "Work", "[Gmail]/Trash"]);
        let names: Vec<_> = m
            .entries("Inbox")
            .unwrap()
            .into_iter()
            .map(|e| e.name)
            .collect();
        assert_eq!(names, ["a.eml", "b.eml"]);
        assert_eq!(m.resolve("INBOX").as_deref(), Some("Inbox"));
        assert_eq!(m.resolve("Nope"), None);
        assert!(m.create("../escape").is_err());
        assert!(m.create("a/new").is_err());
    }

    #[test]
    fn seen_and_moves_keep_names() {
        let (t, m) = tree();
        let a = m.find("Inbox", "a.eml").unwrap().unwrap();
        let a = m.set_seen("Inbox", &a, true).unwrap();
        assert!(t.path().join("Inbox/cur/a.eml").is_file());
        let moved = m.move_to(&a, "Work", true).unwrap();
        assert_eq!(moved.path, t.path().join("Work/cur/a.eml"));
        assert!(m.find("Inbox", "a.eml").unwrap().is_none());

        let b = m.find("Inbox", "b.eml").unwrap().unwrap();
        let c = m.copy_to(&b, "Work", true).unwrap();
        assert_eq!(c.name, "b.eml");
        let c2 = m.copy_to(&b, "Work", true).unwrap();
        assert_eq!(c2.name, "b-1.eml");
        assert_eq!(c2.mtime(), b.mtime());
    }

    #[test]
    fn ordering_is_newest_first_then_key() {
        let d = |h| Some(Utc.with_ymd_and_hms(2022, 1, 1, h, 0, 0).unwrap());
        let mut v = vec![(d(1), "x"), (d(3), "b"), (None, "n"), (d(3), "a")];
        newest_first(&mut v);
        let keys: Vec<_> = v.iter().map(|p| p.1).collect();
        assert_eq!(keys, ["a", "b", "x", "n"]);
    }
}
