//! Writing attachments and invitation drafts under the layout root.

use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use email_assistant_core::suffixed_name;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const MAX_SUFFIX: u32 = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum FilingError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("no free name for {name:?} in {dir} after {MAX_SUFFIX} suffixes")]
    ExhaustedSuffixes { dir: PathBuf, name: String },
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> FilingError + '_ {
    move |source| FilingError::Io {
        path: path.to_owned(),
        source,
    }
}

/// `root/Useful/<category>`, `root/NotUseful`, `root/Outbox`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectoryLayout {
    root: PathBuf,
}

impl DirectoryLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn useful_dir(&self) -> PathBuf {
        self.root.join("Useful")
    }

    pub fn not_useful_dir(&self) -> PathBuf {
        self.root.join("NotUseful")
    }

    pub fn outbox_dir(&self) -> PathBuf {
        self.root.join("Outbox")
    }

    /// `Useful/<folder>`, or `Useful` itself for uncategorized files.
    pub fn category_dir(&self, folder: Option<&str>) -> PathBuf {
        match folder {
            Some(f) => self.useful_dir().join(f),
            None => self.useful_dir(),
        }
    }

    /// Creates the fixed directories plus the given categories. Idempotent.
    pub fn ensure<'a>(
        &self,
        categories: impl IntoIterator<Item = &'a str>,
    ) -> Result<(), FilingError> {
        let mut dirs = vec![self.useful_dir(), self.not_useful_dir(), self.outbox_dir()];
        dirs.extend(categories.into_iter().map(|c| self.category_dir(Some(c))));
        for d in dirs {
            fs::create_dir_all(&d).map_err(io_at(&d))?;
        }
        Ok(())
    }
}

/// Evidence of one saved file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SavedFileRecord {
    pub message_unique_id: String,
    pub original_filename: String,
    pub saved_path: PathBuf,
    pub sha256: String,
    pub bytes_written: u64,
    pub category: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `filename` if free in `dir`, else the first free `"<stem> (k)<ext>"`.
pub fn resolve_collision(dir: &Path, filename: &str) -> Result<String, FilingError> {
    resolve_collision_excluding(dir, filename, &HashSet::new())
}

/// Like [`resolve_collision`], also treating `reserved` paths as taken.
/// Dry runs use this to keep planned names distinct without touching disk.
pub fn resolve_collision_excluding(
    dir: &Path,
    filename: &str,
    reserved: &HashSet<PathBuf>,
) -> Result<String, FilingError> {
    let taken = |name: &str| {
        let p = dir.join(name);
        reserved.contains(&p) || fs::symlink_metadata(&p).is_ok()
    };
    if !taken(filename) {
        return Ok(filename.to_owned());
    }
    (1..=MAX_SUFFIX)
        .map(|k| suffixed_name(filename, k))
        .find(|n| !taken(n))
        .ok_or_else(|| FilingError::ExhaustedSuffixes {
            dir: dir.to_owned(),
            name: filename.to_owned(),
        })
}

/// Writes `bytes` to `dir/final_name` via a temporary file in the same
/// directory, refusing to replace an existing file. Nothing is left behind
/// on failure.
pub fn write_atomic(dir: &Path, final_name: &str, bytes: &[u8]) -> Result<PathBuf, FilingError> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let target = dir.join(final_name);
    let mut tmp = tempfile::Builder::new()
        .prefix(".partial-")
        .tempfile_in(dir)
        .map_err(io_at(dir))?;
    tmp.write_all(bytes).map_err(io_at(&target))?;
    tmp.as_file().sync_all().map_err(io_at(&target))?;
    tmp.persist_noclobber(&target)
        .map_err(|e| FilingError::Io {
            path: target.clone(),
            source: e.error,
        })?;
    Ok(target)
}

/// Saves one attachment's decoded bytes under `dir/final_name`.
pub fn write_attachment(
    message_unique_id: &str,
    original_filename: &str,
    bytes: &[u8],
    dir: &Path,
    final_name: &str,
    category: &str,
) -> Result<SavedFileRecord, FilingError> {
    let saved_path = write_atomic(dir, final_name, bytes)?;
    Ok(SavedFileRecord {
        message_unique_id: message_unique_id.to_owned(),
        original_filename: original_filename.to_owned(),
        saved_path,
        sha256: sha256_hex(bytes),
        bytes_written: bytes.len() as u64,
        category: category.to_owned(),
    })
}

/// Writes an invitation draft into the outbox.
pub fn write_draft(outbox: &Path, file_name: &str, text: &str) -> Result<PathBuf, FilingError> {
    write_atomic(outbox, file_name, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collision_examples() {
        let t = tempfile::tempdir().unwrap();
        let d = t.path();
        assert_eq!(resolve_collision(d, "x.pdf").unwrap(), "x.pdf");
        fs::write(d.join("x.pdf"), b"").unwrap();
        assert_eq!(resolve_collision(d, "x.pdf").unwrap(), "x (1).pdf");
        fs::write(d.join("x (1).pdf"), b"").unwrap();
        assert_eq!(resolve_collision(d, "x.pdf").unwrap(), "x (2).pdf");
        let reserved = HashSet::from([d.join("x (2).pdf")]);
        assert_eq!(
            resolve_collision_excluding(d, "x.pdf", &reserved).unwrap(),
            "x (3).pdf"
        );
    }

    #[test]
    fn writes_exact_bytes_and_hash() {
        let t = tempfile::tempdir().unwrap();
        let r =
            write_attachment("B-000001", "h.txt", b"hello", t.path(), "h.txt", "Useful").unwrap();
        assert_eq!(fs::read(&r.saved_path).unwrap(), b"hello");
        assert_eq!(r.bytes_written, 5);
        // SHA-256("hello"), published test vector.
        assert_eq!(
            r.sha256,
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
        let z = write_attachment("B-000001", "z", b"", t.path(), "z", "NotUseful").unwrap();
        assert_eq!(z.bytes_written, 0);
        assert_eq!(fs::metadata(&z.saved_path).unwrap().len(), 0);
    }

    #[test]
    fn never_overwrites() {
        let t = tempfile::tempdir().unwrap();
        fs::write(t.path().join("a"), b"old").unwrap();
        assert!(write_atomic(t.path(), "a", b"new").is_err());
        assert_eq!(fs::read(t.path().join("a")).unwrap(), b"old");
        let names: Vec<_> = fs::read_dir(t.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 1, "temp file left behind: {names:?}");
    }

    #[cfg(unix)]
    #[test]
    fn unwritable_directory_leaves_nothing() {
        use std::os::unix::fs::PermissionsExt;
        let t = tempfile::tempdir().unwrap();
        let d = t.path().join("ro");
        fs::create_dir(&d).unwrap();
        fs::set_permissions(&d, fs::Permissions::from_mode(0o555)).unwrap();
        let probe = d.join("probe");
        if fs::write(&probe, b"").is_ok() {
            // Running as root: permissions are not enforced.
            fs::remove_file(probe).unwrap();
            return;
        }
        let r = write_attachment("u", "a", b"abc", &d, "a", "Useful");
        assert!(matches!(r, Err(FilingError::Io { .. })));
        assert_eq!(fs::read_dir(&d).unwrap().count(), 0);
    }

    #[test]
    fn layout_creation_is_idempotent() {
        let t = tempfile::tempdir().unwrap();
        let l = DirectoryLayout::new(t.path());
        l.ensure(["Resumes", "Bills"]).unwrap();
        l.ensure(["Resumes", "Bills"]).unwrap();
        assert!(t.path().join("Useful/Resumes").is_dir());
        assert!(t.path().join("NotUseful").is_dir());
        assert!(t.path().join("Outbox").is_dir());
    }
}
