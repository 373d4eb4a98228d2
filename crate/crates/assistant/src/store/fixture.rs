//! Offline mailbox over a maildir-style directory tree.

use std::path::PathBuf;

use email_assistant_core::RawMessage;

use super::maildir::{newest_first, Maildir};
use super::{ActionKind, FolderSummary, MailStore, MessageHandle, StoreAction, StoreError};

/// Message handles are file names, stable while the file stays put.
#[derive(Debug)]
pub struct FixtureStore {
    dir: Maildir,
    selected: Option<String>,
}

impl FixtureStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let dir = Maildir::open(&root).map_err(|source| StoreError::ConnectFailure {
            addr: root.display().to_string(),
            source,
        })?;
        Ok(Self {
            dir,
            selected: None,
        })
    }

    fn selected(&self) -> Result<&str, StoreError> {
        self.selected
            .as_deref()
            .ok_or_else(|| StoreError::Protocol("no folder selected".into()))
    }
}

impl MailStore for FixtureStore {
    fn select_folder(&mut self, folder: &str) -> Result<FolderSummary, StoreError> {
        let name = self
            .dir
            .resolve(folder)
            .ok_or_else(|| StoreError::NoSuchFolder(folder.to_owned()))?;
        let entries = self.dir.entries(&name)?;
        self.selected = Some(name);
        Ok(FolderSummary {
            total: entries.len(),
            unseen: entries.iter().filter(|e| !e.seen).count(),
        })
    }

    fn fetch_unseen_top(
        &mut self,
        top: usize,
    ) -> Result<Vec<(MessageHandle, RawMessage)>, StoreError> {
        let folder = self.selected()?.to_owned();
        if top == 0 {
            return Ok(Vec::new());
        }
        let fail = |e: std::io::Error| StoreError::FetchFailure(e.to_string());
        let mut dated = Vec::new();
        for e in self.dir.entries(&folder).map_err(fail)? {
            if e.seen {
                continue;
            }
            let bytes = e.read().map_err(fail)?;
            dated.push((e.sort_date(&bytes), (e.name.clone(), bytes, e.mtime())));
        }
        newest_first(&mut dated);
        dated
            .into_iter()
            .take(top)
            .map(|(_, (name, bytes, mtime))| {
                let mut raw = RawMessage::new(bytes, name.clone())
                    .map_err(|e| StoreError::FetchFailure(format!("{name}: {e}")))?;
                if let Some(t) = mtime {
                    raw = raw.with_received_at(t);
                }
                let handle = MessageHandle {
                    store_uid: name,
                    folder: folder.clone(),
                    seen: false,
                };
                Ok((handle, raw))
            })
            .collect()
    }

    fn apply_action(&mut self, action: &StoreAction) -> Result<(), StoreError> {
        let h = &action.handle;
        let fail = |e: std::io::Error| StoreError::ActionFailure(e.to_string());
        let entry = self
            .dir
            .find(&h.folder, &h.store_uid)
            .map_err(fail)?
            .ok_or_else(|| {
                StoreError::ActionFailure(format!("{} not found in {}", h.store_uid, h.folder))
            })?;
        match action.kind {
            ActionKind::MarkSeen => {
                self.dir.set_seen(&h.folder, &entry, true).map_err(fail)?;
            }
            ActionKind::MoveToLabel | ActionKind::MoveToTrash => {
                let target = action.destination()?;
                if target == h.folder {
                    self.dir.set_seen(&h.folder, &entry, true).map_err(fail)?;
                } else {
                    self.dir.move_to(&entry, target, true).map_err(fail)?;
                }
            }
        }
        Ok(())
    }

    fn logout(&mut self) -> Result<(), StoreError> {
        self.selected = None;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn msg(day: u32) -> Vec<u8> {
        format!("From: a@x\r\nDate: {day} Jan 2022 10:00:00 +0000\r\nSubject: s{day}\r\n\r\nhi")
            .into_bytes()
    }

    fn fixture(n: u32) -> tempfile::TempDir {
        let t = tempfile::tempdir().unwrap();
        fs::create_dir_all(t.path().join("Inbox/new")).unwrap();
        fs::create_dir_all(t.path().join("Inbox/cur")).unwrap();
        for d in 1..=n {
            fs::write(t.path().join(format!("Inbox/new/m{d:02}.eml")), msg(d)).unwrap();
        }
        t
    }

    #[test]
    fn select_counts_and_missing_folder() {
        let t = fixture(9);
        let mut s = FixtureStore::open(t.path()).unwrap();
        assert_eq!(
            s.select_folder("Inbox").unwrap(),
            FolderSummary {
                total: 9,
                unseen: 9
            }
        );
        assert!(matches!(
            s.select_folder("NoSuch"),
            Err(StoreError::NoSuchFolder(_))
        ));
        let empty = fixture(0);
        let mut s = FixtureStore::open(empty.path()).unwrap();
        assert_eq!(
            s.select_folder("Inbox").unwrap(),
            FolderSummary {
                total: 0,
                unseen: 0
            }
        );
    }

    #[test]
    fn fetch_takes_newest_and_does_not_mark_seen() {
        let t = fixture(12);
        let mut s = FixtureStore::open(t.path()).unwrap();
        s.select_folder("Inbox").unwrap();
        let got = s.fetch_unseen_top(9).unwrap();
        let names: Vec<_> = got.iter().map(|(h, _)| h.store_uid.as_str()).collect();
        // Dates are the day numbers, so newest first is 12 down to 4.
        let expected: Vec<String> = (4..=12).rev().map(|d| format!("m{d:02}.eml")).collect();
        assert_eq!(names, expected);
        assert_eq!(s.fetch_unseen_top(9).unwrap().len(), 9);
        assert!(s.fetch_unseen_top(0).unwrap().is_empty());
        assert_eq!(s.fetch_unseen_top(50).unwrap().len(), 12);
    }

    #[test]
    fn actions_move_files() {
        let t = fixture(3);
        let mut s = FixtureStore::open(t.path()).unwrap();
        s.select_folder("Inbox").unwrap();
        let got = s.fetch_unseen_top(3).unwrap();
        let h = |i: usize| got[i].0.clone();
        s.apply_action(&StoreAction::move_to_label(h(0), "Work"))
            .unwrap();
        s.apply_action(&StoreAction::move_to_trash(h(1), "Trash"))
            .unwrap();
        s.apply_action(&StoreAction::mark_seen(h(2))).unwrap();
        assert!(t.path().join("Work/cur/m03.eml").is_file());
        assert!(t.path().join("Trash/cur/m02.eml").is_file());
        assert!(t.path().join("Inbox/cur/m01.eml").is_file());
        assert_eq!(fs::read_dir(t.path().join("Inbox/new")).unwrap().count(), 0);
        assert!(matches!(
            s.apply_action(&StoreAction::mark_seen(h(0))),
            Err(StoreError::ActionFailure(_))
        ));
        s.select_folder("Inbox").unwrap();
        assert!(s.fetch_unseen_top(9).unwrap().is_empty());
    }
}
