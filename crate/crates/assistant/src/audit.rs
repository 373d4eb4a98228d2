//! Per-batch audit trail: one JSON line per fetched message, plus the run
//! report and protocol trace written next to it.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use email_assistant_core::{format_batch_id, Decision, Eligibility, RunReport};
use serde::{Deserialize, Serialize};

use crate::filing::SavedFileRecord;
use crate::store::ActionKind;

pub trait Clock {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

/// `B<yyyymmddThhmmssZ>-<4 hex>`.
pub fn open_batch(clock: &dyn Clock) -> String {
    format_batch_id(clock.now(), rand::random::<u16>())
}

/// Like [`open_batch`], but redraws while `report_dir` already holds a log
/// for the ID, so two batches in the same second never share a file.
pub fn open_fresh_batch(clock: &dyn Clock, report_dir: &Path) -> String {
    let mut id = open_batch(clock);
    for _ in 0..64 {
        if !audit_path(report_dir, &id).exists() {
            break;
        }
        id = open_batch(clock);
    }
    id
}

pub fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Done,
    Planned,
    Skipped,
    Failed,
}

/// A store action as attempted (or, in a dry run, planned).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub kind: ActionKind,
    pub target: Option<String>,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// What happened to one attachment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttachmentOutcome {
    pub original_filename: String,
    /// `Useful/<folder>`, `Useful`, `NotUseful`, or `Skipped`.
    pub category: String,
    pub eligibility: Eligibility,
    pub planned_path: Option<PathBuf>,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saved: Option<SavedFileRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftOutcome {
    pub path: PathBuf,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One fetched message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub batch_id: String,
    pub unique_id: String,
    pub timestamp: String,
    pub source: String,
    pub folder: String,
    pub message_id: Option<String>,
    pub sender: String,
    pub recipients: Vec<String>,
    pub subject: String,
    pub message_date: Option<String>,
    pub decision: Decision,
    pub actions: Vec<ActionOutcome>,
    pub attachments: Vec<AttachmentOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draft: Option<DraftOutcome>,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Append-only JSONL sink. Each record is written with a single call so a
/// crash never leaves half a line followed by more records.
#[derive(Debug)]
pub struct AuditLog {
    file: File,
    path: PathBuf,
}

impl AuditLog {
    pub fn create(report_dir: &Path, batch_id: &str) -> io::Result<Self> {
        fs::create_dir_all(report_dir)?;
        let path = audit_path(report_dir, batch_id);
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { file, path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &AuditRecord) -> io::Result<()> {
        let mut line = serde_json::to_vec(record).map_err(io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()
    }
}

pub fn read_audit_log(path: &Path) -> io::Result<Vec<AuditRecord>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(io::Error::other))
        .collect()
}

pub fn audit_path(report_dir: &Path, batch_id: &str) -> PathBuf {
    report_dir.join(format!("{batch_id}.audit.jsonl"))
}

pub fn report_path(report_dir: &Path, batch_id: &str) -> PathBuf {
    report_dir.join(format!("{batch_id}.report.json"))
}

pub fn trace_path(report_dir: &Path, batch_id: &str) -> PathBuf {
    report_dir.join(format!("{batch_id}.trace.log"))
}

pub fn write_report(report_dir: &Path, report: &RunReport) -> io::Result<PathBuf> {
    fs::create_dir_all(report_dir)?;
    let path = report_path(report_dir, &report.batch_id);
    let mut text = report.to_json_pretty();
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use email_assistant_core::DecisionReason;

    fn record(batch: &str, n: u32) -> AuditRecord {
        AuditRecord {
            batch_id: batch.into(),
            unique_id: format!("{batch}-{n:06}"),
            timestamp: timestamp(Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap()),
            source: format!("m{n}.eml"),
            folder: "Inbox".into(),
            message_id: None,
            sender: "a@x".into(),
            recipients: vec!["b@y".into()],
            subject: "line\nbreak".into(),
            message_date: None,
            decision: Decision::trash(DecisionReason::Default),
            actions: vec![],
            attachments: vec![],
            draft: None,
            warnings: vec![],
            error: None,
        }
    }

    #[test]
    fn batch_ids_follow_the_format() {
        let c = FixedClock(Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap());
        let id = open_batch(&c);
        assert!(id.starts_with("B20220101T000000Z-"), "{id}");
        let suffix = &id["B20220101T000000Z-".len()..];
        assert_eq!(suffix.len(), 4);
        assert!(suffix.chars().all(|c| c.is_ascii_hexdigit()));
        // 16 random bits each; 20 draws all colliding is astronomically unlikely.
        let ids: std::collections::HashSet<_> = (0..20).map(|_| open_batch(&c)).collect();
        assert!(ids.len() > 1);
    }

    #[test]
    fn log_is_one_line_per_record_and_append_only() {
        let t = tempfile::tempdir().unwrap();
        let mut log = AuditLog::create(t.path(), "B1").unwrap();
        log.append(&record("B1", 1)).unwrap();
        log.append(&record("B1", 2)).unwrap();
        drop(log);
        let mut log = AuditLog::create(t.path(), "B1").unwrap();
        log.append(&record("B1", 3)).unwrap();
        let text = fs::read_to_string(log.path()).unwrap();
        assert_eq!(text.lines().count(), 3);
        let back = read_audit_log(log.path()).unwrap();
        assert_eq!(back[0], record("B1", 1));
        assert_eq!(back[2].unique_id, "B1-000003");
    }

    #[test]
    fn fresh_batch_avoids_existing_logs() {
        let t = tempfile::tempdir().unwrap();
        let c = FixedClock(Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap());
        let taken: std::collections::HashSet<String> = (0..200).map(|_| open_batch(&c)).collect();
        for id in &taken {
            fs::write(audit_path(t.path(), id), "").unwrap();
        }
        for _ in 0..20 {
            assert!(!taken.contains(&open_fresh_batch(&c, t.path())));
        }
    }
}
