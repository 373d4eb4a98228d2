//! Run metrics: manual-processing baseline, speedup, accuracy against a
//! labelled manifest, and the run report itself.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::rules::{Decision, DecisionKind};

/// Average time a person spends handling one e-mail by hand.
pub const MANUAL_SECONDS_PER_EMAIL: f64 = 78.0;

/// Seconds a person would need for `n_emails`, at 78 s each.
pub fn manual_baseline(n_emails: u64) -> f64 {
    manual_baseline_with(n_emails, MANUAL_SECONDS_PER_EMAIL)
}

pub fn manual_baseline_with(n_emails: u64, seconds_per_email: f64) -> f64 {
    n_emails as f64 * seconds_per_email
}

/// `baseline / elapsed`, or `None` when either side is not a positive
/// finite number.
pub fn compute_speedup(baseline_seconds: f64, elapsed_seconds: f64) -> Option<f64> {
    let ok = |x: f64| x.is_finite() && x > 0.0;
    (ok(baseline_seconds) && ok(elapsed_seconds)).then(|| baseline_seconds / elapsed_seconds)
}

/// `B<yyyymmdd>T<hhmmss>Z-<4 hex>`.
pub fn format_batch_id(now: DateTime<Utc>, disambiguator: u16) -> String {
    format!("B{}-{:04x}", now.format("%Y%m%dT%H%M%SZ"), disambiguator)
}

/// Expected outcome label per message: a route label, `"trash"` or
/// `"keep"`. Keys are fixture file names or Message-IDs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExpectedLabelManifest {
    pub entries: BTreeMap<String, String>,
}

impl ExpectedLabelManifest {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One processed message as seen by the accuracy check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedMessage {
    /// Names the manifest may know the message by, most specific first.
    pub keys: Vec<String>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub key: String,
    pub expected: String,
    /// `None` when the manifest entry was never processed.
    pub actual: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub accuracy: f64,
    pub matched: u64,
    pub total: u64,
    pub mismatches: Vec<Mismatch>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("processed message {key:?} is not in the manifest")]
pub struct ManifestMismatch {
    pub key: String,
}

/// Fraction of manifest entries whose processed outcome matches.
///
/// Every processed message must appear in the manifest. Entries that were
/// never processed count as mismatches. An empty manifest with an empty run
/// scores 1.0.
pub fn evaluate_accuracy(
    outcomes: &[ClassifiedMessage],
    manifest: &ExpectedLabelManifest,
) -> Result<AccuracyReport, ManifestMismatch> {
    let mut actual: BTreeMap<&str, &str> = BTreeMap::new();
    for o in outcomes {
        let key = o
            .keys
            .iter()
            .find(|k| manifest.entries.contains_key(k.as_str()))
            .ok_or_else(|| ManifestMismatch {
                key: o.keys.first().cloned().unwrap_or_default(),
            })?;
        actual.entry(key.as_str()).or_insert(o.label.as_str());
    }

    let mut matched = 0u64;
    let mut mismatches = Vec::new();
    for (key, expected) in &manifest.entries {
        match actual.get(key.as_str()) {
            Some(a) if a.eq_ignore_ascii_case(expected) => matched += 1,
            other => mismatches.push(Mismatch {
                key: key.clone(),
                expected: expected.clone(),
                actual: other.map(|s| (*s).to_owned()),
            }),
        }
    }
    let total = manifest.len() as u64;
    let accuracy = if total == 0 {
        1.0
    } else {
        matched as f64 / total as f64
    };
    Ok(AccuracyReport {
        accuracy,
        matched,
        total,
        mismatches,
    })
}

/// Per-batch counters. Every recorded decision lands in exactly one bucket,
/// so `fetched == Σ routed + trashed + kept` by construction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tally {
    pub routed: BTreeMap<String, u64>,
    pub trashed: u64,
    pub kept: u64,
    pub attachments_saved: u64,
    pub errors: u64,
}

impl Tally {
    pub fn record(&mut self, decision: &Decision) {
        match decision.kind {
            DecisionKind::Route => {
                let label = decision.label.clone().unwrap_or_default();
                *self.routed.entry(label).or_default() += 1;
            }
            DecisionKind::Trash => self.trashed += 1,
            DecisionKind::Keep => self.kept += 1,
        }
    }

    pub fn fetched(&self) -> u64 {
        self.routed.values().sum::<u64>() + self.trashed + self.kept
    }

    /// Closes the tally into a report.
    pub fn into_report(
        self,
        batch_id: &str,
        elapsed_seconds: f64,
        seconds_per_email: f64,
        dry_run: bool,
    ) -> RunReport {
        let fetched = self.fetched();
        let baseline_seconds = manual_baseline_with(fetched, seconds_per_email);
        RunReport {
            batch_id: batch_id.to_owned(),
            fetched,
            routed_counts: self.routed,
            trashed: self.trashed,
            kept: self.kept,
            attachments_saved: self.attachments_saved,
            elapsed_seconds,
            baseline_seconds,
            speedup: compute_speedup(baseline_seconds, elapsed_seconds),
            errors: self.errors,
            dry_run,
            accuracy: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub batch_id: String,
    pub fetched: u64,
    pub routed_counts: BTreeMap<String, u64>,
    pub trashed: u64,
    pub kept: u64,
    pub attachments_saved: u64,
    pub elapsed_seconds: f64,
    pub baseline_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speedup: Option<f64>,
    pub errors: u64,
    pub dry_run: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<AccuracyReport>,
}

impl RunReport {
    /// `fetched == Σ routed + trashed + kept`.
    pub fn partition_holds(&self) -> bool {
        self.fetched == self.routed_counts.values().sum::<u64>() + self.trashed + self.kept
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_else(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::DecisionReason;
    use alloc::vec;
    use chrono::TimeZone;
    use proptest::prelude::*;

    #[test]
    fn baseline_values() {
        assert_eq!(manual_baseline(9), 702.0);
        assert_eq!(manual_baseline(1), 78.0);
        assert_eq!(manual_baseline(0), 0.0);
    }

    #[test]
    fn speedup_values() {
        let s = compute_speedup(702.0, 75.0).unwrap();
        assert!((s - 9.36).abs() < 1e-12, "{s}");
        assert_eq!(compute_speedup(3.5, 3.5), Some(1.0));
        assert_eq!(compute_speedup(702.0, 0.0), None);
        assert_eq!(compute_speedup(0.0, 1.0), None);
    }

    #[test]
    fn batch_id_format() {
        let t = Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap();
        assert_eq!(format_batch_id(t, 0xbeef), "B20220101T000000Z-beef");
        assert_eq!(format_batch_id(t, 7), "B20220101T000000Z-0007");
        assert_ne!(format_batch_id(t, 1), format_batch_id(t, 2));
    }

    fn outcome(key: &str, label: &str) -> ClassifiedMessage {
        ClassifiedMessage {
            keys: vec![key.into()],
            label: label.into(),
        }
    }

    fn manifest(n: usize) -> ExpectedLabelManifest {
        ExpectedLabelManifest {
            entries: (0..n)
                .map(|i| (format!("m{i}.eml"), "Work".to_owned()))
                .collect(),
        }
    }

    #[test]
    fn accuracy_all_match() {
        let outs: Vec<_> = (0..9)
            .map(|i| outcome(&format!("m{i}.eml"), "work"))
            .collect();
        let r = evaluate_accuracy(&outs, &manifest(9)).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert!(r.mismatches.is_empty());
    }

    #[test]
    fn accuracy_one_wrong() {
        let mut outs: Vec<_> = (0..9)
            .map(|i| outcome(&format!("m{i}.eml"), "Work"))
            .collect();
        outs[4].label = "trash".into();
        let r = evaluate_accuracy(&outs, &manifest(9)).unwrap();
        assert!((r.accuracy - 0.8889).abs() < 1e-4);
        assert_eq!(r.mismatches.len(), 1);
        assert_eq!(r.mismatches[0].actual.as_deref(), Some("trash"));
    }

    #[test]
    fn accuracy_requires_manifest_coverage() {
        let outs = vec![outcome("x.eml", "Work")];
        assert_eq!(
            evaluate_accuracy(&outs, &ExpectedLabelManifest::default()),
            Err(ManifestMismatch {
                key: "x.eml".into()
            })
        );
        let r = evaluate_accuracy(&[], &manifest(2)).unwrap();
        assert_eq!(r.accuracy, 0.0);
        assert!(r.mismatches.iter().all(|m| m.actual.is_none()));
    }

    #[test]
    fn accuracy_uses_any_known_key() {
        let o = ClassifiedMessage {
            keys: vec!["17".into(), "<id@x>".into()],
            label: "trash".into(),
        };
        let m = ExpectedLabelManifest::from_json(r#"{"<id@x>": "trash"}"#).unwrap();
        assert_eq!(evaluate_accuracy(&[o], &m).unwrap().accuracy, 1.0);
    }

    #[test]
    fn empty_tally_report() {
        let r = Tally::default().into_report("B", 0.0, MANUAL_SECONDS_PER_EMAIL, false);
        assert_eq!(r.fetched, 0);
        assert_eq!(r.baseline_seconds, 0.0);
        assert_eq!(r.speedup, None);
        assert!(r.partition_holds());
        assert!(!r.to_json_pretty().contains("speedup"));
    }

    #[test]
    fn nine_message_tally() {
        let mut t = Tally::default();
        for _ in 0..3 {
            t.record(&Decision::route("Work", 1, "resume"));
            t.record(&Decision::route("Receipt", 2, "bill"));
            t.record(&Decision::trash(DecisionReason::Default));
        }
        let r = t.into_report("B", 0.5, MANUAL_SECONDS_PER_EMAIL, true);
        assert_eq!(r.routed_counts.get("Work"), Some(&3));
        assert_eq!(r.routed_counts.get("Receipt"), Some(&3));
        assert_eq!(r.trashed, 3);
        assert_eq!(r.baseline_seconds, 702.0);
        assert_eq!(r.speedup, Some(1404.0));
        let back: RunReport = serde_json::from_str(&r.to_json_pretty()).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn baseline_is_linear(a in 0u64..1_000_000, b in 0u64..1_000_000) {
            prop_assert_eq!(manual_baseline(a + b), manual_baseline(a) + manual_baseline(b));
        }

        #[test]
        fn tally_partitions(kinds in proptest::collection::vec(0u8..4, 0..200)) {
            let mut t = Tally::default();
            for k in &kinds {
                let d = match k {
                    0 => Decision::route("Work", 1, "resume"),
                    1 => Decision::route("Receipt", 2, "bill"),
                    2 => Decision::trash(DecisionReason::Default),
                    _ => Decision::keep(),
                };
                t.record(&d);
            }
            let r = t.into_report("B", 1.0, MANUAL_SECONDS_PER_EMAIL, false);
            prop_assert_eq!(r.fetched, kinds.len() as u64);
            prop_assert!(r.partition_holds());
        }
    }
}
