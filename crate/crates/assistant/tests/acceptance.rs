//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode, Stdio};
use std::time::Instant;

use common::*;
use email_assistant::audit::{read_audit_log, Outcome};
use email_assistant::config::RunMode;
use email_assistant::store::{Credentials, LoopbackServer, ServerOptions, StoreMode};
use email_assistant::{run_pipeline, RunOutcome};
use email_assistant_core::encoding::{decode_base64, decode_quoted_printable, encode_base64};
use email_assistant_core::{
    classify_message, compute_speedup, normalize_text, parse_message, DecisionKind, DecisionReason,
    DefaultAction, RawMessage, RuleSet, RulesBundle, SenderBlocklist, Tally,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture_run(ws: &Workspace, mode: RunMode) -> RunOutcome {
    run_pipeline(&ws.config(mode), &Credentials::new("", ""), &clock()).expect("fixture run")
}

fn loopback_run(ws: &Workspace, move_supported: bool) -> (RunOutcome, Vec<String>) {
    let server = LoopbackServer::start(
        ws.mailbox(),
        0,
        ServerOptions {
            user: USER.into(),
            password: PASSWORD.into(),
            move_supported,
        },
    )
    .expect("loopback server");
    let mut cfg = ws.config(RunMode::Execute);
    cfg.store.mode = StoreMode::LoopbackPlain;
    cfg.store.server = "127.0.0.1".into();
    cfg.store.port = server.port();
    // The sample manifest is keyed by file name, which IMAP does not expose.
    cfg.manifest_path = None;
    let out =
        run_pipeline(&cfg, &Credentials::new(USER, PASSWORD), &clock()).expect("loopback run");
    let cmds = server.commands();
    server.shutdown();
    (out, cmds)
}

fn sample_workflow() -> Check {
    let ws = Workspace::sample();
    let t = Instant::now();
    let out = fixture_run(&ws, RunMode::Execute);
    let secs = t.elapsed().as_secs_f64();
    let r = &out.report;
    let mb = ws.mailbox();
    let files = ws.files();
    let got = [
        ("Work", folder_count(&mb, "Work")),
        ("Receipt", folder_count(&mb, "Receipt")),
        ("Trash", folder_count(&mb, "Trash")),
        ("Useful/Resumes", count_files(&files.join("Useful/Resumes"))),
        ("Useful/Bills", count_files(&files.join("Useful/Bills"))),
        (
            "Useful/Invoices",
            count_files(&files.join("Useful/Invoices")),
        ),
    ];
    let want = [3, 3, 3, 3, 2, 1];
    for ((name, n), w) in got.iter().zip(want) {
        ensure(*n == w, || format!("{name} holds {n}, expected {w}"))?;
    }
    let acc = r.accuracy.as_ref().ok_or("no accuracy in report")?;
    ensure(acc.accuracy == 1.0, || {
        format!("accuracy {} ({:?})", acc.accuracy, acc.mismatches)
    })?;
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!(
        "Work 3, Receipt 3, Trash 3, files 3/2/1, accuracy 1.0, {secs:.3} s"
    ))
}

fn baseline_metrics() -> Check {
    let ws = Workspace::sample();
    let r = fixture_run(&ws, RunMode::Execute).report;
    ensure(r.baseline_seconds == 702.0, || {
        format!("baseline {}", r.baseline_seconds)
    })?;
    ensure(r.elapsed_seconds > 0.0, || {
        format!("elapsed {}", r.elapsed_seconds)
    })?;
    let speedup = r.speedup.ok_or("speedup missing")?;
    let expect = 702.0 / r.elapsed_seconds;
    ensure((speedup - expect).abs() <= 1e-9 * expect, || {
        format!("speedup {speedup} != {expect}")
    })?;
    ensure(speedup > 1.0, || format!("speedup {speedup}"))?;
    let reference = compute_speedup(702.0, 75.0).ok_or("no reference speedup")?;
    ensure((reference - 9.36).abs() < 1e-12, || {
        format!("702/75 = {reference}")
    })?;
    Ok(format!(
        "baseline 702 s, elapsed {:.4} s, speedup {speedup:.0}, 702/75 = {reference}",
        r.elapsed_seconds
    ))
}

const PAYLOAD_SIZES: [usize; 20] = [
    0, 1, 2, 3, 57, 58, 76, 77, 255, 1000, 4095, 4096, 10_000, 65_535, 65_536, 100_003, 300_000,
    524_288, 777_777, 1_048_576,
];

fn byte_fidelity() -> Check {
    let ws = Workspace::empty();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut expected = BTreeMap::new();
    for (i, &size) in PAYLOAD_SIZES.iter().enumerate() {
        let mut payload = vec![0u8; size];
        rng.fill_bytes(&mut payload);
        let enc = if i % 2 == 0 {
            "base64"
        } else {
            "quoted-printable"
        };
        let name = format!("payload_{i:02}.bin");
        expected.insert(name.clone(), (hex::encode(Sha256::digest(&payload)), size));
        let msg = message_with_attachment(
            &format!("Sender {i} <s{i}@example.com>"),
            &format!("Invoice {i}"),
            "Mon, 10 Jan 2022 10:00:00 +0000",
            &name,
            &payload,
            enc,
        );
        fs::write(ws.inbox_new().join(format!("{i:02}.eml")), msg).unwrap();
    }
    let mut cfg = ws.config(RunMode::Execute);
    cfg.store.top = 100;
    let out = run_pipeline(&cfg, &Credentials::new("", ""), &clock()).map_err(|e| e.to_string())?;
    ensure(out.report.errors == 0, || {
        format!("{} errors", out.report.errors)
    })?;
    let saved: Vec<_> = out
        .records
        .iter()
        .flat_map(|r| &r.attachments)
        .filter_map(|a| a.saved.clone())
        .collect();
    ensure(saved.len() == 20, || format!("{} files saved", saved.len()))?;
    for rec in saved {
        let (hash, size) = expected
            .get(&rec.original_filename)
            .ok_or_else(|| format!("unexpected file {}", rec.original_filename))?;
        let on_disk = fs::read(&rec.saved_path).map_err(|e| e.to_string())?;
        let got = hex::encode(Sha256::digest(&on_disk));
        ensure(&got == hash && &rec.sha256 == hash, || {
            format!(
                "{} ({size} B): disk {got}, recorded {}, expected {hash}",
                rec.original_filename, rec.sha256
            )
        })?;
    }
    Ok("20 payloads, 0 B to 1 MiB, base64 and quoted-printable, all hashes equal".into())
}

fn is_subsequence(cmds: &[String], want: &[&str]) -> bool {
    let mut it = cmds.iter();
    want.iter().all(|w| it.any(|c| c.starts_with(w)))
}

fn protocol_conformance() -> Check {
    let direct = Workspace::sample();
    fixture_run(&direct, RunMode::Execute);
    let expect = tree_hash(&direct.mailbox());
    let expect_useful = tree_hash(&direct.files().join("Useful"));

    let mut notes = Vec::new();
    for move_supported in [true, false] {
        let ws = Workspace::sample();
        let (out, cmds) = loopback_run(&ws, move_supported);
        ensure(out.report.fetched == 9 && out.report.errors == 0, || {
            format!(
                "fetched {} errors {}",
                out.report.fetched, out.report.errors
            )
        })?;
        let moved = if move_supported {
            "UID MOVE"
        } else {
            "UID COPY"
        };
        let order = [
            "LOGIN",
            "SELECT",
            "UID SEARCH UNSEEN",
            "UID FETCH",
            moved,
            "LOGOUT",
        ];
        ensure(is_subsequence(&cmds, &order), || {
            format!("command order {cmds:?}")
        })?;
        if move_supported {
            ensure(
                !cmds
                    .iter()
                    .any(|c| c.contains("EXPUNGE") || c.contains("\\Deleted")),
                || format!("destructive commands with MOVE available: {cmds:?}"),
            )?;
        }
        let got = tree_hash(&ws.mailbox());
        ensure(got == expect, || {
            format!("mailbox differs (move={move_supported}): {got:?} vs {expect:?}")
        })?;
        ensure(
            tree_hash(&ws.files().join("Useful")) == expect_useful,
            || "saved files differ".into(),
        )?;
        notes.push(if move_supported {
            "MOVE"
        } else {
            "COPY/EXPUNGE fallback"
        });
    }
    Ok(format!("loopback == direct fixture ({})", notes.join(", ")))
}

/// Audit lines with the batch ID replaced and timestamps erased.
fn normalized_audit(out: &RunOutcome) -> Vec<serde_json::Value> {
    let text = fs::read_to_string(&out.audit_path)
        .unwrap()
        .replace(&out.report.batch_id, "BATCH");
    text.lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["timestamp"] = serde_json::Value::Null;
            v
        })
        .collect()
}

fn normalized_report(out: &RunOutcome) -> serde_json::Value {
    let mut v = serde_json::to_value(&out.report).unwrap();
    for k in ["batch_id", "elapsed_seconds", "speedup"] {
        v[k] = serde_json::Value::Null;
    }
    v
}

fn determinism() -> Check {
    let ws = Workspace::sample();
    let a = fixture_run(&ws, RunMode::DryRun);
    let b = fixture_run(&ws, RunMode::DryRun);
    let (la, lb) = (normalized_audit(&a), normalized_audit(&b));
    ensure(la.len() == 9, || format!("{} audit lines", la.len()))?;
    ensure(la == lb, || "dry-run audit logs differ".into())?;
    ensure(normalized_report(&a) == normalized_report(&b), || {
        "dry-run reports differ".into()
    })?;

    let first = fixture_run(&ws, RunMode::Execute);
    let second = fixture_run(&ws, RunMode::Execute);
    ensure(first.report.fetched == 9, || {
        format!("first execute fetched {}", first.report.fetched)
    })?;
    ensure(second.report.fetched == 0, || {
        format!("second execute fetched {}", second.report.fetched)
    })?;
    Ok("dry-run logs equal modulo batch/timestamps; second execute fetched 0".into())
}

fn raw(from: &str, subject: &str) -> email_assistant_core::ParsedMessage {
    let text = format!("From: {from}\r\nSubject: {subject}\r\nDate: Mon, 10 Jan 2022 10:00:00 +0000\r\n\r\nbody\r\n");
    let raw = RawMessage::new(text.into_bytes(), "p").unwrap();
    parse_message(&raw, 1, "B").unwrap()
}

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    })
}

/// Letters none of the default keywords can be spelled from.
fn filler() -> impl Strategy<Value = String> {
    "[xzqjkw0-9 ]{0,20}"
}

fn mixed_case(s: &str, mask: u64) -> String {
    s.chars()
        .enumerate()
        .map(|(i, c)| {
            if mask >> (i % 64) & 1 == 1 {
                c.to_ascii_uppercase()
            } else {
                c
            }
        })
        .collect()
}

fn properties() -> Check {
    let bundle = RulesBundle::builtin();
    let rules = &bundle.ruleset;
    let owners: Vec<(String, String)> = rules
        .rules()
        .iter()
        .flat_map(|r| r.keywords.iter().map(move |k| (k.clone(), r.label.clone())))
        .collect();
    let none = SenderBlocklist::default();
    let blocked = SenderBlocklist::from_addresses(["spam@junk.example"]);

    // (a) one keyword, any case, routes to its rule.
    runner()
        .run(
            &(0..owners.len(), any::<u64>(), filler(), filler()),
            |(i, mask, pre, post)| {
                let (kw, label) = &owners[i];
                let subject = format!("{pre} {} {post}", mixed_case(kw, mask));
                let d = classify_message(&raw("a@example.com", &subject), rules, &none);
                prop_assert_eq!(d.kind, DecisionKind::Route);
                prop_assert_eq!(d.label.as_deref(), Some(label.as_str()));
                Ok(())
            },
        )
        .map_err(|e| format!("(a) {e}"))?;

    // (b) partition identity over random batches and both default actions.
    let keep_rules = RuleSet::new(rules.rules().to_vec(), DefaultAction::Keep, "Trash").unwrap();
    let subject = prop_oneof![
        filler(),
        Just("Resume".to_owned()),
        Just("BILL due".to_owned()),
        Just("invoice".to_owned())
    ];
    runner()
        .run(
            &(
                proptest::collection::vec((subject, any::<bool>()), 0..30),
                any::<bool>(),
            ),
            |(batch, keep)| {
                let rs = if keep { &keep_rules } else { rules };
                let mut tally = Tally::default();
                for (s, spam) in &batch {
                    let from = if *spam {
                        "spam@junk.example"
                    } else {
                        "a@example.com"
                    };
                    tally.record(&classify_message(&raw(from, s), rs, &blocked));
                }
                let report = tally.into_report("B", 1.0, 78.0, true);
                prop_assert_eq!(report.fetched, batch.len() as u64);
                prop_assert!(report.partition_holds());
                Ok(())
            },
        )
        .map_err(|e| format!("(b) {e}"))?;

    // (c) a blocklisted sender is trashed whatever the subject says.
    runner()
        .run(
            &(0..owners.len(), any::<u64>(), filler(), any::<bool>()),
            |(i, mask, pre, upper)| {
                let from = if upper {
                    "SPAM@Junk.Example"
                } else {
                    "spam@junk.example"
                };
                let subject = format!("{pre} {}", mixed_case(&owners[i].0, mask));
                let d = classify_message(&raw(from, &subject), rules, &blocked);
                prop_assert_eq!(d.kind, DecisionKind::Trash);
                prop_assert_eq!(d.reason, DecisionReason::Blocklist);
                Ok(())
            },
        )
        .map_err(|e| format!("(c) {e}"))?;

    // (d) normalizing twice changes nothing.
    runner()
        .run(&any::<String>(), |s| {
            let once = normalize_text(&s).into_string();
            prop_assert_eq!(normalize_text(&once).into_string(), once);
            Ok(())
        })
        .map_err(|e| format!("(d) {e}"))?;

    // (e) transfer encodings against the base64 crate and an independent
    // quoted-printable encoder.
    runner()
        .run(&proptest::collection::vec(any::<u8>(), 0..2048), |bytes| {
            use base64::Engine;
            let std_b64 = base64::engine::general_purpose::STANDARD;
            prop_assert_eq!(
                decode_base64(b64_encode(&bytes).as_bytes()).unwrap(),
                bytes.clone()
            );
            prop_assert_eq!(
                std_b64
                    .decode(encode_base64(&bytes).replace("\r\n", ""))
                    .unwrap(),
                bytes.clone()
            );
            prop_assert_eq!(
                decode_quoted_printable(qp_encode(&bytes).as_bytes()).unwrap(),
                bytes
            );
            Ok(())
        })
        .map_err(|e| format!("(e) {e}"))?;

    Ok(
        "(a) routing (b) partition (c) blocklist (d) normalize (e) base64/QP, 1000 cases each"
            .into(),
    )
}

fn safety() -> Check {
    // Secrets: run the binary over IMAP with verbose logging and scan
    // everything it wrote.
    let ws = Workspace::sample();
    let server = LoopbackServer::start(
        ws.mailbox(),
        0,
        ServerOptions {
            user: USER.into(),
            password: PASSWORD.into(),
            move_supported: true,
        },
    )
    .map_err(|e| e.to_string())?;
    let cfg = ws.path().join("imap.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"store": {{"server": "127.0.0.1", "port": {}, "mode": "loopback_plain"}},
                "rules_path": "rules.json", "blocklist_path": "blocklist.txt",
                "layout_root": "out/files", "report_dir": "out/reports"}}"#,
            server.port()
        ),
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_email-assistant"))
        .args(["--config", &cfg.display().to_string(), "--execute"])
        .current_dir(ws.path())
        .env("EMAIL_ASSISTANT_USER", USER)
        .env("EMAIL_ASSISTANT_PASS", PASSWORD)
        .env("RUST_LOG", "trace")
        .stdin(Stdio::null())
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || {
        format!(
            "cli exit {:?}: {}",
            o.status.code(),
            String::from_utf8_lossy(&o.stderr)
        )
    })?;
    let needle = PASSWORD.as_bytes();
    let in_stream = |b: &[u8]| b.windows(needle.len()).any(|w| w == needle);
    ensure(!in_stream(&o.stdout) && !in_stream(&o.stderr), || {
        "password in CLI output".into()
    })?;
    let hits = scan_for(&ws.reports(), needle);
    ensure(hits.is_empty(), || format!("password in {hits:?}"))?;
    ensure(
        !server.commands().iter().any(|c| c.contains(PASSWORD)),
        || "password in server log".into(),
    )?;
    let traces = fs::read_dir(ws.reports())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .ends_with(".trace.log")
        })
        .count();
    ensure(traces == 1, || format!("{traces} traces written"))?;
    server.shutdown();

    // Dry run purity, with a pre-existing layout tree.
    let ws = Workspace::sample();
    let existing = ws
        .files()
        .join("Useful/Resumes/John_Doe_unknown_2022-01-10.pdf");
    fs::create_dir_all(existing.parent().unwrap()).unwrap();
    fs::write(&existing, b"already here").unwrap();
    let fixture = tree_hash(&ws.mailbox());
    let layout = tree_hash(&ws.files());
    let out = fixture_run(&ws, RunMode::DryRun);
    ensure(
        out.records
            .iter()
            .flat_map(|r| &r.actions)
            .all(|a| a.outcome == Outcome::Planned),
        || "dry run performed an action".into(),
    )?;
    ensure(tree_hash(&ws.mailbox()) == fixture, || {
        "dry run changed the fixture".into()
    })?;
    ensure(tree_hash(&ws.files()) == layout, || {
        "dry run changed the layout".into()
    })?;
    ensure(
        read_audit_log(&out.audit_path)
            .map(|r| r.len())
            .unwrap_or(0)
            == 9,
        || "audit log".into(),
    )?;
    Ok("no password in logs, reports or traces; dry run left both trees unchanged".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("sample workflow", sample_workflow),
        ("baseline metrics", baseline_metrics),
        ("byte fidelity", byte_fidelity),
        ("protocol conformance", protocol_conformance),
        ("determinism and idempotence", determinism),
        ("property suites", properties),
        ("safety", safety),
    ];
    // Panics inside a check are reported as its failure.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        match result {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
