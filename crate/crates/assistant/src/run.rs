//! One triage batch: fetch, classify, act, file attachments, draft
//! invitations, audit, report.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use email_assistant_core::{
    classify_attachment_useful, classify_message, evaluate_accuracy, invitation_file_name,
    load_ruleset, normalize_text, parse_message, render_invitation, render_rename,
    sanitize_filename, screen_eligibility, split_extension, ClassifiedMessage, Decision,
    DecisionKind, DecisionReason, Eligibility, ExpectedLabelManifest, ParsedMessage, RawMessage,
    RulesBundle, RunReport, SenderBlocklist, Tally,
};

use crate::audit::{
    self, ActionOutcome, AttachmentOutcome, AuditLog, AuditRecord, Clock, DraftOutcome, Outcome,
};
use crate::config::{AppConfig, ConfigError, CredentialError};
use crate::filing::{self, resolve_collision_excluding, DirectoryLayout};
use crate::store::{
    connect_and_authenticate, Credentials, MailStore, MessageHandle, StoreAction, StoreError,
};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("rules: {0}")]
    Rules(String),
    #[error(transparent)]
    Credentials(#[from] CredentialError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot write audit output: {0}")]
    Output(#[source] io::Error),
}

impl RunError {
    /// 2 config, 3 auth, 4 connect/fetch, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Rules(_) => 2,
            RunError::Credentials(CredentialError::NoCredentials) => 3,
            RunError::Credentials(_) => 2,
            RunError::Store(StoreError::AuthFailure(_)) => 3,
            RunError::Store(StoreError::InsecureTransport(_)) => 2,
            RunError::Store(_) => 4,
            RunError::Output(_) => 1,
        }
    }
}

/// Everything read from disk before connecting.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub rules: RulesBundle,
    pub blocklist: SenderBlocklist,
    pub manifest: Option<ExpectedLabelManifest>,
}

fn read(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(|source| {
        RunError::Config(ConfigError::Read {
            path: path.to_owned(),
            source,
        })
    })
}

pub fn load_inputs(cfg: &AppConfig) -> Result<Inputs, RunError> {
    let rules = match &cfg.rules_path {
        Some(p) => {
            load_ruleset(&read(p)?).map_err(|e| RunError::Rules(format!("{}: {e}", p.display())))?
        }
        None => RulesBundle::builtin(),
    };
    let blocklist = match &cfg.blocklist_path {
        Some(p) => SenderBlocklist::parse(&read(p)?),
        None => SenderBlocklist::default(),
    };
    let manifest = match &cfg.manifest_path {
        Some(p) => Some(ExpectedLabelManifest::from_json(&read(p)?).map_err(|e| {
            RunError::Config(ConfigError::Semantic(format!(
                "manifest {}: {e}",
                p.display()
            )))
        })?),
        None => None,
    };
    Ok(Inputs {
        rules,
        blocklist,
        manifest,
    })
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub records: Vec<AuditRecord>,
    pub audit_path: PathBuf,
    pub report_path: PathBuf,
    pub trace_path: Option<PathBuf>,
}

/// Connects per `cfg.store` and runs one batch.
pub fn run_pipeline(
    cfg: &AppConfig,
    creds: &Credentials,
    clock: &dyn Clock,
) -> Result<RunOutcome, RunError> {
    let inputs = load_inputs(cfg)?;
    let mut store = connect_and_authenticate(&cfg.store, creds)?;
    run_with_store(cfg, &inputs, store.as_mut(), clock)
}

fn write_trace(store: &dyn MailStore, report_dir: &Path, batch_id: &str) -> Option<PathBuf> {
    let trace = store.trace()?;
    let path = audit::trace_path(report_dir, batch_id);
    match fs::create_dir_all(report_dir).and_then(|_| fs::write(&path, trace.to_text())) {
        Ok(()) => Some(path),
        Err(e) => {
            log::warn!("cannot write protocol trace {}: {e}", path.display());
            None
        }
    }
}

/// Runs one batch against an open session.
pub fn run_with_store(
    cfg: &AppConfig,
    inputs: &Inputs,
    store: &mut dyn MailStore,
    clock: &dyn Clock,
) -> Result<RunOutcome, RunError> {
    let batch_id = audit::open_fresh_batch(clock, &cfg.report_dir);
    let result = Batch::new(cfg, inputs, clock, batch_id.clone()).run(store);
    let trace_path = write_trace(store, &cfg.report_dir, &batch_id);
    if let Err(e) = store.logout() {
        log::warn!("logout failed: {e}");
    }
    let (report, records, audit_path) = result?;
    let report_path = audit::write_report(&cfg.report_dir, &report).map_err(RunError::Output)?;
    Ok(RunOutcome {
        report,
        records,
        audit_path,
        report_path,
        trace_path,
    })
}

struct Batch<'a> {
    cfg: &'a AppConfig,
    inputs: &'a Inputs,
    clock: &'a dyn Clock,
    batch_id: String,
    dry_run: bool,
    layout: DirectoryLayout,
    /// Paths planned earlier in this batch (dry runs never create them).
    reserved: HashSet<PathBuf>,
    tally: Tally,
    classified: Vec<ClassifiedMessage>,
}

impl<'a> Batch<'a> {
    fn new(cfg: &'a AppConfig, inputs: &'a Inputs, clock: &'a dyn Clock, batch_id: String) -> Self {
        Self {
            cfg,
            inputs,
            clock,
            batch_id,
            dry_run: cfg.dry_run(),
            layout: DirectoryLayout::new(&cfg.layout_root),
            reserved: HashSet::new(),
            tally: Tally::default(),
            classified: Vec::new(),
        }
    }

    fn run(
        mut self,
        store: &mut dyn MailStore,
    ) -> Result<(RunReport, Vec<AuditRecord>, PathBuf), RunError> {
        let summary = store.select_folder(&self.cfg.store.mail_folder)?;
        log::info!(
            "batch {}: {} has {} messages, {} unseen",
            self.batch_id,
            self.cfg.store.mail_folder,
            summary.total,
            summary.unseen
        );
        let mut log =
            AuditLog::create(&self.cfg.report_dir, &self.batch_id).map_err(RunError::Output)?;
        if !self.dry_run {
            let folders = self
                .inputs
                .rules
                .attachment
                .subfolders
                .iter()
                .map(|s| s.folder.as_str());
            if let Err(e) = self.layout.ensure(folders) {
                log::error!("{e}");
                self.tally.errors += 1;
            }
        }

        let started = Instant::now();
        let fetched = store.fetch_unseen_top(self.cfg.store.top)?;
        let mut records = Vec::with_capacity(fetched.len());
        for (i, (handle, raw)) in fetched.into_iter().enumerate() {
            let record = self.process(store, i as u64 + 1, handle, &raw);
            log.append(&record).map_err(RunError::Output)?;
            records.push(record);
        }
        let elapsed = started.elapsed().as_secs_f64();

        let mut tally = std::mem::take(&mut self.tally);
        let accuracy = match &self.inputs.manifest {
            Some(m) => match evaluate_accuracy(&self.classified, m) {
                Ok(a) => Some(a),
                Err(e) => {
                    log::error!("message {:?} is not in the manifest", e.key);
                    tally.errors += 1;
                    None
                }
            },
            None => None,
        };
        let mut report = tally.into_report(
            &self.batch_id,
            elapsed,
            self.cfg.manual_seconds_per_email,
            self.dry_run,
        );
        report.accuracy = accuracy;
        Ok((report, records, log.path().to_owned()))
    }

    fn act(&mut self, store: &mut dyn MailStore, action: StoreAction) -> ActionOutcome {
        let (outcome, error) = if self.dry_run {
            (Outcome::Planned, None)
        } else {
            match store.apply_action(&action) {
                Ok(()) => (Outcome::Done, None),
                Err(e) => {
                    log::error!("{:?} {}: {e}", action.kind, action.handle.store_uid);
                    self.tally.errors += 1;
                    (Outcome::Failed, Some(e.to_string()))
                }
            }
        };
        ActionOutcome {
            kind: action.kind,
            target: action.target,
            outcome,
            error,
        }
    }

    fn process(
        &mut self,
        store: &mut dyn MailStore,
        seq: u64,
        handle: MessageHandle,
        raw: &RawMessage,
    ) -> AuditRecord {
        let now = audit::timestamp(self.clock.now());
        let msg = match parse_message(raw, seq, &self.batch_id) {
            Ok(m) => m,
            Err(e) => {
                // Unreadable mail stays in place, flagged so it is not refetched.
                log::error!("{}: {e}", handle.store_uid);
                let decision = Decision::keep();
                self.tally.record(&decision);
                self.tally.errors += 1;
                self.classified.push(ClassifiedMessage {
                    keys: vec![raw.source_handle().to_owned()],
                    label: decision.outcome_label().to_owned(),
                });
                let action = self.act(store, StoreAction::mark_seen(handle.clone()));
                return AuditRecord {
                    batch_id: self.batch_id.clone(),
                    unique_id: email_assistant_core::assign_unique_id(&self.batch_id, seq),
                    timestamp: now,
                    source: handle.store_uid,
                    folder: handle.folder,
                    message_id: None,
                    sender: String::new(),
                    recipients: Vec::new(),
                    subject: String::new(),
                    message_date: None,
                    decision,
                    actions: vec![action],
                    attachments: Vec::new(),
                    draft: None,
                    warnings: Vec::new(),
                    error: Some(e.to_string()),
                };
            }
        };

        let rules = &self.inputs.rules;
        let decision = classify_message(&msg, &rules.ruleset, &self.inputs.blocklist);
        self.tally.record(&decision);
        let mut keys = vec![raw.source_handle().to_owned()];
        if let Some(id) = &msg.message_id {
            keys.push(id.clone());
            keys.push(id.trim_matches(['<', '>']).to_owned());
        }
        self.classified.push(ClassifiedMessage {
            keys,
            label: decision.outcome_label().to_owned(),
        });

        let mut actions = Vec::new();
        match decision.kind {
            DecisionKind::Route => {
                let label = decision.label.as_deref().unwrap_or_default();
                actions.push(self.act(store, StoreAction::move_to_label(handle.clone(), label)));
            }
            DecisionKind::Trash => {
                let trash = rules.ruleset.trash_folder.clone();
                actions.push(self.act(store, StoreAction::move_to_trash(handle.clone(), &trash)));
            }
            DecisionKind::Keep => {}
        }

        let attachments = self.file_attachments(&msg, &decision);
        let draft = self.draft(&msg, &attachments);

        if decision.kind == DecisionKind::Keep {
            actions.push(self.act(store, StoreAction::mark_seen(handle.clone())));
        }

        AuditRecord {
            batch_id: self.batch_id.clone(),
            unique_id: msg.unique_id.clone(),
            timestamp: now,
            source: handle.store_uid,
            folder: handle.folder,
            message_id: msg.message_id.clone(),
            sender: msg.sender.clone(),
            recipients: msg.recipients.clone(),
            subject: msg.subject.clone(),
            message_date: Some(audit::timestamp(msg.date)),
            decision,
            actions,
            attachments,
            draft,
            warnings: msg.warnings.iter().map(ToString::to_string).collect(),
            error: None,
        }
    }

    fn file_attachments(
        &mut self,
        msg: &ParsedMessage,
        decision: &Decision,
    ) -> Vec<AttachmentOutcome> {
        let arules = &self.inputs.rules.attachment;
        let subject = normalize_text(&msg.subject);
        let mut out = Vec::with_capacity(msg.attachments.len());
        for att in &msg.attachments {
            if decision.reason == DecisionReason::Blocklist {
                out.push(AttachmentOutcome {
                    original_filename: att.filename.clone(),
                    category: "Skipped".into(),
                    eligibility: Eligibility::NotApplicable,
                    planned_path: None,
                    outcome: Outcome::Skipped,
                    saved: None,
                    error: None,
                });
                continue;
            }
            let class = classify_attachment_useful(att, &subject, arules);
            let eligibility = screen_eligibility(att, &class, arules);
            let category = class.category();
            if !class.useful && !self.cfg.save_not_useful {
                out.push(AttachmentOutcome {
                    original_filename: att.filename.clone(),
                    category,
                    eligibility,
                    planned_path: None,
                    outcome: Outcome::Skipped,
                    saved: None,
                    error: None,
                });
                continue;
            }
            let dir = if class.useful {
                self.layout.category_dir(class.folder.as_deref())
            } else {
                self.layout.not_useful_dir()
            };
            let clean = sanitize_filename(&att.filename);
            let name = if class.folder.as_deref() == Some(arules.resume_folder.as_str()) {
                let (_, ext) = split_extension(&clean);
                render_rename(
                    &self.cfg.rename_template,
                    msg.candidate_name(),
                    self.cfg.highest_qualification.as_deref(),
                    msg.date.date_naive(),
                    ext,
                )
            } else {
                clean
            };

            let mut outcome = AttachmentOutcome {
                original_filename: att.filename.clone(),
                category: category.clone(),
                eligibility,
                planned_path: None,
                outcome: Outcome::Planned,
                saved: None,
                error: None,
            };
            let final_name = match resolve_collision_excluding(&dir, &name, &self.reserved) {
                Ok(n) => n,
                Err(e) => {
                    log::error!("{e}");
                    self.tally.errors += 1;
                    outcome.outcome = Outcome::Failed;
                    outcome.error = Some(e.to_string());
                    out.push(outcome);
                    continue;
                }
            };
            let path = dir.join(&final_name);
            outcome.planned_path = Some(path.clone());
            if self.dry_run {
                self.reserved.insert(path);
                self.tally.attachments_saved += 1;
            } else {
                match filing::write_attachment(
                    &msg.unique_id,
                    &att.filename,
                    &att.decoded_bytes,
                    &dir,
                    &final_name,
                    &category,
                ) {
                    Ok(rec) => {
                        self.tally.attachments_saved += 1;
                        outcome.outcome = Outcome::Done;
                        outcome.saved = Some(rec);
                    }
                    Err(e) => {
                        log::error!("{e}");
                        self.tally.errors += 1;
                        outcome.outcome = Outcome::Failed;
                        outcome.error = Some(e.to_string());
                    }
                }
            }
            out.push(outcome);
        }
        out
    }

    fn draft(
        &mut self,
        msg: &ParsedMessage,
        attachments: &[AttachmentOutcome],
    ) -> Option<DraftOutcome> {
        let inv = &self.cfg.invitations;
        if !inv.enabled
            || !attachments
                .iter()
                .any(|a| a.eligibility == Eligibility::Eligible)
        {
            return None;
        }
        let outbox = self.layout.outbox_dir();
        let path = outbox.join(invitation_file_name(msg));
        if self.dry_run {
            return Some(DraftOutcome {
                path,
                outcome: Outcome::Planned,
                error: None,
            });
        }
        let text = render_invitation(msg, &inv.template(), &inv.from, self.clock.now());
        let name = invitation_file_name(msg);
        Some(match filing::write_draft(&outbox, &name, &text) {
            Ok(path) => DraftOutcome {
                path,
                outcome: Outcome::Done,
                error: None,
            },
            Err(e) => {
                log::error!("{e}");
                self.tally.errors += 1;
                DraftOutcome {
                    path,
                    outcome: Outcome::Failed,
                    error: Some(e.to_string()),
                }
            }
        })
    }
}
