//! Pure building blocks of the e-mail triage assistant.
//!
//! Everything in this crate works on in-memory values only: raw message bytes
//! go in, parsed messages, routing decisions, file names and report numbers
//! come out. Mailbox access, the filesystem and the command line live in the
//! `email-assistant` crate.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod draft;
pub mod encoding;
mod header;
pub mod message;
pub mod metrics;
pub mod naming;
pub mod rules;
pub mod text;

pub use draft::{invitation_file_name, render_invitation, InvitationTemplate};
pub use encoding::{decode_transfer_encoding, TransferEncoding, TransferError};
pub use header::{parse_address_list, Mailbox};
pub use message::{
    assign_unique_id, extract_body_text, parse_message, peek_date, Attachment, BodyParts,
    MessageError, ParseWarning, ParsedMessage, RawMessage,
};
pub use metrics::{
    compute_speedup, evaluate_accuracy, format_batch_id, manual_baseline, manual_baseline_with,
    AccuracyReport, ClassifiedMessage, ExpectedLabelManifest, ManifestMismatch, Mismatch,
    RunReport, Tally, MANUAL_SECONDS_PER_EMAIL,
};
pub use naming::{
    render_rename, sanitize_filename, split_extension, suffixed_name, RenameTemplate,
};
pub use rules::{
    classify_attachment_useful, classify_message, load_ruleset, screen_eligibility,
    AttachmentClass, AttachmentRules, ConfigError, Decision, DecisionKind, DecisionReason,
    DefaultAction, Eligibility, MatchField, Rule, RuleSet, RulesBundle, SenderBlocklist,
    SubfolderRule, DEFAULT_RULES,
};
pub use text::{html_to_text, normalize_text, NormalizedText};
