//! Mailbox access, attachment filing, audit trail and the triage run that
//! ties them together. Parsing and classification live in
//! `email_assistant_core`.

pub mod audit;
pub mod config;
pub mod filing;
pub mod run;
pub mod store;

pub use run::{load_inputs, run_pipeline, run_with_store, Inputs, RunError, RunOutcome};
