//! Application configuration (JSON) and credential resolution.

use std::fs;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};

use email_assistant_core::{InvitationTemplate, RenameTemplate};
use serde::{Deserialize, Serialize};

use crate::store::{Credentials, StoreConfig, StoreMode};

pub const ENV_USER: &str = "EMAIL_ASSISTANT_USER";
pub const ENV_PASS: &str = "EMAIL_ASSISTANT_PASS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    DryRun,
    Execute,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvitationConfig {
    pub enabled: bool,
    pub from: String,
    pub subject: String,
    pub body: String,
}

impl Default for InvitationConfig {
    fn default() -> Self {
        let t = InvitationTemplate::default();
        Self {
            enabled: true,
            from: "recruitment@example.invalid".into(),
            subject: t.subject,
            body: t.body,
        }
    }
}

impl InvitationConfig {
    pub fn template(&self) -> InvitationTemplate {
        InvitationTemplate {
            subject: self.subject.clone(),
            body: self.body.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub store: StoreConfig,
    /// JSON file with `email` and `password`; must not be group/world
    /// readable.
    pub credentials_file: Option<PathBuf>,
    /// Rules document; the built-in Work/Receipt rules when absent.
    pub rules_path: Option<PathBuf>,
    pub blocklist_path: Option<PathBuf>,
    pub layout_root: PathBuf,
    pub report_dir: PathBuf,
    pub rename_template: RenameTemplate,
    /// Fills `{highest_qualification}` in resume names.
    pub highest_qualification: Option<String>,
    pub run_mode: RunMode,
    pub manifest_path: Option<PathBuf>,
    /// Write not-useful attachments to `NotUseful/` instead of dropping them.
    pub save_not_useful: bool,
    pub invitations: InvitationConfig,
    pub manual_seconds_per_email: f64,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            store: StoreConfig::default(),
            credentials_file: None,
            rules_path: None,
            blocklist_path: None,
            layout_root: PathBuf::from("files"),
            report_dir: PathBuf::from("reports"),
            rename_template: RenameTemplate::default(),
            highest_qualification: None,
            run_mode: RunMode::DryRun,
            manifest_path: None,
            save_not_useful: true,
            invitations: InvitationConfig::default(),
            manual_seconds_per_email: email_assistant_core::MANUAL_SECONDS_PER_EMAIL,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("invalid config: {0}")]
    Semantic(String),
}

impl AppConfig {
    /// Resolves relative paths against `base`.
    pub fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.credentials_file,
            &mut self.rules_path,
            &mut self.blocklist_path,
            &mut self.manifest_path,
            &mut self.store.fixture_root,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.layout_root);
        fix(&mut self.report_dir);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.store.validate().map_err(ConfigError::Semantic)?;
        if !(self.manual_seconds_per_email.is_finite() && self.manual_seconds_per_email >= 0.0) {
            return Err(ConfigError::Semantic(
                "manual_seconds_per_email must be a non-negative number".into(),
            ));
        }
        let inputs = [
            ("rules_path", &self.rules_path),
            ("blocklist_path", &self.blocklist_path),
            ("manifest_path", &self.manifest_path),
            ("credentials_file", &self.credentials_file),
        ];
        for (name, p) in inputs {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(ConfigError::Semantic(format!(
                        "{name} {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        if let (StoreMode::Fixture, Some(root)) = (self.store.mode, &self.store.fixture_root) {
            if !root.is_dir() {
                return Err(ConfigError::Semantic(format!(
                    "fixture root {} is not a directory",
                    root.display()
                )));
            }
        }
        Ok(())
    }

    pub fn dry_run(&self) -> bool {
        self.run_mode == RunMode::DryRun
    }
}

/// Parses a config document. Relative paths are taken relative to `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<AppConfig, ConfigError> {
    let mut cfg: AppConfig = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => ConfigError::Semantic(e.to_string()),
        _ => ConfigError::Syntax(e.to_string()),
    })?;
    cfg.rebase(base);
    cfg.validate()?;
    Ok(cfg)
}

/// Loads, applies defaults to and validates a config file.
pub fn load_config(path: &Path) -> Result<AppConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_owned(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base)
}

#[derive(Debug, thiserror::Error)]
pub enum CredentialError {
    #[error("no credentials: set {ENV_USER}/{ENV_PASS}, configure credentials_file, or run interactively")]
    NoCredentials,
    #[error("credentials file {0} must not be readable by group or others (chmod 600)")]
    InsecureFile(PathBuf),
    #[error("bad credentials file {path}: {reason}")]
    BadFile { path: PathBuf, reason: String },
}

/// Interactive source of last resort.
pub trait Prompt {
    /// `None` when no one can be asked.
    fn ask(&mut self, email_hint: Option<&str>) -> Option<(String, String)>;
}

/// Never prompts.
#[derive(Debug, Default)]
pub struct NoPrompt;

impl Prompt for NoPrompt {
    fn ask(&mut self, _: Option<&str>) -> Option<(String, String)> {
        None
    }
}

/// Asks on the terminal with echo off, when stdin is a terminal.
#[derive(Debug, Default)]
pub struct TerminalPrompt;

impl Prompt for TerminalPrompt {
    fn ask(&mut self, email_hint: Option<&str>) -> Option<(String, String)> {
        if !std::io::stdin().is_terminal() {
            return None;
        }
        let email = match email_hint {
            Some(e) => e.to_owned(),
            None => {
                eprint!("Email: ");
                let mut s = String::new();
                std::io::stdin().read_line(&mut s).ok()?;
                s.trim().to_owned()
            }
        };
        let password = rpassword::prompt_password(format!("Password for {email}: ")).ok()?;
        Some((email, password))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CredentialsDoc {
    email: String,
    password: String,
}

fn read_credentials_file(path: &Path) -> Result<Credentials, CredentialError> {
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let mode = fs::metadata(path)
            .map_err(|e| CredentialError::BadFile {
                path: path.to_owned(),
                reason: e.to_string(),
            })?
            .permissions()
            .mode();
        if mode & 0o077 != 0 {
            return Err(CredentialError::InsecureFile(path.to_owned()));
        }
    }
    let text = fs::read_to_string(path).map_err(|e| CredentialError::BadFile {
        path: path.to_owned(),
        reason: e.to_string(),
    })?;
    // The parser's message could quote the file, so it is not passed on.
    let doc: CredentialsDoc =
        serde_json::from_str(&text).map_err(|_| CredentialError::BadFile {
            path: path.to_owned(),
            reason: "expected {\"email\": ..., \"password\": ...}".into(),
        })?;
    Ok(Credentials::new(doc.email, doc.password))
}

/// Credentials in precedence order: environment, credentials file, prompt.
/// Fixture mode needs none and gets an empty pair.
pub fn resolve_credentials(
    cfg: &AppConfig,
    env: &dyn Fn(&str) -> Option<String>,
    prompt: &mut dyn Prompt,
) -> Result<Credentials, CredentialError> {
    if cfg.store.mode == StoreMode::Fixture {
        return Ok(Credentials::new("", ""));
    }
    let user = env(ENV_USER).filter(|s| !s.is_empty());
    if let (Some(u), Some(p)) = (&user, env(ENV_PASS)) {
        return Ok(Credentials::new(u.clone(), p));
    }
    if let Some(path) = &cfg.credentials_file {
        return read_credentials_file(path);
    }
    prompt
        .ask(user.as_deref())
        .map(|(e, p)| Credentials::new(e, p))
        .ok_or(CredentialError::NoCredentials)
}
