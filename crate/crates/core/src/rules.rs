//! Keyword routing: which folder a message goes to, whether its attachments
//! are worth keeping, and whether a resume passes the eligibility screen.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::message::{Attachment, ParsedMessage};
use crate::text::{normalize_text, NormalizedText};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("rules config syntax: {0}")]
    Syntax(String),
    #[error("rules config: {0}")]
    Semantic(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchField {
    Subject,
    Body,
    Sender,
}

impl MatchField {
    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "subject" => Some(Self::Subject),
            "body" => Some(Self::Body),
            "sender" => Some(Self::Sender),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rule {
    pub label: String,
    /// Normalized, never empty.
    pub keywords: Vec<String>,
    pub match_fields: BTreeSet<MatchField>,
    pub priority: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefaultAction {
    Trash,
    Keep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleSet {
    rules: Vec<Rule>,
    pub default_action: DefaultAction,
    pub trash_folder: String,
}

impl RuleSet {
    /// Sorted by ascending priority.
    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Builds a rule set, normalizing keywords and sorting by priority.
    pub fn new(
        rules: Vec<Rule>,
        default_action: DefaultAction,
        trash_folder: impl Into<String>,
    ) -> Result<Self, ConfigError> {
        let trash_folder = trash_folder.into();
        check_folder_name("trash_folder", &trash_folder)?;
        let mut seen = BTreeSet::new();
        let mut normalized = Vec::with_capacity(rules.len());
        for rule in rules {
            check_folder_name("rule label", &rule.label)?;
            if !seen.insert(rule.priority) {
                return Err(ConfigError::Semantic(format!(
                    "duplicate rule priority {}",
                    rule.priority
                )));
            }
            if rule.match_fields.is_empty() {
                return Err(ConfigError::Semantic(format!(
                    "rule {:?} has no match_fields",
                    rule.label
                )));
            }
            let keywords = normalize_keywords(&rule.keywords, &rule.label)?;
            normalized.push(Rule { keywords, ..rule });
        }
        normalized.sort_by_key(|r| r.priority);
        Ok(Self {
            rules: normalized,
            default_action,
            trash_folder,
        })
    }
}

fn normalize_keywords(keywords: &[String], owner: &str) -> Result<Vec<String>, ConfigError> {
    if keywords.is_empty() {
        return Err(ConfigError::Semantic(format!("{owner:?} has no keywords")));
    }
    let mut out: Vec<String> = Vec::with_capacity(keywords.len());
    for k in keywords {
        let n = normalize_text(k).into_string();
        if n.is_empty() {
            return Err(ConfigError::Semantic(format!(
                "{owner:?} has an empty keyword"
            )));
        }
        if !out.contains(&n) {
            out.push(n);
        }
    }
    Ok(out)
}

fn check_folder_name(what: &str, name: &str) -> Result<(), ConfigError> {
    if name.trim().is_empty()
        || name == "."
        || name == ".."
        || name
            .chars()
            .any(|c| c.is_control() || c == '"' || c == '\\')
    {
        return Err(ConfigError::Semantic(format!("invalid {what} {name:?}")));
    }
    Ok(())
}

/// Senders whose mail is never useful. Matching is on the full address,
/// case-insensitive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SenderBlocklist {
    addresses: BTreeSet<String>,
}

impl SenderBlocklist {
    /// One address per line; `#` starts a comment; blank lines ignored.
    pub fn parse(text: &str) -> Self {
        let addresses = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::to_lowercase)
            .collect();
        Self { addresses }
    }

    pub fn from_addresses<I, S>(addrs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            addresses: addrs
                .into_iter()
                .map(|a| a.as_ref().trim().to_lowercase())
                .collect(),
        }
    }

    pub fn contains(&self, address: &str) -> bool {
        self.addresses.contains(&address.trim().to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Route,
    Trash,
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionReason {
    Keyword,
    Blocklist,
    Default,
}

/// The single routing outcome for one message.
///
/// `kind == Route` exactly when `label` is set and `reason == Keyword`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Decision {
    pub kind: DecisionKind,
    pub label: Option<String>,
    pub matched_rule_priority: Option<i64>,
    pub matched_keyword: Option<String>,
    pub reason: DecisionReason,
}

impl Decision {
    pub fn route(label: &str, priority: i64, keyword: &str) -> Self {
        Self {
            kind: DecisionKind::Route,
            label: Some(label.to_owned()),
            matched_rule_priority: Some(priority),
            matched_keyword: Some(keyword.to_owned()),
            reason: DecisionReason::Keyword,
        }
    }

    pub fn trash(reason: DecisionReason) -> Self {
        Self {
            kind: DecisionKind::Trash,
            label: None,
            matched_rule_priority: None,
            matched_keyword: None,
            reason,
        }
    }

    pub fn keep() -> Self {
        Self {
            kind: DecisionKind::Keep,
            label: None,
            matched_rule_priority: None,
            matched_keyword: None,
            reason: DecisionReason::Default,
        }
    }

    /// Label used in reports and manifests: the route label, `"trash"` or
    /// `"keep"`.
    pub fn outcome_label(&self) -> &str {
        match self.kind {
            DecisionKind::Route => self.label.as_deref().unwrap_or_default(),
            DecisionKind::Trash => "trash",
            DecisionKind::Keep => "keep",
        }
    }
}

/// Routes one message.
///
/// A blocklisted sender is trashed no matter what the keywords say. Otherwise
/// the first rule (by priority) with a keyword occurring in one of its
/// normalized match fields wins, and failing that the rule set's default
/// action applies.
pub fn classify_message(
    msg: &ParsedMessage,
    rules: &RuleSet,
    blocklist: &SenderBlocklist,
) -> Decision {
    if blocklist.contains(&msg.sender) {
        return Decision::trash(DecisionReason::Blocklist);
    }
    let mut subject: Option<NormalizedText> = None;
    let mut body: Option<NormalizedText> = None;
    let mut sender: Option<NormalizedText> = None;
    for rule in &rules.rules {
        for field in &rule.match_fields {
            let text = match field {
                MatchField::Subject => subject.get_or_insert_with(|| normalize_text(&msg.subject)),
                MatchField::Body => body.get_or_insert_with(|| normalize_text(&msg.body_text)),
                MatchField::Sender => sender.get_or_insert_with(|| {
                    let mut s = msg.sender_name.clone().unwrap_or_default();
                    s.push(' ');
                    s.push_str(&msg.sender);
                    normalize_text(&s)
                }),
            };
            if let Some(k) = rule.keywords.iter().find(|k| text.contains(k)) {
                return Decision::route(&rule.label, rule.priority, k);
            }
        }
    }
    match rules.default_action {
        DefaultAction::Trash => Decision::trash(DecisionReason::Default),
        DefaultAction::Keep => Decision::keep(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubfolderRule {
    pub keywords: Vec<String>,
    pub folder: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttachmentRules {
    pub useful_keywords: Vec<String>,
    pub subfolders: Vec<SubfolderRule>,
    pub eligibility_keywords: Vec<String>,
    /// Subfolder whose attachments count as resumes for screening and
    /// renaming.
    pub resume_folder: String,
}

impl Default for AttachmentRules {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|k| (*k).to_owned()).collect::<Vec<_>>();
        Self {
            useful_keywords: s(&["resume", "cv", "bill", "invoice"]),
            subfolders: vec![
                SubfolderRule {
                    keywords: s(&["resume", "cv"]),
                    folder: "Resumes".into(),
                },
                SubfolderRule {
                    keywords: s(&["bill"]),
                    folder: "Bills".into(),
                },
                SubfolderRule {
                    keywords: s(&["invoice"]),
                    folder: "Invoices".into(),
                },
            ],
            eligibility_keywords: Vec::new(),
            resume_folder: "Resumes".into(),
        }
    }
}

impl AttachmentRules {
    fn validated(self) -> Result<Self, ConfigError> {
        let useful = normalize_keywords(&self.useful_keywords, "useful_keywords")?;
        let mut subfolders = Vec::with_capacity(self.subfolders.len());
        for sf in self.subfolders {
            check_folder_name("attachment subfolder", &sf.folder)?;
            if sf.folder.contains('/') {
                return Err(ConfigError::Semantic(format!(
                    "attachment subfolder {:?} must be a single directory name",
                    sf.folder
                )));
            }
            let keywords = normalize_keywords(&sf.keywords, &sf.folder)?;
            if let Some(k) = keywords.iter().find(|k| !useful.contains(k)) {
                return Err(ConfigError::Semantic(format!(
                    "subfolder keyword {k:?} is not a useful_keyword"
                )));
            }
            subfolders.push(SubfolderRule {
                keywords,
                folder: sf.folder,
            });
        }
        let eligibility = self
            .eligibility_keywords
            .iter()
            .map(|k| normalize_text(k).into_string())
            .collect::<Vec<_>>();
        if eligibility.iter().any(String::is_empty) {
            return Err(ConfigError::Semantic("empty eligibility keyword".into()));
        }
        Ok(Self {
            useful_keywords: useful,
            subfolders,
            eligibility_keywords: eligibility,
            resume_folder: self.resume_folder,
        })
    }
}

/// Outcome of attachment classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttachmentClass {
    pub useful: bool,
    /// Category subfolder under `Useful`, when one matched.
    pub folder: Option<String>,
}

impl AttachmentClass {
    /// Relative category path: `Useful/<folder>`, `Useful` or `NotUseful`.
    pub fn category(&self) -> String {
        match (self.useful, &self.folder) {
            (true, Some(f)) => format!("Useful/{f}"),
            (true, None) => "Useful".to_owned(),
            (false, _) => "NotUseful".to_owned(),
        }
    }
}

fn attachment_match_text(att: &Attachment, subject: &NormalizedText) -> NormalizedText {
    let mut s = att.filename.clone();
    if let Some(t) = &att.text_content {
        s.push(' ');
        s.push_str(t);
    }
    s.push(' ');
    s.push_str(subject.as_str());
    normalize_text(&s)
}

/// Decides whether an attachment is useful and which category folder it
/// belongs in. Matching looks at the file name, any text content and the
/// carrying message's subject.
pub fn classify_attachment_useful(
    att: &Attachment,
    msg_subject_normalized: &NormalizedText,
    arules: &AttachmentRules,
) -> AttachmentClass {
    let text = attachment_match_text(att, msg_subject_normalized);
    let useful = arules.useful_keywords.iter().any(|k| text.contains(k));
    if !useful {
        return AttachmentClass {
            useful: false,
            folder: None,
        };
    }
    let folder = arules
        .subfolders
        .iter()
        .find(|sf| sf.keywords.iter().any(|k| text.contains(k)))
        .map(|sf| sf.folder.clone());
    AttachmentClass { useful, folder }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eligibility {
    Eligible,
    NotEligible,
    NotApplicable,
}

/// Resume screen: eligible iff every eligibility keyword occurs in the
/// attachment's text. Attachments outside the resume folder are not
/// applicable.
pub fn screen_eligibility(
    att: &Attachment,
    class: &AttachmentClass,
    arules: &AttachmentRules,
) -> Eligibility {
    if !class.useful || class.folder.as_deref() != Some(arules.resume_folder.as_str()) {
        return Eligibility::NotApplicable;
    }
    if arules.eligibility_keywords.is_empty() {
        return Eligibility::Eligible;
    }
    let text = normalize_text(att.text_content.as_deref().unwrap_or_default());
    if arules.eligibility_keywords.iter().all(|k| text.contains(k)) {
        Eligibility::Eligible
    } else {
        Eligibility::NotEligible
    }
}

/// Everything a rules document configures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RulesBundle {
    pub ruleset: RuleSet,
    pub attachment: AttachmentRules,
}

impl RulesBundle {
    /// Resume→Work and Bill|Invoice→Receipt on the subject, trash otherwise.
    pub fn builtin() -> Self {
        load_ruleset(DEFAULT_RULES).expect("built-in rules are valid")
    }
}

/// The rules document equivalent to [`RulesBundle::builtin`].
pub const DEFAULT_RULES: &str = r#"{
  "rules": [
    { "label": "Work", "keywords": ["resume"], "match_fields": ["subject"], "priority": 1 },
    { "label": "Receipt", "keywords": ["bill", "invoice"], "match_fields": ["subject"], "priority": 2 }
  ],
  "default_action": "trash",
  "trash_folder": "Trash"
}"#;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesDoc {
    rules: Vec<RuleDoc>,
    #[serde(default)]
    default_action: Option<String>,
    #[serde(default)]
    trash_folder: Option<String>,
    #[serde(default)]
    attachment: Option<AttachmentDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDoc {
    label: String,
    keywords: Vec<String>,
    #[serde(default)]
    match_fields: Option<Vec<String>>,
    priority: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AttachmentDoc {
    #[serde(default)]
    useful_keywords: Option<Vec<String>>,
    #[serde(default)]
    subfolders: Option<Vec<SubfolderDoc>>,
    #[serde(default)]
    eligibility_keywords: Option<Vec<String>>,
    #[serde(default)]
    resume_folder: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubfolderDoc {
    keywords: Vec<String>,
    folder: String,
}

/// Parses and validates a rules document (JSON).
///
/// `match_fields` defaults to subject only, `default_action` to trash and
/// `trash_folder` to `"Trash"`. Missing attachment settings take the
/// [`AttachmentRules`] defaults.
pub fn load_ruleset(config_text: &str) -> Result<RulesBundle, ConfigError> {
    let doc: RulesDoc =
        serde_json::from_str(config_text).map_err(|e| ConfigError::Syntax(e.to_string()))?;

    let mut rules = Vec::with_capacity(doc.rules.len());
    for r in doc.rules {
        let fields = match r.match_fields {
            None => BTreeSet::from([MatchField::Subject]),
            Some(names) => names
                .iter()
                .map(|n| {
                    MatchField::parse(n)
                        .ok_or_else(|| ConfigError::Semantic(format!("unknown match_field {n:?}")))
                })
                .collect::<Result<_, _>>()?,
        };
        rules.push(Rule {
            label: r.label,
            keywords: r.keywords,
            match_fields: fields,
            priority: r.priority,
        });
    }
    let default_action = match doc.default_action.as_deref().map(str::trim) {
        None | Some("trash") => DefaultAction::Trash,
        Some("keep") => DefaultAction::Keep,
        Some(other) => {
            return Err(ConfigError::Semantic(format!(
                "unknown default_action {other:?}"
            )))
        }
    };
    let ruleset = RuleSet::new(
        rules,
        default_action,
        doc.trash_folder.unwrap_or_else(|| "Trash".to_owned()),
    )?;

    let defaults = AttachmentRules::default();
    let attachment = match doc.attachment {
        None => defaults,
        Some(a) => AttachmentRules {
            useful_keywords: a.useful_keywords.unwrap_or(defaults.useful_keywords),
            subfolders: match a.subfolders {
                None => defaults.subfolders,
                Some(v) => v
                    .into_iter()
                    .map(|s| SubfolderRule {
                        keywords: s.keywords,
                        folder: s.folder,
                    })
                    .collect(),
            },
            eligibility_keywords: a.eligibility_keywords.unwrap_or_default(),
            resume_folder: a.resume_folder.unwrap_or(defaults.resume_folder),
        },
    }
    .validated()?;

    Ok(RulesBundle {
        ruleset,
        attachment,
    })
}
