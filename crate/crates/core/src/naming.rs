//! File naming for saved attachments: sanitizing, template renames and
//! collision suffixes.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

const MAX_NAME_CHARS: usize = 200;
const UNKNOWN: &str = "unknown";

/// Splits `name` into (stem, extension-with-dot). A leading dot does not
/// start an extension.
pub fn split_extension(name: &str) -> (&str, &str) {
    match name.rfind('.') {
        Some(p) if p > 0 => (&name[..p], &name[p..]),
        _ => (name, ""),
    }
}

/// Makes a name safe to use as a single path component.
///
/// Path separators, NUL and other control characters become `_`, a leading
/// dot becomes `_`, an empty name becomes `"attachment"`, and names are
/// capped at 200 characters keeping the extension.
pub fn sanitize_filename(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| match c {
            '/' | '\\' => '_',
            c if (c as u32) < 0x20 => '_',
            c => c,
        })
        .collect();
    if out.starts_with('.') {
        out.replace_range(..1, "_");
    }
    if out.is_empty() {
        return "attachment".to_owned();
    }
    if out.chars().count() > MAX_NAME_CHARS {
        let (stem, ext) = split_extension(&out);
        let ext_chars = ext.chars().count();
        let (stem, ext) = if ext_chars < MAX_NAME_CHARS / 2 {
            (stem, ext)
        } else {
            (out.as_str(), "")
        };
        let keep = MAX_NAME_CHARS - ext.chars().count();
        let mut truncated: String = stem.chars().take(keep).collect();
        truncated.push_str(ext);
        out = truncated;
    }
    out
}

/// `"<stem> (k)<ext>"`.
pub fn suffixed_name(filename: &str, k: u32) -> String {
    let (stem, ext) = split_extension(filename);
    format!("{stem} ({k}){ext}")
}

/// Rename pattern for resume attachments. Placeholders are
/// `{candidate_name}`, `{highest_qualification}` and `{application_date}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenameTemplate {
    pub pattern: String,
    /// Replaces whitespace runs inside substituted values.
    pub separator: String,
}

impl Default for RenameTemplate {
    fn default() -> Self {
        Self {
            pattern: "{candidate_name}_{highest_qualification}_{application_date}".to_owned(),
            separator: "_".to_owned(),
        }
    }
}

fn fold_whitespace(s: &str, sep: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for (i, w) in s.split_whitespace().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        out.push_str(w);
    }
    out
}

/// Renders a resume file name such as `John_Doe_MSc_2022-01-15.pdf`.
///
/// Missing values, and any placeholder the template does not know, render as
/// `unknown`. The result is sanitized.
pub fn render_rename(
    tmpl: &RenameTemplate,
    candidate_name: &str,
    qualification: Option<&str>,
    date: NaiveDate,
    extension: &str,
) -> String {
    let date = date.format("%Y-%m-%d").to_string();
    let value_for = |key: &str| -> String {
        let v = match key {
            "candidate_name" => candidate_name,
            "highest_qualification" => qualification.unwrap_or(""),
            "application_date" => date.as_str(),
            _ => "",
        };
        let v = fold_whitespace(v, &tmpl.separator);
        if v.is_empty() {
            UNKNOWN.to_owned()
        } else {
            v
        }
    };

    let mut out = String::with_capacity(tmpl.pattern.len() + 32);
    let mut rest = tmpl.pattern.as_str();
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        match rest[open..].find('}') {
            Some(close) => {
                out.push_str(&value_for(&rest[open + 1..open + close]));
                rest = &rest[open + close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);

    let ext = extension.trim();
    if !ext.is_empty() {
        if !ext.starts_with('.') {
            out.push('.');
        }
        out.push_str(ext);
    }
    sanitize_filename(&out)
}
