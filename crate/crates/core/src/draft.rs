//! Interview-invitation drafts as RFC 5322 text.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::encoding::encode_base64;
use crate::message::ParsedMessage;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvitationTemplate {
    pub subject: String,
    pub body: String,
}

impl Default for InvitationTemplate {
    fn default() -> Self {
        Self {
            subject: "Interview invitation".to_owned(),
            body: "Dear {candidate_name},\n\n\
                   Thank you for your application of {application_date}. We would like to \
                   invite you for an interview.\nPlease reply with a few time slots that suit you.\n\n\
                   Kind regards,\nRecruitment team\n"
                .to_owned(),
        }
    }
}

fn fill(template: &str, candidate_name: &str, application_date: &str) -> String {
    template
        .replace("{candidate_name}", candidate_name)
        .replace("{application_date}", application_date)
}

fn header_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c == '\r' || c == '\n' { ' ' } else { c })
        .collect()
}

/// Subject text, RFC 2047-encoded when it is not plain ASCII.
fn encode_header_text(s: &str) -> String {
    let s = header_safe(s);
    if s.is_ascii() {
        s
    } else {
        format!("=?UTF-8?B?{}?=", encode_base64(s.as_bytes()))
    }
}

fn crlf_lines(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 16);
    for line in s.split('\n') {
        out.push_str(line.strip_suffix('\r').unwrap_or(line));
        out.push_str("\r\n");
    }
    out
}

/// File name of the draft for a message: `<unique_id>-invitation.eml`.
pub fn invitation_file_name(msg: &ParsedMessage) -> String {
    format!("{}-invitation.eml", msg.unique_id)
}

/// Renders an invitation addressed to the message's sender.
///
/// `{candidate_name}` and `{application_date}` are filled in both subject and
/// body. The draft is UTF-8, 8bit, with CRLF line endings.
pub fn render_invitation(
    msg: &ParsedMessage,
    tmpl: &InvitationTemplate,
    from: &str,
    now: DateTime<Utc>,
) -> String {
    let name = msg.candidate_name();
    let date = msg.date.format("%Y-%m-%d").to_string();
    let subject = fill(&tmpl.subject, name, &date);
    let body = fill(&tmpl.body, name, &date);

    let mut out = String::new();
    out.push_str(&format!("From: {}\r\n", header_safe(from)));
    out.push_str(&format!("To: {}\r\n", header_safe(&msg.sender)));
    out.push_str(&format!("Subject: {}\r\n", encode_header_text(&subject)));
    out.push_str(&format!("Date: {}\r\n", now.to_rfc2822()));
    out.push_str(&format!(
        "Message-ID: <{}.invitation@email-assistant.invalid>\r\n",
        header_safe(&msg.unique_id)
    ));
    if let Some(id) = &msg.message_id {
        out.push_str(&format!("In-Reply-To: {}\r\n", header_safe(id)));
    }
    out.push_str("MIME-Version: 1.0\r\n");
    out.push_str("Content-Type: text/plain; charset=utf-8\r\n");
    out.push_str("Content-Transfer-Encoding: 8bit\r\n");
    out.push_str("\r\n");
    out.push_str(&crlf_lines(body.trim_end_matches('\n')));
    out
}
