//! Parsing raw RFC 5322 / MIME messages into [`ParsedMessage`].

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use chrono::{DateTime, Utc};

use crate::encoding::{decode_transfer_encoding, TransferEncoding};
use crate::header::{
    decode_charset, decode_encoded_words, parse_address_list, parse_header_block,
    parse_param_value, split_header_body, transfer_encoding_of, Headers,
};
use crate::text::html_to_text;

/// Deepest multipart nesting we walk into.
const MAX_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MessageError {
    #[error("message is empty")]
    Empty,
    #[error("malformed message: {0}")]
    Malformed(String),
}

/// A message exactly as the store handed it over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawMessage {
    bytes: Vec<u8>,
    source_handle: String,
    received_at: Option<DateTime<Utc>>,
}

impl RawMessage {
    pub fn new(bytes: Vec<u8>, source_handle: impl Into<String>) -> Result<Self, MessageError> {
        if bytes.is_empty() {
            return Err(MessageError::Empty);
        }
        Ok(Self {
            bytes,
            source_handle: source_handle.into(),
            received_at: None,
        })
    }

    /// Store-side arrival time, used when the Date header is missing.
    pub fn with_received_at(mut self, at: DateTime<Utc>) -> Self {
        self.received_at = Some(at);
        self
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn source_handle(&self) -> &str {
        &self.source_handle
    }

    pub fn received_at(&self) -> Option<DateTime<Utc>> {
        self.received_at
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attachment {
    /// As declared in the MIME headers; may be empty.
    pub filename: String,
    pub media_type: String,
    pub transfer_encoding: TransferEncoding,
    pub decoded_bytes: Vec<u8>,
    /// Decoded text for `text/*` parts only.
    pub text_content: Option<String>,
    /// `size=` parameter of Content-Disposition, when given.
    pub declared_size: Option<u64>,
}

/// Non-fatal problems found while parsing. The message is still usable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    UnsupportedEncoding {
        filename: String,
        encoding: String,
    },
    CorruptEncoding {
        filename: String,
        detail: String,
    },
    MissingDate,
    UnparseableDate(String),
    UnknownCharset(String),
    SizeMismatch {
        filename: String,
        declared: u64,
        actual: u64,
    },
    UnterminatedMultipart,
    NestingTooDeep,
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnsupportedEncoding { filename, encoding } => write!(
                f,
                "skipped part {filename:?}: unsupported transfer encoding {encoding:?}"
            ),
            Self::CorruptEncoding { filename, detail } => {
                write!(f, "skipped part {filename:?}: {detail}")
            }
            Self::MissingDate => f.write_str("missing Date header, used received time"),
            Self::UnparseableDate(d) => {
                write!(f, "unparseable Date header {d:?}, used received time")
            }
            Self::UnknownCharset(c) => write!(f, "unknown charset {c:?}, decoded as UTF-8"),
            Self::SizeMismatch {
                filename,
                declared,
                actual,
            } => write!(
                f,
                "attachment {filename:?} declares {declared} bytes but decodes to {actual}"
            ),
            Self::UnterminatedMultipart => f.write_str("multipart body has no delimiter"),
            Self::NestingTooDeep => f.write_str("MIME nesting too deep, inner parts ignored"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedMessage {
    pub unique_id: String,
    pub source_handle: String,
    pub message_id: Option<String>,
    /// Bare address of the first From mailbox.
    pub sender: String,
    pub sender_name: Option<String>,
    pub recipients: Vec<String>,
    pub subject: String,
    pub date: DateTime<Utc>,
    pub body_text: String,
    pub attachments: Vec<Attachment>,
    pub raw_size_bytes: u64,
    pub warnings: Vec<ParseWarning>,
}

impl ParsedMessage {
    /// Display name of the sender, or the local part of the address.
    pub fn candidate_name(&self) -> &str {
        match &self.sender_name {
            Some(n) if !n.trim().is_empty() => n.trim(),
            _ => self.sender.split('@').next().unwrap_or(&self.sender),
        }
    }
}

/// `<batch_id>-<seq>` with the sequence zero-padded to six digits.
pub fn assign_unique_id(batch_id: &str, batch_seq: u64) -> String {
    format!("{batch_id}-{batch_seq:06}")
}

/// Text alternatives collected from a message's non-attachment parts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BodyParts {
    pub plain: Vec<String>,
    pub html: Vec<String>,
}

/// All text/plain parts joined; failing that, the HTML parts with markup
/// stripped. Empty for body-less messages.
pub fn extract_body_text(parts: &BodyParts) -> String {
    let joined = if !parts.plain.is_empty() {
        parts.plain.join("\n")
    } else {
        parts
            .html
            .iter()
            .map(|h| html_to_text(h))
            .collect::<Vec<_>>()
            .join("\n")
    };
    joined.trim().to_owned()
}

fn parse_date(value: &str) -> Option<DateTime<Utc>> {
    let v = value.trim();
    if let Ok(d) = DateTime::parse_from_rfc2822(v) {
        return Some(d.with_timezone(&Utc));
    }
    // Trailing comments such as "(UTC)" or "(Pacific Standard Time)".
    let stripped = match v.find('(') {
        Some(p) => v[..p].trim(),
        None => v,
    };
    if let Ok(d) = DateTime::parse_from_rfc2822(stripped) {
        return Some(d.with_timezone(&Utc));
    }
    // A day name that disagrees with the date is common; the date wins.
    let (_, rest) = stripped.split_once(',')?;
    DateTime::parse_from_rfc2822(rest.trim())
        .ok()
        .map(|d| d.with_timezone(&Utc))
}

/// Reads just the Date header. Stores use it to order messages without a
/// full parse.
pub fn peek_date(bytes: &[u8]) -> Option<DateTime<Utc>> {
    let (head, _) = split_header_body(bytes)?;
    let headers = parse_header_block(head)?;
    headers.get("Date").and_then(parse_date)
}

/// Parses a raw message and assigns it the ID `<batch_id>-<batch_seq>`.
///
/// Parts with undecodable transfer encodings are skipped and reported in
/// [`ParsedMessage::warnings`]; only a missing header/body separator, an
/// unparseable header block or an unusable From header fail the whole message.
pub fn parse_message(
    raw: &RawMessage,
    batch_seq: u64,
    batch_id: &str,
) -> Result<ParsedMessage, MessageError> {
    let bytes = raw.bytes();
    let (head, body) = split_header_body(bytes)
        .ok_or_else(|| MessageError::Malformed("no header/body separator".into()))?;
    let headers = parse_header_block(head)
        .ok_or_else(|| MessageError::Malformed("unparseable header block".into()))?;

    let from = headers
        .get("From")
        .ok_or_else(|| MessageError::Malformed("missing From header".into()))?;
    let sender = parse_address_list(from)
        .into_iter()
        .next()
        .ok_or_else(|| MessageError::Malformed(format!("unparseable From header {from:?}")))?;

    let mut recipients = Vec::new();
    for name in ["To", "Cc"] {
        for f in headers.iter().filter(|f| f.name.eq_ignore_ascii_case(name)) {
            recipients.extend(parse_address_list(&f.value).into_iter().map(|m| m.address));
        }
    }

    let mut warnings = Vec::new();
    let fallback = raw.received_at().unwrap_or(DateTime::<Utc>::UNIX_EPOCH);
    let date = match headers.get("Date") {
        None => {
            warnings.push(ParseWarning::MissingDate);
            fallback
        }
        Some(v) => parse_date(v).unwrap_or_else(|| {
            warnings.push(ParseWarning::UnparseableDate(v.to_owned()));
            fallback
        }),
    };

    let mut walker = Walker::default();
    walker.walk(&headers, body, 0, 0);
    warnings.append(&mut walker.warnings);

    Ok(ParsedMessage {
        unique_id: assign_unique_id(batch_id, batch_seq),
        source_handle: raw.source_handle().to_owned(),
        message_id: headers.get("Message-ID").map(|v| v.trim().to_owned()),
        sender: sender.address,
        sender_name: sender.name,
        recipients,
        subject: headers
            .get("Subject")
            .map(decode_encoded_words)
            .unwrap_or_default(),
        date,
        body_text: extract_body_text(&walker.body),
        attachments: walker.attachments,
        raw_size_bytes: bytes.len() as u64,
        warnings,
    })
}

#[derive(Default)]
struct Walker {
    body: BodyParts,
    attachments: Vec<Attachment>,
    warnings: Vec<ParseWarning>,
}

impl Walker {
    fn decode_text(&mut self, bytes: &[u8], charset: Option<&str>) -> String {
        let (text, known) = decode_charset(bytes, charset);
        if !known {
            let c = charset.unwrap_or_default().to_owned();
            if !self
                .warnings
                .contains(&ParseWarning::UnknownCharset(c.clone()))
            {
                self.warnings.push(ParseWarning::UnknownCharset(c));
            }
        }
        text
    }

    fn walk(&mut self, headers: &Headers, body: &[u8], depth: usize, nested_messages: usize) {
        if depth > MAX_DEPTH {
            self.warnings.push(ParseWarning::NestingTooDeep);
            return;
        }
        let ctype = parse_param_value(headers.get("Content-Type").unwrap_or("text/plain"));
        let media_type = if ctype.value.contains('/') {
            ctype.value.clone()
        } else {
            "text/plain".to_owned()
        };
        let disposition = headers.get("Content-Disposition").map(parse_param_value);
        let filename = disposition
            .as_ref()
            .and_then(|d| d.param("filename"))
            .or_else(|| ctype.param("name"))
            .map(ToString::to_string);
        let is_attachment = filename.is_some()
            || disposition
                .as_ref()
                .is_some_and(|d| d.value == "attachment");

        if media_type.starts_with("multipart/") && !is_attachment {
            let Some(boundary) = ctype.param("boundary") else {
                self.warnings.push(ParseWarning::UnterminatedMultipart);
                return;
            };
            let parts = split_multipart(body, boundary);
            if parts.is_empty() {
                self.warnings.push(ParseWarning::UnterminatedMultipart);
            }
            for part in parts {
                let (part_headers, part_body) = match split_header_body(part) {
                    Some((h, b)) => match parse_header_block(h) {
                        Some(h) => (h, b),
                        None => (Headers::default(), part),
                    },
                    None => (Headers::default(), part),
                };
                self.walk(&part_headers, part_body, depth + 1, nested_messages);
            }
            return;
        }

        let encoding = match transfer_encoding_of(headers) {
            Ok(e) => e,
            Err(enc) => {
                self.warnings.push(ParseWarning::UnsupportedEncoding {
                    filename: filename.unwrap_or_default(),
                    encoding: enc,
                });
                return;
            }
        };
        let decoded = match decode_transfer_encoding(body, encoding) {
            Ok(d) => d,
            Err(e) => {
                self.warnings.push(ParseWarning::CorruptEncoding {
                    filename: filename.unwrap_or_default(),
                    detail: e.to_string(),
                });
                return;
            }
        };

        if is_attachment {
            let filename = filename.unwrap_or_default();
            let text_content = media_type
                .starts_with("text/")
                .then(|| self.decode_text(&decoded, ctype.param("charset")));
            let declared_size = disposition
                .as_ref()
                .and_then(|d| d.param("size"))
                .and_then(|s| s.trim().parse::<u64>().ok());
            if let Some(declared) = declared_size {
                if declared != decoded.len() as u64 {
                    self.warnings.push(ParseWarning::SizeMismatch {
                        filename: filename.clone(),
                        declared,
                        actual: decoded.len() as u64,
                    });
                }
            }
            self.attachments.push(Attachment {
                filename,
                media_type,
                transfer_encoding: encoding,
                decoded_bytes: decoded,
                text_content,
                declared_size,
            });
            return;
        }

        match media_type.as_str() {
            "text/plain" => {
                let t = self.decode_text(&decoded, ctype.param("charset"));
                self.body.plain.push(t);
            }
            "text/html" => {
                let t = self.decode_text(&decoded, ctype.param("charset"));
                self.body.html.push(t);
            }
            "message/rfc822" if nested_messages == 0 => {
                if let Some((h, b)) = split_header_body(&decoded) {
                    if let Some(inner) = parse_header_block(h) {
                        self.walk(&inner, b, depth + 1, nested_messages + 1);
                    }
                }
            }
            // Inline images and other unnamed parts are not attachments.
            _ => {}
        }
    }
}

fn is_delimiter(line: &[u8], boundary: &[u8]) -> Option<bool> {
    let rest = line.strip_prefix(b"--")?.strip_prefix(boundary)?;
    let (closing, tail) = match rest.strip_prefix(b"--") {
        Some(t) => (true, t),
        None => (false, rest),
    };
    tail.iter()
        .all(|&b| b == b' ' || b == b'\t')
        .then_some(closing)
}

/// Body parts between boundary delimiters. The line break in front of a
/// delimiter belongs to the delimiter, so part bytes are exact.
fn split_multipart<'a>(body: &'a [u8], boundary: &str) -> Vec<&'a [u8]> {
    let boundary = boundary.as_bytes();
    let mut parts = Vec::new();
    let mut current: Option<usize> = None;
    let mut pos = 0;
    while pos < body.len() {
        let (content_end, next) = match body[pos..].iter().position(|&b| b == b'\n') {
            Some(p) => {
                let nl = pos + p;
                let ce = if nl > pos && body[nl - 1] == b'\r' {
                    nl - 1
                } else {
                    nl
                };
                (ce, nl + 1)
            }
            None => (body.len(), body.len()),
        };
        if let Some(closing) = is_delimiter(&body[pos..content_end], boundary) {
            if let Some(start) = current {
                let mut end = pos;
                if end > start && body[end - 1] == b'\n' {
                    end -= 1;
                    if end > start && body[end - 1] == b'\r' {
                        end -= 1;
                    }
                }
                parts.push(&body[start..end]);
            }
            if closing {
                return parts;
            }
            current = Some(next);
        }
        pos = next;
    }
    if let Some(start) = current {
        if start < body.len() {
            parts.push(&body[start..]);
        }
    }
    parts
}
