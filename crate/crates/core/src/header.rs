//! RFC 5322 header block handling: unfolding, MIME parameters, RFC 2047
//! encoded words and address lists.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;

use crate::encoding::{decode_base64, TransferEncoding};

/// A single unfolded header field. Values are decoded lossily as UTF-8 but
/// encoded words are left alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Field {
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Headers {
    fields: Vec<Field>,
}

impl Headers {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|f| f.name.eq_ignore_ascii_case(name))
            .map(|f| f.value.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Field> {
        self.fields.iter()
    }
}

/// Splits a header block into unfolded fields. Returns `None` when a line is
/// neither a `name: value` field nor a continuation.
pub(crate) fn parse_header_block(block: &[u8]) -> Option<Headers> {
    let mut fields: Vec<Field> = Vec::new();
    for raw_line in block.split(|&b| b == b'\n') {
        let line = raw_line.strip_suffix(b"\r").unwrap_or(raw_line);
        if line.is_empty() {
            continue;
        }
        if matches!(line[0], b' ' | b'\t') {
            let last = fields.last_mut()?;
            last.value.push(' ');
            last.value.push_str(String::from_utf8_lossy(line).trim());
            continue;
        }
        let colon = line.iter().position(|&b| b == b':')?;
        let name = &line[..colon];
        if name.is_empty() || name.iter().any(|&b| b <= b' ' || b >= 0x7f) {
            return None;
        }
        fields.push(Field {
            name: String::from_utf8_lossy(name).into_owned(),
            value: String::from_utf8_lossy(&line[colon + 1..])
                .trim()
                .to_owned(),
        });
    }
    Some(Headers { fields })
}

/// Splits at the first empty line. Returns (header block, body).
pub(crate) fn split_header_body(bytes: &[u8]) -> Option<(&[u8], &[u8])> {
    if bytes.starts_with(b"\r\n") {
        return Some((&[], &bytes[2..]));
    }
    if bytes.starts_with(b"\n") {
        return Some((&[], &bytes[1..]));
    }
    let mut i = 0;
    while let Some(p) = bytes[i..].iter().position(|&b| b == b'\n') {
        let nl = i + p;
        let rest = &bytes[nl + 1..];
        if rest.starts_with(b"\r\n") {
            return Some((&bytes[..nl + 1], &rest[2..]));
        }
        if rest.starts_with(b"\n") {
            return Some((&bytes[..nl + 1], &rest[1..]));
        }
        i = nl + 1;
    }
    None
}

/// A `type/subtype; key=value` header such as Content-Type or
/// Content-Disposition.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub(crate) struct ParamValue {
    pub value: String,
    pub params: Vec<(String, String)>,
}

impl ParamValue {
    pub fn param(&self, key: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(key))
            .map(|(_, v)| v.as_str())
    }
}

pub(crate) fn parse_param_value(s: &str) -> ParamValue {
    let mut parts = split_unquoted(s, ';').into_iter();
    let value = parts
        .next()
        .map(|v| v.trim().to_ascii_lowercase())
        .unwrap_or_default();
    let mut params = Vec::new();
    for p in parts {
        let Some((k, v)) = p.split_once('=') else {
            continue;
        };
        let key = k.trim().to_ascii_lowercase();
        let v = v.trim();
        let val = if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
            unescape_quoted(&v[1..v.len() - 1])
        } else {
            v.to_owned()
        };
        params.push((key, decode_encoded_words(&val)));
    }
    ParamValue { value, params }
}

fn unescape_quoted(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            if let Some(n) = chars.next() {
                out.push(n);
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Splits on `sep` outside double quotes, angle brackets and comments.
fn split_unquoted(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut in_quote = false;
    let mut angle = 0u32;
    let mut comment = 0u32;
    let mut escaped = false;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        if escaped {
            escaped = false;
            continue;
        }
        match c {
            '\\' if in_quote || comment > 0 => escaped = true,
            '"' if comment == 0 => in_quote = !in_quote,
            '(' if !in_quote => comment += 1,
            ')' if !in_quote && comment > 0 => comment -= 1,
            '<' if !in_quote && comment == 0 => angle += 1,
            '>' if !in_quote && comment == 0 && angle > 0 => angle -= 1,
            c if c == sep && !in_quote && angle == 0 && comment == 0 => {
                out.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

/// Decodes text through a named charset, replacing undecodable runs with
/// U+FFFD. Returns the text and whether the label was recognised.
pub(crate) fn decode_charset(bytes: &[u8], charset: Option<&str>) -> (String, bool) {
    let label = charset.map(str::trim).filter(|l| !l.is_empty());
    match label {
        None => (String::from_utf8_lossy(bytes).into_owned(), true),
        Some(l) => match encoding_rs::Encoding::for_label(l.as_bytes()) {
            Some(enc) => (enc.decode_without_bom_handling(bytes).0.into_owned(), true),
            None => (String::from_utf8_lossy(bytes).into_owned(), false),
        },
    }
}

fn decode_q_word(text: &str) -> Option<Vec<u8>> {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'_' => out.push(b' '),
            b'=' => {
                let hex = text.get(i + 1..i + 3)?;
                out.push(u8::from_str_radix(hex, 16).ok()?);
                i += 2;
            }
            b => out.push(b),
        }
        i += 1;
    }
    Some(out)
}

fn decode_one_word(word: &str) -> Option<String> {
    let inner = word.strip_prefix("=?")?.strip_suffix("?=")?;
    let mut it = inner.splitn(3, '?');
    let charset = it.next()?;
    let enc = it.next()?;
    let text = it.next()?;
    // RFC 2231 language suffix: charset*lang
    let charset = charset.split('*').next().unwrap_or(charset);
    let bytes = if enc.eq_ignore_ascii_case("b") {
        decode_base64(text.as_bytes()).ok()?
    } else if enc.eq_ignore_ascii_case("q") {
        decode_q_word(text)?
    } else {
        return None;
    };
    Some(decode_charset(&bytes, Some(charset)).0)
}

/// Decodes RFC 2047 encoded words. Whitespace between two adjacent encoded
/// words is dropped; malformed words are kept verbatim.
pub(crate) fn decode_encoded_words(s: &str) -> String {
    if !s.contains("=?") {
        return s.to_owned();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    let mut pending_ws: Option<&str> = None;
    let mut last_was_word = false;
    while !rest.is_empty() {
        let ws_len = rest.len() - rest.trim_start().len();
        if ws_len > 0 {
            pending_ws = Some(&rest[..ws_len]);
            rest = &rest[ws_len..];
            continue;
        }
        let tok_len = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let tok = &rest[..tok_len];
        rest = &rest[tok_len..];
        match decode_one_word(tok) {
            Some(decoded) => {
                if let Some(ws) = pending_ws.take() {
                    if !last_was_word {
                        out.push_str(ws);
                    }
                }
                out.push_str(&decoded);
                last_was_word = true;
            }
            None => {
                if let Some(ws) = pending_ws.take() {
                    out.push_str(ws);
                }
                out.push_str(tok);
                last_was_word = false;
            }
        }
    }
    if let Some(ws) = pending_ws {
        out.push_str(ws);
    }
    out
}

/// One mailbox from an address header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mailbox {
    pub name: Option<String>,
    pub address: String,
}

impl Mailbox {
    /// The part of the address before `@`.
    pub fn local_part(&self) -> &str {
        self.address.split('@').next().unwrap_or(&self.address)
    }
}

fn strip_comments(s: &str) -> (String, Option<String>) {
    let mut out = String::with_capacity(s.len());
    let mut comment = String::new();
    let mut depth = 0u32;
    let mut in_quote = false;
    let mut escaped = false;
    for c in s.chars() {
        if escaped {
            escaped = false;
            if depth > 0 {
                comment.push(c);
            } else {
                out.push(c);
            }
            continue;
        }
        match c {
            '\\' if in_quote || depth > 0 => {
                escaped = true;
                if depth == 0 {
                    out.push(c);
                }
            }
            '"' if depth == 0 => {
                in_quote = !in_quote;
                out.push(c);
            }
            '(' if !in_quote => {
                if depth > 0 {
                    comment.push(c);
                }
                depth += 1;
            }
            ')' if !in_quote && depth > 0 => {
                depth -= 1;
                if depth > 0 {
                    comment.push(c);
                }
            }
            c if depth > 0 => comment.push(c),
            c => out.push(c),
        }
    }
    let comment = comment.trim();
    let comment = (!comment.is_empty()).then(|| comment.to_owned());
    (out, comment)
}

fn clean_display_name(s: &str) -> Option<String> {
    let t = s.trim();
    let t = if t.len() >= 2 && t.starts_with('"') && t.ends_with('"') {
        unescape_quoted(&t[1..t.len() - 1])
    } else {
        t.to_owned()
    };
    let t = decode_encoded_words(t.trim());
    let t = t.trim();
    (!t.is_empty()).then(|| t.to_owned())
}

fn parse_mailbox(s: &str) -> Option<Mailbox> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let (Some(lt), Some(gt)) = (s.rfind('<'), s.rfind('>')) {
        if lt < gt {
            let address = s[lt + 1..gt].trim();
            if address.is_empty() {
                return None;
            }
            let (name, _) = strip_comments(&s[..lt]);
            return Some(Mailbox {
                name: clean_display_name(&name),
                address: address.to_owned(),
            });
        }
    }
    let (addr, comment) = strip_comments(s);
    let address = addr.trim();
    if address.is_empty() || address.contains(char::is_whitespace) || !address.contains('@') {
        return None;
    }
    Some(Mailbox {
        name: comment.and_then(|c| clean_display_name(&c)),
        address: address.to_owned(),
    })
}

/// Parses an address-list header value (From, To, Cc). Group syntax
/// (`name: a@x, b@y;`) is flattened; unparseable entries are skipped.
pub fn parse_address_list(value: &str) -> Vec<Mailbox> {
    let decoded_groups: String = {
        // Remove "group-name:" prefixes and the trailing ';' of groups.
        let mut out = String::with_capacity(value.len());
        let mut in_quote = false;
        let mut angle = false;
        let mut pending = String::new();
        for c in value.chars() {
            match c {
                '"' => in_quote = !in_quote,
                '<' if !in_quote => angle = true,
                '>' if !in_quote => angle = false,
                _ => {}
            }
            if c == ':' && !in_quote && !angle {
                pending.clear();
                continue;
            }
            if c == ';' && !in_quote && !angle {
                out.push_str(&pending);
                out.push(',');
                pending.clear();
                continue;
            }
            pending.push(c);
            if c == ',' && !in_quote && !angle {
                out.push_str(&pending);
                pending.clear();
            }
        }
        out.push_str(&pending);
        out
    };
    split_unquoted(&decoded_groups, ',')
        .into_iter()
        .filter_map(parse_mailbox)
        .collect()
}

pub(crate) fn transfer_encoding_of(headers: &Headers) -> Result<TransferEncoding, String> {
    match headers.get("Content-Transfer-Encoding") {
        None => Ok(TransferEncoding::SevenBit),
        Some(v) => TransferEncoding::from_header(v).ok_or_else(|| v.trim().to_owned()),
    }
}
