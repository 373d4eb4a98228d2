//! Content-Transfer-Encoding decoders (base64, quoted-printable, identity).

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// The transfer encodings a MIME part may declare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransferEncoding {
    Base64,
    QuotedPrintable,
    #[serde(rename = "7bit")]
    SevenBit,
    #[serde(rename = "8bit")]
    EightBit,
    Binary,
}

impl TransferEncoding {
    /// Maps a `Content-Transfer-Encoding` header value. `None` means the
    /// encoding is not one we can decode.
    pub fn from_header(value: &str) -> Option<Self> {
        let v = value.trim();
        let enc = if v.eq_ignore_ascii_case("base64") {
            Self::Base64
        } else if v.eq_ignore_ascii_case("quoted-printable") {
            Self::QuotedPrintable
        } else if v.eq_ignore_ascii_case("7bit") {
            Self::SevenBit
        } else if v.eq_ignore_ascii_case("8bit") {
            Self::EightBit
        } else if v.eq_ignore_ascii_case("binary") {
            Self::Binary
        } else {
            return None;
        };
        Some(enc)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Base64 => "base64",
            Self::QuotedPrintable => "quoted-printable",
            Self::SevenBit => "7bit",
            Self::EightBit => "8bit",
            Self::Binary => "binary",
        }
    }
}

impl fmt::Display for TransferEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransferError {
    #[error("corrupt {encoding} payload at byte {offset}: {reason}")]
    CorruptEncoding {
        encoding: TransferEncoding,
        offset: usize,
        reason: &'static str,
    },
    #[error("unsupported transfer encoding {0:?}")]
    UnsupportedEncoding(String),
}

/// Decodes a part body according to its transfer encoding.
///
/// 7bit, 8bit and binary are the identity.
pub fn decode_transfer_encoding(
    encoded: &[u8],
    encoding: TransferEncoding,
) -> Result<Vec<u8>, TransferError> {
    match encoding {
        TransferEncoding::Base64 => decode_base64(encoded),
        TransferEncoding::QuotedPrintable => decode_quoted_printable(encoded),
        TransferEncoding::SevenBit | TransferEncoding::EightBit | TransferEncoding::Binary => {
            Ok(encoded.to_vec())
        }
    }
}

const B64_ALPHABET: &[u8; 64] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

fn b64_value(c: u8) -> Option<u8> {
    match c {
        b'A'..=b'Z' => Some(c - b'A'),
        b'a'..=b'z' => Some(c - b'a' + 26),
        b'0'..=b'9' => Some(c - b'0' + 52),
        b'+' => Some(62),
        b'/' => Some(63),
        _ => None,
    }
}

fn b64_err(offset: usize, reason: &'static str) -> TransferError {
    TransferError::CorruptEncoding {
        encoding: TransferEncoding::Base64,
        offset,
        reason,
    }
}

/// Base64 per RFC 4648 with the line breaks and whitespace mail inserts.
///
/// Padding may be omitted on the final quantum, but a `=` anywhere else, or a
/// dangling single sextet, is rejected.
pub fn decode_base64(input: &[u8]) -> Result<Vec<u8>, TransferError> {
    let mut out = Vec::with_capacity(input.len() / 4 * 3);
    let mut quad = [0u8; 4];
    let mut filled = 0usize;
    let mut padding = 0usize;

    for (offset, &c) in input.iter().enumerate() {
        if matches!(c, b' ' | b'\t' | b'\r' | b'\n') {
            continue;
        }
        if c == b'=' {
            if filled < 2 {
                return Err(b64_err(offset, "padding inside a quantum"));
            }
            padding += 1;
            if filled + padding > 4 {
                return Err(b64_err(offset, "too much padding"));
            }
            continue;
        }
        if padding > 0 {
            return Err(b64_err(offset, "data after padding"));
        }
        let v = b64_value(c).ok_or_else(|| b64_err(offset, "byte outside the base64 alphabet"))?;
        quad[filled] = v;
        filled += 1;
        if filled == 4 {
            out.push((quad[0] << 2) | (quad[1] >> 4));
            out.push((quad[1] << 4) | (quad[2] >> 2));
            out.push((quad[2] << 6) | quad[3]);
            filled = 0;
        }
    }

    match filled {
        0 if padding == 0 => {}
        0 => return Err(b64_err(input.len(), "padding after a complete quantum")),
        1 => return Err(b64_err(input.len(), "truncated quantum")),
        2 => {
            if padding != 0 && padding != 2 {
                return Err(b64_err(input.len(), "wrong padding length"));
            }
            out.push((quad[0] << 2) | (quad[1] >> 4));
        }
        3 => {
            if padding > 1 {
                return Err(b64_err(input.len(), "wrong padding length"));
            }
            out.push((quad[0] << 2) | (quad[1] >> 4));
            out.push((quad[1] << 4) | (quad[2] >> 2));
        }
        _ => unreachable!(),
    }
    Ok(out)
}

/// Plain base64 without line wrapping. Used for RFC 2047 encoded words.
pub fn encode_base64(input: &[u8]) -> String {
    let mut out = String::with_capacity(input.len().div_ceil(3) * 4);
    for chunk in input.chunks(3) {
        let b = [
            chunk[0],
            chunk.get(1).copied().unwrap_or(0),
            chunk.get(2).copied().unwrap_or(0),
        ];
        let n = (u32::from(b[0]) << 16) | (u32::from(b[1]) << 8) | u32::from(b[2]);
        for i in 0..4 {
            if i <= chunk.len() {
                out.push(B64_ALPHABET[((n >> (18 - 6 * i)) & 0x3f) as usize] as char);
            } else {
                out.push('=');
            }
        }
    }
    out
}

fn hex_value(c: u8) -> Option<u8> {
    match c {
        b'0'..=b'9' => Some(c - b'0'),
        b'A'..=b'F' => Some(c - b'A' + 10),
        b'a'..=b'f' => Some(c - b'a' + 10),
        _ => None,
    }
}

fn qp_err(offset: usize, reason: &'static str) -> TransferError {
    TransferError::CorruptEncoding {
        encoding: TransferEncoding::QuotedPrintable,
        offset,
        reason,
    }
}

/// Quoted-printable per RFC 2045 section 6.7.
///
/// Soft line breaks (`=` at end of line, optionally followed by transport
/// padding) are removed, unencoded trailing whitespace is dropped, and hard
/// line breaks are copied through unchanged. Lowercase hex digits are
/// accepted.
pub fn decode_quoted_printable(input: &[u8]) -> Result<Vec<u8>, TransferError> {
    let mut out = Vec::with_capacity(input.len());
    let mut line_start = 0usize;

    while line_start <= input.len() {
        let (line_end, brk_end) = match input[line_start..].iter().position(|&b| b == b'\n') {
            Some(p) => {
                let nl = line_start + p;
                if nl > line_start && input[nl - 1] == b'\r' {
                    (nl - 1, nl + 1)
                } else {
                    (nl, nl + 1)
                }
            }
            None => (input.len(), input.len()),
        };
        let has_break = brk_end > line_end;

        let mut content_end = line_end;
        while content_end > line_start && matches!(input[content_end - 1], b' ' | b'\t') {
            content_end -= 1;
        }

        let mut soft_break = false;
        let mut i = line_start;
        while i < content_end {
            let c = input[i];
            if c == b'=' {
                if i + 1 == content_end {
                    soft_break = true;
                    i += 1;
                    continue;
                }
                if i + 2 >= content_end {
                    return Err(qp_err(i, "incomplete escape"));
                }
                match (hex_value(input[i + 1]), hex_value(input[i + 2])) {
                    (Some(h), Some(l)) => out.push((h << 4) | l),
                    _ => return Err(qp_err(i, "invalid escape")),
                }
                i += 3;
            } else {
                out.push(c);
                i += 1;
            }
        }

        if has_break && !soft_break {
            out.extend_from_slice(&input[line_end..brk_end]);
        }
        if !has_break {
            break;
        }
        line_start = brk_end;
    }
    Ok(out)
}
