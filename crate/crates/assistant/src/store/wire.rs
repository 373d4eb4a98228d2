//! IMAP wire syntax shared by the client and the loopback server: logical
//! lines with embedded literals, a tokenizer, argument quoting, sequence sets
//! and modified UTF-7 mailbox names.

use std::io::{self, BufRead, Read};

use base64::alphabet;
use base64::engine::{general_purpose::GeneralPurpose, general_purpose::NO_PAD, Engine};

const MAX_LINE: usize = 1 << 20;
const MAX_LITERAL: usize = 256 << 20;

/// One chunk of a logical line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Piece {
    Text(Vec<u8>),
    Literal(Vec<u8>),
}

/// A logical line: text with any `{n}` literals already read in.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Line {
    pub pieces: Vec<Piece>,
}

impl Line {
    /// The text before the first literal, as UTF-8 (lossy).
    pub fn head(&self) -> String {
        match self.pieces.first() {
            Some(Piece::Text(t)) => String::from_utf8_lossy(t).into_owned(),
            _ => String::new(),
        }
    }

    /// Human-readable form with literal contents replaced by their size.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for p in &self.pieces {
            match p {
                Piece::Text(t) => s.push_str(&String::from_utf8_lossy(t)),
                Piece::Literal(l) => s.push_str(&format!("{{{} bytes}}", l.len())),
            }
        }
        s
    }

    pub fn tokens(&self) -> Result<Vec<Tok>, String> {
        Tokenizer::new(&self.pieces).all()
    }
}

fn literal_len(text: &[u8]) -> Option<(usize, usize)> {
    let t = text.strip_suffix(b"}")?;
    let open = t.iter().rposition(|&b| b == b'{')?;
    let digits = t[open + 1..].strip_suffix(b"+").unwrap_or(&t[open + 1..]);
    if digits.is_empty() || !digits.iter().all(u8::is_ascii_digit) {
        return None;
    }
    let n = std::str::from_utf8(digits).ok()?.parse().ok()?;
    Some((open, n))
}

fn read_crlf_line<R: BufRead>(r: &mut R) -> io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    let n = (&mut *r)
        .take(MAX_LINE as u64)
        .read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Err(io::Error::new(
            io::ErrorKind::UnexpectedEof,
            "connection closed",
        ));
    }
    if buf.last() != Some(&b'\n') {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "line too long or truncated",
        ));
    }
    buf.pop();
    if buf.last() == Some(&b'\r') {
        buf.pop();
    }
    Ok(buf)
}

/// Reads one logical line. `before_literal` runs before each literal's bytes
/// are read (the server uses it to send a continuation request).
pub fn read_line(
    r: &mut impl BufRead,
    mut before_literal: impl FnMut() -> io::Result<()>,
) -> io::Result<Line> {
    let mut line = Line::default();
    loop {
        let mut text = read_crlf_line(r)?;
        match literal_len(&text) {
            Some((open, n)) => {
                if n > MAX_LITERAL {
                    return Err(io::Error::new(
                        io::ErrorKind::InvalidData,
                        "literal too large",
                    ));
                }
                text.truncate(open);
                line.pieces.push(Piece::Text(text));
                before_literal()?;
                let mut lit = vec![0; n];
                r.read_exact(&mut lit)?;
                line.pieces.push(Piece::Literal(lit));
            }
            None => {
                line.pieces.push(Piece::Text(text));
                return Ok(line);
            }
        }
    }
}

/// A token of IMAP syntax. Atoms keep any `[...]` section they carry, so
/// `BODY[HEADER.FIELDS (DATE)]` is a single atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Atom(String),
    Str(Vec<u8>),
    List(Vec<Tok>),
}

impl Tok {
    pub fn atom(&self) -> Option<&str> {
        match self {
            Tok::Atom(a) => Some(a),
            _ => None,
        }
    }

    /// Atom or string contents as text; `NIL` is `None`.
    pub fn text(&self) -> Option<String> {
        match self {
            Tok::Atom(a) if a.eq_ignore_ascii_case("NIL") => None,
            Tok::Atom(a) => Some(a.clone()),
            Tok::Str(s) => Some(String::from_utf8_lossy(s).into_owned()),
            Tok::List(_) => None,
        }
    }

    pub fn bytes(&self) -> Option<&[u8]> {
        match self {
            Tok::Str(s) => Some(s),
            Tok::Atom(a) => Some(a.as_bytes()),
            Tok::List(_) => None,
        }
    }

    pub fn list(&self) -> Option<&[Tok]> {
        match self {
            Tok::List(l) => Some(l),
            _ => None,
        }
    }

    pub fn is_atom(&self, s: &str) -> bool {
        self.atom().is_some_and(|a| a.eq_ignore_ascii_case(s))
    }
}

struct Tokenizer<'a> {
    pieces: &'a [Piece],
    piece: usize,
    pos: usize,
}

impl<'a> Tokenizer<'a> {
    fn new(pieces: &'a [Piece]) -> Self {
        Self {
            pieces,
            piece: 0,
            pos: 0,
        }
    }

    fn peek(&self) -> Option<u8> {
        match self.pieces.get(self.piece)? {
            Piece::Text(t) => t.get(self.pos).copied(),
            Piece::Literal(_) => None,
        }
    }

    /// Skips spaces; steps over exhausted text pieces.
    fn skip_space(&mut self) {
        loop {
            match self.pieces.get(self.piece) {
                Some(Piece::Text(t)) => {
                    while t.get(self.pos) == Some(&b' ') {
                        self.pos += 1;
                    }
                    if self.pos < t.len() {
                        return;
                    }
                    if self.piece + 1 < self.pieces.len() {
                        self.piece += 1;
                        self.pos = 0;
                    } else {
                        return;
                    }
                }
                _ => return,
            }
        }
    }

    fn at_end(&self) -> bool {
        match self.pieces.get(self.piece) {
            None => true,
            Some(Piece::Text(t)) => self.pos >= t.len() && self.piece + 1 >= self.pieces.len(),
            Some(Piece::Literal(_)) => false,
        }
    }

    fn all(mut self) -> Result<Vec<Tok>, String> {
        let mut out = Vec::new();
        loop {
            self.skip_space();
            if self.at_end() {
                return Ok(out);
            }
            out.push(self.token()?);
        }
    }

    fn token(&mut self) -> Result<Tok, String> {
        if let Some(Piece::Literal(l)) = self.pieces.get(self.piece) {
            self.piece += 1;
            self.pos = 0;
            return Ok(Tok::Str(l.clone()));
        }
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_space();
                    match self.peek() {
                        Some(b')') => {
                            self.pos += 1;
                            return Ok(Tok::List(items));
                        }
                        None if self.at_end() => return Err("unterminated list".into()),
                        _ => items.push(self.token()?),
                    }
                }
            }
            Some(b'"') => {
                self.pos += 1;
                let mut s = Vec::new();
                loop {
                    match self.peek() {
                        None => return Err("unterminated quoted string".into()),
                        Some(b'"') => {
                            self.pos += 1;
                            return Ok(Tok::Str(s));
                        }
                        Some(b'\\') => {
                            self.pos += 1;
                            let c = self.peek().ok_or("dangling escape")?;
                            s.push(c);
                            self.pos += 1;
                        }
                        Some(c) => {
                            s.push(c);
                            self.pos += 1;
                        }
                    }
                }
            }
            Some(b')') => Err("unexpected ')'".into()),
            Some(_) => {
                let mut s = Vec::new();
                let mut depth = 0usize;
                while let Some(c) = self.peek() {
                    match c {
                        b'[' => depth += 1,
                        b']' => depth = depth.saturating_sub(1),
                        b' ' | b'(' | b')' if depth == 0 => break,
                        _ => {}
                    }
                    s.push(c);
                    self.pos += 1;
                }
                Ok(Tok::Atom(String::from_utf8_lossy(&s).into_owned()))
            }
            None => Err("unexpected end of line".into()),
        }
    }
}

/// How an astring argument goes on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Encoded {
    Text(String),
    Literal(Vec<u8>),
}

fn is_atom_char(c: char) -> bool {
    c.is_ascii_graphic() && !matches!(c, '(' | ')' | '{' | '%' | '*' | '"' | '\\' | ']')
}

/// Encodes a string argument as an atom, a quoted string or, when it has
/// line breaks or non-ASCII bytes, a literal.
pub fn astring(s: &str) -> Encoded {
    if !s.is_empty() && s.chars().all(is_atom_char) {
        return Encoded::Text(s.to_owned());
    }
    if s.bytes().all(|b| (0x20..0x7f).contains(&b)) {
        let mut q = String::with_capacity(s.len() + 2);
        q.push('"');
        for c in s.chars() {
            if c == '"' || c == '\\' {
                q.push('\\');
            }
            q.push(c);
        }
        q.push('"');
        return Encoded::Text(q);
    }
    Encoded::Literal(s.as_bytes().to_vec())
}

/// Renders a UID list as a compact sequence set (`1:3,7`).
pub fn sequence_set(uids: &[u32]) -> String {
    let mut sorted = uids.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out = String::new();
    let mut i = 0;
    while i < sorted.len() {
        let start = sorted[i];
        let mut end = start;
        while i + 1 < sorted.len() && sorted[i + 1] == end + 1 {
            i += 1;
            end = sorted[i];
        }
        if !out.is_empty() {
            out.push(',');
        }
        if start == end {
            out.push_str(&start.to_string());
        } else {
            out.push_str(&format!("{start}:{end}"));
        }
        i += 1;
    }
    out
}

/// Parses a sequence set; `*` stands for `max`.
pub fn parse_sequence_set(s: &str, max: u32) -> Option<Vec<(u32, u32)>> {
    let num = |t: &str| -> Option<u32> {
        if t == "*" {
            Some(max)
        } else {
            t.parse().ok().filter(|&n| n > 0)
        }
    };
    s.split(',')
        .map(|part| match part.split_once(':') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                Some((a.min(b), a.max(b)))
            }
            None => num(part).map(|n| (n, n)),
        })
        .collect()
}

const MUTF7: GeneralPurpose = {
    // The IMAP variant of base64 swaps '/' for ','.
    match alphabet::Alphabet::new(
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+,",
    ) {
        Ok(a) => GeneralPurpose::new(&a, NO_PAD),
        Err(_) => panic!("invalid alphabet"),
    }
};

/// Mailbox name in modified UTF-7.
pub fn encode_mailbox(name: &str) -> String {
    let mut out = String::new();
    let mut pending: Vec<u16> = Vec::new();
    let flush = |pending: &mut Vec<u16>, out: &mut String| {
        if pending.is_empty() {
            return;
        }
        let bytes: Vec<u8> = pending.iter().flat_map(|u| u.to_be_bytes()).collect();
        out.push('&');
        out.push_str(&MUTF7.encode(bytes));
        out.push('-');
        pending.clear();
    };
    for c in name.chars() {
        if (' '..='~').contains(&c) {
            flush(&mut pending, &mut out);
            out.push(c);
            if c == '&' {
                out.push('-');
            }
        } else {
            let mut buf = [0u16; 2];
            pending.extend_from_slice(c.encode_utf16(&mut buf));
        }
    }
    flush(&mut pending, &mut out);
    out
}

/// Inverse of [`encode_mailbox`]; `None` on malformed input.
pub fn decode_mailbox(name: &str) -> Option<String> {
    let mut out = String::new();
    let mut rest = name;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let after = &rest[amp + 1..];
        let dash = after.find('-')?;
        if dash == 0 {
            out.push('&');
        } else {
            let bytes = MUTF7.decode(&after[..dash]).ok()?;
            if bytes.len() % 2 != 0 {
                return None;
            }
            let units: Vec<u16> = bytes
                .chunks(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect();
            out.push_str(&String::from_utf16(&units).ok()?);
        }
        rest = &after[dash + 1..];
    }
    out.push_str(rest);
    Some(out)
}
