//! Body-text cleanup: HTML tag stripping and keyword-matching normalization.

use alloc::string::String;
use core::fmt;
use unicode_normalization::UnicodeNormalization;

/// Text prepared for keyword matching: NFC, lowercase, tag-free,
/// single-spaced and trimmed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct NormalizedText {
    text: String,
}

impl NormalizedText {
    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.text.contains(needle)
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }
}

impl fmt::Display for NormalizedText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl AsRef<str> for NormalizedText {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

const BLOCK_TAGS: &[&str] = &[
    "p",
    "br",
    "div",
    "li",
    "ul",
    "ol",
    "tr",
    "td",
    "th",
    "table",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "hr",
    "blockquote",
    "pre",
    "body",
    "html",
    "head",
    "title",
];

/// Finds the end (index one past `>`) of a tag starting at `start`, which must
/// point at `<`. A tag is `<` followed by a letter, `/`, `!` or `?`, running to
/// the next `>`.
fn tag_end(s: &str, start: usize) -> Option<usize> {
    let rest = &s[start + 1..];
    let first = rest.chars().next()?;
    if !(first.is_alphabetic() || matches!(first, '/' | '!' | '?')) {
        return None;
    }
    rest.find('>').map(|p| start + 1 + p + 1)
}

fn tag_name(tag: &str) -> String {
    tag.trim_start_matches('<')
        .trim_start_matches('/')
        .chars()
        .take_while(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Removes tags. Block-level tags become a space, inline tags vanish.
fn strip_tags(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < s.len() {
        let rest = &s[i..];
        if rest.starts_with('<') {
            if let Some(end) = tag_end(s, i) {
                let name = tag_name(&s[i..end]);
                if BLOCK_TAGS.contains(&name.as_str()) {
                    out.push(' ');
                }
                i = end;
                continue;
            }
        }
        let c = rest.chars().next().unwrap();
        out.push(c);
        i += c.len_utf8();
    }
    out
}

const ENTITIES: &[(&str, char)] = &[
    ("&amp;", '&'),
    ("&lt;", '<'),
    ("&gt;", '>'),
    ("&quot;", '"'),
    ("&apos;", '\''),
];

/// Decodes the five basic character entities, case-insensitively.
fn decode_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    'outer: while i < s.len() {
        let rest = &s[i..];
        if rest.starts_with('&') {
            for (name, ch) in ENTITIES {
                if rest.len() >= name.len()
                    && rest.is_char_boundary(name.len())
                    && rest[..name.len()].eq_ignore_ascii_case(name)
                {
                    out.push(*ch);
                    i += name.len();
                    continue 'outer;
                }
            }
        }
        let c = rest.chars().next().unwrap();
        out.push(c);
        i += c.len_utf8();
    }
    out
}

fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Renders an HTML body as readable text: tags stripped, the basic entities
/// decoded, whitespace collapsed. Case is preserved.
pub fn html_to_text(html: &str) -> String {
    collapse_whitespace(&decode_entities(&strip_tags(html)))
}

fn normalize_once(s: &str) -> String {
    let mut t: String = s.nfc().collect();
    // Entity decoding can expose new tags ("&lt;b&gt;") and vice versa, so run
    // both to a fixpoint. Each productive pass shortens the string.
    loop {
        let next = decode_entities(&strip_tags(&t));
        if next == t {
            break;
        }
        t = next;
    }
    let lowered: String = t.chars().flat_map(char::to_lowercase).collect();
    let composed: String = lowered.nfc().collect();
    collapse_whitespace(&composed)
}

/// Normalizes text for keyword matching.
///
/// Applies NFC, strips HTML tags, decodes the basic entities, lowercases,
/// collapses whitespace runs to one space and trims. The result is a
/// fixpoint: normalizing it again changes nothing.
pub fn normalize_text(s: &str) -> NormalizedText {
    let mut text = normalize_once(s);
    // Case mapping and composition occasionally interact (e.g. KELVIN SIGN);
    // a couple of extra passes reach the fixpoint.
    for _ in 0..4 {
        let next = normalize_once(&text);
        if next == text {
            break;
        }
        text = next;
    }
    NormalizedText { text }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalizes_examples() {
        assert_eq!(normalize_text("  Hello\r\nWORLD ").as_str(), "hello world");
        assert_eq!(normalize_text("<b>Bill</b>  #42").as_str(), "bill #42");
        assert_eq!(normalize_text("").as_str(), "");
    }

    #[test]
    fn html_to_text_keeps_case_and_drops_tags() {
        assert_eq!(html_to_text("<p>Your <b>bill</b></p>"), "Your bill");
        assert_eq!(html_to_text("<div>a</div><div>b</div>"), "a b");
        assert_eq!(html_to_text("Fish &amp; chips &lt;3"), "Fish & chips <3");
    }

    #[test]
    fn lone_angle_brackets_are_text() {
        assert_eq!(normalize_text("a < b > c").as_str(), "a < b > c");
        assert_eq!(normalize_text("x <3").as_str(), "x <3");
    }

    #[test]
    fn escaped_markup_is_removed() {
        assert_eq!(
            normalize_text("&lt;b&gt;Invoice&lt;/b&gt;").as_str(),
            "invoice"
        );
        assert_eq!(normalize_text("&AMP;amp;").as_str(), "&");
    }

    #[test]
    fn composes_to_nfc() {
        assert_eq!(normalize_text("Cafe\u{301}").as_str(), "caf\u{e9}");
    }

    fn assert_invariants(n: &NormalizedText) {
        let s = n.as_str();
        // Symbols such as U+1F150 are "uppercase" yet have no lowercase
        // mapping; the invariant is that lowercasing changes nothing.
        assert_eq!(s.to_lowercase(), s);
        assert_eq!(s.trim(), s);
        assert!(!s.contains("  "));
        assert!(!s.chars().any(|c| c.is_whitespace() && c != ' '), "{s:?}");
        let mut i = 0;
        while let Some(p) = s[i..].find('<') {
            assert!(tag_end(s, i + p).is_none(), "tag left in {s:?}");
            i += p + 1;
        }
    }

    proptest! {
        #[test]
        fn idempotent_on_unicode(s in "\\PC*") {
            let once = normalize_text(&s);
            assert_invariants(&once);
            prop_assert_eq!(normalize_text(once.as_str()), once);
        }

        #[test]
        fn idempotent_on_markup_soup(s in "([<>&/ a-zA-Z;!\\t\\n]|&amp;|&lt;|&gt;|&quot;|&apos;|<b>|</p>|K|\u{212a}|\u{130})*") {
            let once = normalize_text(&s);
            assert_invariants(&once);
            prop_assert_eq!(normalize_text(once.as_str()), once);
        }
    }
}
