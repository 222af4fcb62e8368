//! Small shared helpers: source spans, percent-encoding, and a stable hash.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A half-open slice of source text, used for coverage accounting and
/// diagnostics. `line` and `col` are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub len: u32,
}

impl Span {
    pub fn new(line: u32, col: u32, len: u32) -> Self {
        Span { line, col, len }
    }

    /// Synthetic span for generated code with no source position.
    pub fn none() -> Self {
        Span { line: 0, col: 0, len: 0 }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}+{}", self.line, self.col, self.len)
    }
}

impl std::str::FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lc, len) = s.rsplit_once('+').ok_or_else(|| format!("bad span `{s}`"))?;
        let (line, col) = lc.split_once(':').ok_or_else(|| format!("bad span `{s}`"))?;
        Ok(Span {
            line: line.parse().map_err(|_| format!("bad span `{s}`"))?,
            col: col.parse().map_err(|_| format!("bad span `{s}`"))?,
            len: len.parse().map_err(|_| format!("bad span `{s}`"))?,
        })
    }
}

/// Percent-encode arbitrary bytes. ASCII alphanumerics and `-_.~` pass
/// through, everything else becomes `%XX` (uppercase hex).
pub fn percent_encode(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len());
    for &b in bytes {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b'~') {
            out.push(b as char);
        } else {
            out.push('%');
            out.push_str(&format!("{b:02X}"));
        }
    }
    out
}

/// Inverse of [`percent_encode`]. Strict: rejects malformed escapes and
/// characters outside the pass-through set.
pub fn percent_decode(text: &str) -> Result<Vec<u8>, String> {
    let raw = text.as_bytes();
    let mut out = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        let b = raw[i];
        if b == b'%' {
            let hex = raw.get(i + 1..i + 3).ok_or_else(|| "truncated escape".to_string())?;
            let hi = (hex[0] as char).to_digit(16).ok_or_else(|| "bad escape".to_string())?;
            let lo = (hex[1] as char).to_digit(16).ok_or_else(|| "bad escape".to_string())?;
            out.push((hi * 16 + lo) as u8);
            i += 3;
        } else if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b'~') {
            out.push(b);
            i += 1;
        } else {
            return Err(format!("unencoded byte {b:#04x} in percent string"));
        }
    }
    Ok(out)
}

/// Single-token encoding of a byte string: percent-encoded, with a bare
/// `%` standing for the empty string (an invalid escape otherwise, so
/// unambiguous).
pub fn encode_str_token(bytes: &[u8]) -> String {
    if bytes.is_empty() {
        "%".to_string()
    } else {
        percent_encode(bytes)
    }
}

pub fn decode_str_token(token: &str) -> Result<Vec<u8>, String> {
    if token == "%" {
        Ok(Vec::new())
    } else {
        percent_decode(token)
    }
}

/// FNV-1a over bytes. Used for path signatures; unlike the std hasher its
/// output is stable across processes and releases, which report
/// determinism depends on.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}
