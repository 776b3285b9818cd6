//! Content digests and identifiers.

use rand::Rng;
use sha2::{Digest, Sha256};

use super::types::ProblemSpec;

/// SHA-256 of `bytes` as lowercase hex.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Dedup key over normalized code and message.
///
/// Code has `#` comments removed (string literals are respected) and every
/// whitespace run, newlines included, collapsed to one space. The message
/// is lowercased and whitespace-collapsed. No syntax-aware normalization.
pub fn canonical_digest(problem: &ProblemSpec) -> String {
    digest_parts(&problem.code, &problem.message)
}

pub(crate) fn digest_parts(code: &str, message: &str) -> String {
    let code = normalize_code(code);
    let message = collapse_whitespace(&message.to_lowercase());
    let mut hasher = Sha256::new();
    hasher.update(code.as_bytes());
    hasher.update([0x1f]);
    hasher.update(message.as_bytes());
    hex::encode(hasher.finalize())
}

pub fn normalize_code(code: &str) -> String {
    collapse_whitespace(&strip_comments(code))
}

pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Removes `#`-to-end-of-line comments outside string literals.
pub fn strip_comments(code: &str) -> String {
    let chars: Vec<char> = code.chars().collect();
    let mut out = String::with_capacity(code.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '\'' | '"' => {
                let triple = i + 2 < chars.len() && chars[i + 1] == c && chars[i + 2] == c;
                let quote_len = if triple { 3 } else { 1 };
                out.extend(&chars[i..i + quote_len]);
                i += quote_len;
                while i < chars.len() {
                    if chars[i] == '\\' && i + 1 < chars.len() {
                        out.push(chars[i]);
                        out.push(chars[i + 1]);
                        i += 2;
                        continue;
                    }
                    if chars[i] == c && (!triple || (i + 2 < chars.len() && chars[i + 1] == c && chars[i + 2] == c)) {
                        out.extend(&chars[i..i + quote_len]);
                        i += quote_len;
                        break;
                    }
                    if !triple && chars[i] == '\n' {
                        // unterminated single-line string
                        break;
                    }
                    out.push(chars[i]);
                    i += 1;
                }
            }
            _ => {
                out.push(c);
                i += 1;
            }
        }
    }
    out
}

/// A random 128-bit identifier as 32 hex digits.
pub fn new_id<R: Rng + ?Sized>(rng: &mut R) -> String {
    format!("{:032x}", rng.random::<u128>())
}
