//! Line classification for comment-aware and cosmetic-aware variants.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LineClass {
    Code,
    Blank,
    CommentOnly,
    /// Paired removed/added lines that differ only in whitespace.
    WhitespaceOnlyDelta,
}

impl LineClass {
    /// Blank and comment-only lines carry no behaviour.
    pub fn is_noise(self) -> bool {
        matches!(self, LineClass::Blank | LineClass::CommentOnly)
    }
}

/// Classifies every line of a file with a forward scan, so that lines inside
/// a `/* ... */` span that started earlier are recognised as comments.
///
/// Lines whose first non-blank character is `#`, or which open with a
/// Python docstring quote, count as comment lines too.
pub fn classify_file_lines(content: &str) -> Vec<LineClass> {
    let mut in_block = false;
    let mut out = Vec::new();
    for line in content.split('\n') {
        let trimmed = line.trim();
        let starts_in_block = in_block;
        let mut has_code = false;
        let bytes = line.as_bytes();
        let mut i = 0;
        let mut quote: Option<u8> = None;
        while i < bytes.len() {
            let b = bytes[i];
            if in_block {
                if b == b'*' && bytes.get(i + 1) == Some(&b'/') {
                    in_block = false;
                    i += 2;
                } else {
                    i += 1;
                }
                continue;
            }
            if let Some(q) = quote {
                if b == b'\\' {
                    i += 2;
                    continue;
                }
                if b == q {
                    quote = None;
                }
                i += 1;
                continue;
            }
            match b {
                b' ' | b'\t' | b'\r' | 0x0b | 0x0c => i += 1,
                b'/' if bytes.get(i + 1) == Some(&b'/') => break,
                b'/' if bytes.get(i + 1) == Some(&b'*') => {
                    in_block = true;
                    i += 2;
                }
                b'"' | b'\'' => {
                    quote = Some(b);
                    has_code = true;
                    i += 1;
                }
                _ => {
                    has_code = true;
                    i += 1;
                }
            }
        }
        let class = if trimmed.is_empty() {
            LineClass::Blank
        } else if !starts_in_block
            && (trimmed.starts_with('#') || trimmed.starts_with("\"\"\"") || trimmed.starts_with("'''"))
        {
            LineClass::CommentOnly
        } else if has_code {
            LineClass::Code
        } else {
            LineClass::CommentOnly
        };
        out.push(class);
    }
    // a trailing newline does not start another line
    if content.ends_with('\n') {
        out.pop();
    }
    out
}

/// Classifies a single line in isolation.
pub fn classify_line(line: &str) -> LineClass {
    classify_file_lines(line).first().copied().unwrap_or(LineClass::Blank)
}

/// `WhitespaceOnlyDelta` when the pair differs only in whitespace.
pub fn classify_pair(removed: &str, added: &str) -> Option<LineClass> {
    let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
    (removed != added && strip(removed) == strip(added)).then_some(LineClass::WhitespaceOnlyDelta)
}

/// Line text with inline comments and all whitespace removed. Two lines with
/// equal non-empty signatures differ only cosmetically.
pub fn code_signature(line: &str) -> String {
    let bytes = line.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    let mut quote: Option<u8> = None;
    let mut in_block = false;
    while i < bytes.len() {
        let b = bytes[i];
        if in_block {
            if b == b'*' && bytes.get(i + 1) == Some(&b'/') {
                in_block = false;
                i += 2;
            } else {
                i += 1;
            }
            continue;
        }
        if let Some(q) = quote {
            out.push(b);
            if b == b'\\' {
                if let Some(&n) = bytes.get(i + 1) {
                    out.push(n);
                }
                i += 2;
                continue;
            }
            if b == q {
                quote = None;
            }
            i += 1;
            continue;
        }
        match b {
            b'/' if bytes.get(i + 1) == Some(&b'/') => break,
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                in_block = true;
                i += 2;
            }
            b'"' | b'\'' => {
                quote = Some(b);
                out.push(b);
                i += 1;
            }
            _ if b.is_ascii_whitespace() => i += 1,
            _ => {
                out.push(b);
                i += 1;
            }
        }
    }
    String::from_utf8_lossy(&out).into_owned()
}

/// Whether replacing `removed` with `added` is a cosmetic change: only
/// whitespace or comments differ and some code remains.
pub fn is_cosmetic_pair(removed: &str, added: &str) -> bool {
    let sig = code_signature(added);
    !sig.is_empty() && sig == code_signature(removed)
}
