//! Top-level function spans of C-family source by brace-balanced scanning.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFunction {
    pub name: String,
    pub start_line: u32,
    pub end_line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScanError {
    #[error("unbalanced braces (depth {depth} at end of file)")]
    Unbalanced { depth: i64 },
    #[error("unterminated comment or literal starting on line {line}")]
    Unterminated { line: u32 },
}

const NOT_FUNCTIONS: &[&str] = &[
    "if", "for", "while", "switch", "return", "sizeof", "do", "else", "case", "typeof", "__typeof__",
    "defined", "catch",
];

/// Top-level state of the scanner between tokens.
struct Scanner<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
}

impl<'a> Scanner<'a> {
    fn peek(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.src.get(self.pos).copied()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
        }
        Some(b)
    }

    /// Skips a comment, literal or preprocessor line starting at the cursor.
    /// Returns false when the cursor is on ordinary code.
    fn skip_trivia(&mut self, at_line_start: bool) -> Result<bool, ScanError> {
        let start_line = self.line;
        match (self.peek(0), self.peek(1)) {
            (Some(b'/'), Some(b'/')) => {
                while let Some(b) = self.peek(0) {
                    if b == b'\n' {
                        break;
                    }
                    self.bump();
                }
                Ok(true)
            }
            (Some(b'/'), Some(b'*')) => {
                self.bump();
                self.bump();
                loop {
                    match (self.peek(0), self.peek(1)) {
                        (Some(b'*'), Some(b'/')) => {
                            self.bump();
                            self.bump();
                            return Ok(true);
                        }
                        (Some(_), _) => {
                            self.bump();
                        }
                        (None, _) => return Err(ScanError::Unterminated { line: start_line }),
                    }
                }
            }
            (Some(q @ (b'"' | b'\'')), _) => {
                self.bump();
                loop {
                    match self.bump() {
                        Some(b'\\') => {
                            self.bump();
                        }
                        Some(b) if b == q => return Ok(true),
                        // unterminated literals end at the newline, as a compiler would complain there
                        Some(b'\n') => return Ok(true),
                        Some(_) => {}
                        None => return Err(ScanError::Unterminated { line: start_line }),
                    }
                }
            }
            (Some(b'#'), _) if at_line_start => {
                // preprocessor directive, with backslash continuations
                loop {
                    match self.peek(0) {
                        None => return Ok(true),
                        Some(b'\\') if self.peek(1) == Some(b'\n') => {
                            self.bump();
                            self.bump();
                        }
                        Some(b'\n') => return Ok(true),
                        Some(b'/') if matches!(self.peek(1), Some(b'*' | b'/')) => {
                            self.skip_trivia(false)?;
                        }
                        Some(_) => {
                            self.bump();
                        }
                    }
                }
            }
            _ => Ok(false),
        }
    }
}

/// Name of the function whose header is `sig`, if it looks like one: the
/// identifier before the last top-level parenthesised group, with no `=`
/// outside parentheses.
fn function_name(sig: &str) -> Option<String> {
    let bytes = sig.as_bytes();
    let mut depth = 0i32;
    let mut last_group: Option<(usize, usize)> = None;
    let mut open = 0;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'(' => {
                if depth == 0 {
                    open = i;
                }
                depth += 1;
            }
            b')' => {
                depth -= 1;
                if depth < 0 {
                    return None;
                }
                if depth == 0 {
                    last_group = Some((open, i));
                }
            }
            b'=' | b'[' if depth == 0 => return None,
            _ => {}
        }
    }
    if depth != 0 {
        return None;
    }
    // the header may end in attribute-like macros (`__acquires(x)`) or K&R
    // parameter declarations; take the first group directly after a name
    let mut groups = Vec::new();
    let mut d = 0;
    let mut start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'(' => {
                if d == 0 {
                    start = i;
                }
                d += 1;
            }
            b')' => {
                d -= 1;
                if d == 0 {
                    groups.push((start, i));
                }
            }
            _ => {}
        }
    }
    last_group?;
    for (open, close) in groups {
        // `void (*pick(int n))(void)` returns a function pointer
        let inner = &sig[open + 1..close];
        if inner.trim_start().starts_with('*') {
            if let Some(name) = function_name(inner.trim_start().trim_start_matches('*')) {
                return Some(name);
            }
        }
        let before = sig[..open].trim_end();
        let name_start = before
            .rfind(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .map_or(0, |i| i + 1);
        let name = &before[name_start..];
        if name.is_empty() || name.as_bytes()[0].is_ascii_digit() || NOT_FUNCTIONS.contains(&name) {
            continue;
        }
        return Some(name.to_string());
    }
    None
}

/// Name of an old-style header such as `int f(a, b)`, whose parameter
/// types follow as declarations.
fn kr_header(sig: &str) -> Option<String> {
    let sig = sig.trim();
    let inner = sig.strip_suffix(')')?;
    let params = &inner[inner.rfind('(')? + 1..];
    let plain = params.split(',').map(str::trim).all(|p| {
        !p.is_empty()
            && p != "void"
            && !p.as_bytes()[0].is_ascii_digit()
            && p.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
    });
    if plain {
        function_name(sig)
    } else {
        None
    }
}

/// Spans of top-level function definitions, in file order.
pub fn scan_functions(content: &str) -> Result<Vec<SourceFunction>, ScanError> {
    let mut s = Scanner {
        src: content.as_bytes(),
        pos: 0,
        line: 1,
    };
    let mut out = Vec::new();
    let mut depth: i64 = 0;
    let mut sig = String::new();
    let mut sig_start: Option<u32> = None;
    let mut current: Option<(String, u32)> = None;
    // old-style header waiting for its body
    let mut kr: Option<(String, u32)> = None;
    let mut at_line_start = true;
    while s.peek(0).is_some() {
        if s.skip_trivia(at_line_start)? {
            // literals inside a signature still belong to it
            continue;
        }
        let b = s.bump().expect("peeked");
        match b {
            b'\n' => {
                at_line_start = true;
                if depth == 0 {
                    sig.push(' ');
                }
                continue;
            }
            b' ' | b'\t' | b'\r' | 0x0c | 0x0b => {
                if depth == 0 {
                    sig.push(' ');
                }
                continue;
            }
            b'{' => {
                if depth == 0 {
                    current = function_name(&sig).map(|n| (n, sig_start.unwrap_or(s.line)));
                    if current.is_none() && sig.trim().is_empty() {
                        current = kr.take();
                    }
                    kr = None;
                    sig.clear();
                    sig_start = None;
                }
                depth += 1;
            }
            b'}' => {
                depth -= 1;
                if depth < 0 {
                    return Err(ScanError::Unbalanced { depth });
                }
                if depth == 0 {
                    if let Some((name, start)) = current.take() {
                        out.push(SourceFunction {
                            name,
                            start_line: start,
                            end_line: s.line,
                        });
                    }
                    sig.clear();
                    sig_start = None;
                }
            }
            b';' if depth == 0 => {
                if kr.is_some() {
                    if function_name(&sig).is_some() {
                        kr = None;
                    }
                } else if let Some(close) = sig.rfind(')') {
                    // `int f(a, b) int a;`: header followed by its first declaration
                    let decl = sig[close + 1..].trim();
                    if !decl.is_empty() && !decl.contains('(') {
                        kr = kr_header(&sig[..=close]).map(|n| (n, sig_start.unwrap_or(s.line)));
                    }
                }
                sig.clear();
                sig_start = None;
            }
            _ if depth == 0 => {
                if sig_start.is_none() {
                    sig_start = Some(s.line);
                }
                sig.push(b as char);
            }
            _ => {}
        }
        at_line_start = false;
    }
    if depth != 0 {
        return Err(ScanError::Unbalanced { depth });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(src: &str) -> Vec<(String, u32, u32)> {
        scan_functions(src)
            .unwrap()
            .into_iter()
            .map(|f| (f.name, f.start_line, f.end_line))
            .collect()
    }

    #[test]
    fn single_function() {
        assert_eq!(names("int f(void){\n  return 0;\n}\n"), vec![("f".into(), 1, 3)]);
    }

    #[test]
    fn skips_data_and_types() {
        let src = "struct s {\n int a;\n};\nstatic const struct ops o = {\n .f = g,\n};\nint arr[] = { 1, 2 };\n\
                   static int\nh(int x)\n{\n\tif (x) {\n\t\treturn 1;\n\t}\n\treturn 0;\n}\n";
        assert_eq!(names(src), vec![("h".into(), 8, 15)]);
    }

    #[test]
    fn braces_in_literals_and_comments() {
        let src = "/* { */\nvoid a(void)\n{\n\tputs(\"}\");\n\tchar c = '{';\n\t// }\n}\n#define X {\nvoid b(void) { }\n";
        assert_eq!(names(src), vec![("a".into(), 2, 7), ("b".into(), 9, 9)]);
    }

    #[test]
    fn unbalanced() {
        assert!(scan_functions("void a(void) {\n").is_err());
        assert!(scan_functions("}\n").is_err());
    }

    #[test]
    fn trailing_annotation_macro() {
        let src = "static void lock_it(struct x *p)\n\t__acquires(p->lock)\n{\n}\n";
        assert_eq!(names(src), vec![("lock_it".into(), 1, 4)]);
    }
}
