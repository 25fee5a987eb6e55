//! Parser for zero-context unified patches as printed by `git diff-tree -p -U0`.

use super::types::{FileDiff, Hunk, LineChange, LineKind};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PatchError {
    #[error("malformed hunk header: {0}")]
    BadHunkHeader(String),
    #[error("hunk truncated in file {0}")]
    Truncated(String),
}

struct Pending {
    header_old: Option<String>,
    header_new: Option<String>,
    old_path: Option<String>,
    new_path: Option<String>,
    rename_from: Option<String>,
    rename_to: Option<String>,
    created: bool,
    deleted: bool,
    hunks: Vec<Hunk>,
}

impl Pending {
    fn new(header: &str) -> Self {
        let (header_old, header_new) = split_diff_header(header);
        Pending {
            header_old,
            header_new,
            old_path: None,
            new_path: None,
            rename_from: None,
            rename_to: None,
            created: false,
            deleted: false,
            hunks: Vec::new(),
        }
    }

    fn old(&self) -> Option<String> {
        if self.created {
            return None;
        }
        self.old_path
            .clone()
            .or_else(|| self.rename_from.clone())
            .or_else(|| self.header_old.clone())
    }

    fn new_side(&self) -> Option<String> {
        if self.deleted {
            return None;
        }
        self.new_path
            .clone()
            .or_else(|| self.rename_to.clone())
            .or_else(|| self.header_new.clone())
    }

    fn finish(self) -> FileDiff {
        let old_path = self.old();
        let new_path = self.new_side();
        let renamed = self.rename_from.is_some() && self.rename_to.is_some();
        FileDiff {
            old_path,
            new_path,
            renamed,
            hunks: self.hunks,
        }
    }
}

/// Parses the patch text of one commit into per-file diffs.
pub fn parse_patch(text: &str) -> Result<Vec<FileDiff>, PatchError> {
    let mut files = Vec::new();
    let mut cur: Option<Pending> = None;
    let mut lines = text.split('\n').peekable();

    while let Some(line) = lines.next() {
        if let Some(rest) = line.strip_prefix("diff --git ") {
            if let Some(p) = cur.take() {
                files.push(p.finish());
            }
            cur = Some(Pending::new(rest));
            continue;
        }
        let Some(p) = cur.as_mut() else { continue };

        if let Some(rest) = line.strip_prefix("rename from ") {
            p.rename_from = Some(unquote(rest));
        } else if let Some(rest) = line.strip_prefix("rename to ") {
            p.rename_to = Some(unquote(rest));
        } else if line.starts_with("new file mode ") {
            p.created = true;
        } else if line.starts_with("deleted file mode ") {
            p.deleted = true;
        } else if let Some(rest) = line.strip_prefix("--- ") {
            p.old_path = side_path(rest, "a/");
            if p.old_path.is_none() {
                p.created = true;
            }
        } else if let Some(rest) = line.strip_prefix("+++ ") {
            p.new_path = side_path(rest, "b/");
            if p.new_path.is_none() {
                p.deleted = true;
            }
        } else if line.starts_with("@@ ") {
            let (old_start, old_count, new_start, new_count) = parse_hunk_header(line)?;
            let old_name = p.old().unwrap_or_default();
            let new_name = p.new_side().unwrap_or_default();
            let mut hunk = Hunk::default();
            let (mut removed_left, mut added_left) = (old_count, new_count);
            let (mut old_no, mut new_no) = (old_start, new_start);
            while removed_left > 0 || added_left > 0 {
                let body = lines
                    .next()
                    .ok_or_else(|| PatchError::Truncated(new_name.clone()))?;
                if let Some(content) = body.strip_prefix('-') {
                    if removed_left == 0 {
                        return Err(PatchError::Truncated(old_name));
                    }
                    hunk.removed.push(LineChange {
                        path: old_name.clone(),
                        line: old_no,
                        content: content.to_string(),
                        kind: LineKind::Removed,
                    });
                    old_no += 1;
                    removed_left -= 1;
                } else if let Some(content) = body.strip_prefix('+') {
                    if added_left == 0 {
                        return Err(PatchError::Truncated(new_name));
                    }
                    hunk.added.push(LineChange {
                        path: new_name.clone(),
                        line: new_no,
                        content: content.to_string(),
                        kind: LineKind::Added,
                    });
                    new_no += 1;
                    added_left -= 1;
                } else if body.starts_with('\\') {
                    // "\ No newline at end of file"
                } else {
                    return Err(PatchError::Truncated(new_name));
                }
            }
            // a trailing no-newline marker belongs to the hunk just read
            while lines.peek().is_some_and(|l| l.starts_with('\\')) {
                lines.next();
            }
            p.hunks.push(hunk);
        }
    }
    if let Some(p) = cur.take() {
        files.push(p.finish());
    }
    Ok(files)
}

fn parse_hunk_header(line: &str) -> Result<(u32, u32, u32, u32), PatchError> {
    let bad = || PatchError::BadHunkHeader(line.to_string());
    let inner = line
        .strip_prefix("@@ ")
        .and_then(|r| r.split(" @@").next())
        .ok_or_else(bad)?;
    let mut parts = inner.split(' ');
    let old = parts.next().and_then(|s| s.strip_prefix('-')).ok_or_else(bad)?;
    let new = parts.next().and_then(|s| s.strip_prefix('+')).ok_or_else(bad)?;
    let range = |s: &str| -> Option<(u32, u32)> {
        match s.split_once(',') {
            Some((a, b)) => Some((a.parse().ok()?, b.parse().ok()?)),
            None => Some((s.parse().ok()?, 1)),
        }
    };
    let (os, oc) = range(old).ok_or_else(bad)?;
    let (ns, nc) = range(new).ok_or_else(bad)?;
    Ok((os, oc, ns, nc))
}

fn side_path(rest: &str, prefix: &str) -> Option<String> {
    let rest = rest.strip_suffix('\t').unwrap_or(rest);
    if rest == "/dev/null" {
        return None;
    }
    let p = unquote(rest);
    Some(p.strip_prefix(prefix).map(str::to_string).unwrap_or(p))
}

/// Best-effort split of `a/X b/Y`; only reliable when both sides are equal,
/// which is the case whenever git omits the `---`/`+++` lines (binary files,
/// mode changes).
fn split_diff_header(rest: &str) -> (Option<String>, Option<String>) {
    if rest.starts_with('"') {
        if let Some(end) = closing_quote(rest) {
            let a = unquote(&rest[..=end]);
            let b = unquote(rest[end + 1..].trim_start());
            return (
                a.strip_prefix("a/").map(str::to_string),
                b.strip_prefix("b/").map(str::to_string),
            );
        }
    }
    let body = rest.strip_prefix("a/").unwrap_or(rest);
    let n = body.len();
    // "X b/X": total length is 2*len(X) + 3
    if n >= 3 && (n - 3).is_multiple_of(2) {
        let half = (n - 3) / 2;
        if body.get(half..half + 3) == Some(" b/") && body[..half] == body[half + 3..] {
            let p = body[..half].to_string();
            return (Some(p.clone()), Some(p));
        }
    }
    match body.split_once(" b/") {
        Some((a, b)) => (Some(a.to_string()), Some(b.to_string())),
        None => (None, None),
    }
}

fn closing_quote(s: &str) -> Option<usize> {
    let bytes = s.as_bytes();
    let mut i = 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'"' => return Some(i),
            _ => i += 1,
        }
    }
    None
}

/// Undoes git's C-style path quoting.
pub(crate) fn unquote(s: &str) -> String {
    let Some(inner) = s.strip_prefix('"').and_then(|r| r.strip_suffix('"')) else {
        return s.to_string();
    };
    let bytes = inner.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'\\' || i + 1 >= bytes.len() {
            out.push(bytes[i]);
            i += 1;
            continue;
        }
        let c = bytes[i + 1];
        i += 2;
        match c {
            b'n' => out.push(b'\n'),
            b't' => out.push(b'\t'),
            b'r' => out.push(b'\r'),
            b'a' => out.push(7),
            b'b' => out.push(8),
            b'f' => out.push(12),
            b'v' => out.push(11),
            b'0'..=b'7' => {
                let mut v = u32::from(c - b'0');
                let mut k = 0;
                while k < 2 && i < bytes.len() && (b'0'..=b'7').contains(&bytes[i]) {
                    v = v * 8 + u32::from(bytes[i] - b'0');
                    i += 1;
                    k += 1;
                }
                out.push(v as u8);
            }
            other => out.push(other),
        }
    }
    String::from_utf8_lossy(&out).into_owned()
}
