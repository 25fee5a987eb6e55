use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GitError;

/// Full 40-character lowercase hex object name of a commit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CommitId(String);

impl CommitId {
    pub fn new(s: impl Into<String>) -> Result<Self, GitError> {
        let s = s.into();
        if is_full_id(&s) {
            Ok(CommitId(s))
        } else {
            Err(GitError::InvalidId(s))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Display abbreviation used by kernel-style `Fixes:` trailers.
    pub fn short(&self) -> &str {
        &self.0[..12]
    }
}

pub(crate) fn is_full_id(s: &str) -> bool {
    s.len() == 40 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

impl fmt::Display for CommitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for CommitId {
    type Err = GitError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CommitId::new(s)
    }
}

impl TryFrom<String> for CommitId {
    type Error = GitError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        CommitId::new(s)
    }
}

impl From<CommitId> for String {
    fn from(id: CommitId) -> String {
        id.0
    }
}

impl AsRef<str> for CommitId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// A commit together with the metadata the algorithms order and filter by.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CommitRef {
    pub id: CommitId,
    /// Committer time, seconds since the epoch.
    pub timestamp: i64,
    pub parent_count: u32,
    pub subject: String,
}

impl CommitRef {
    pub fn is_merge(&self) -> bool {
        self.parent_count >= 2
    }

    pub fn is_root(&self) -> bool {
        self.parent_count == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineKind {
    Removed,
    Added,
}

/// One removed or added line of a diff. Removed lines are numbered on the
/// parent side, added lines on the child side (both 1-based).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineChange {
    pub path: String,
    pub line: u32,
    pub content: String,
    pub kind: LineKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub removed: Vec<LineChange>,
    pub added: Vec<LineChange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDiff {
    /// `None` when the file is created by the commit.
    pub old_path: Option<String>,
    /// `None` when the file is deleted by the commit.
    pub new_path: Option<String>,
    pub renamed: bool,
    pub hunks: Vec<Hunk>,
}

impl FileDiff {
    pub fn removed(&self) -> impl Iterator<Item = &LineChange> {
        self.hunks.iter().flat_map(|h| h.removed.iter())
    }

    pub fn added(&self) -> impl Iterator<Item = &LineChange> {
        self.hunks.iter().flat_map(|h| h.added.iter())
    }
}

/// All line changes a commit makes relative to its first parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffSet {
    pub commit: CommitRef,
    pub files: Vec<FileDiff>,
}

impl DiffSet {
    pub fn removed(&self) -> impl Iterator<Item = &LineChange> {
        self.files.iter().flat_map(|f| f.removed())
    }

    pub fn added(&self) -> impl Iterator<Item = &LineChange> {
        self.files.iter().flat_map(|f| f.added())
    }

    pub fn removed_count(&self) -> usize {
        self.files.iter().map(|f| f.removed().count()).sum()
    }

    pub fn added_count(&self) -> usize {
        self.files.iter().map(|f| f.added().count()).sum()
    }

    /// Finds the hunk that added `line` of `path` (child side).
    pub fn hunk_adding(&self, path: &str, line: u32) -> Option<(&FileDiff, &Hunk)> {
        self.files
            .iter()
            .filter(|f| f.new_path.as_deref() == Some(path))
            .flat_map(|f| f.hunks.iter().map(move |h| (f, h)))
            .find(|(_, h)| h.added.iter().any(|l| l.line == line))
    }
}

/// Result of blaming a single line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlameEntry {
    pub origin: CommitRef,
    pub origin_path: String,
    pub origin_line: u32,
    pub content: String,
}

/// Added/removed line totals for one commit, as reported by a history-wide
/// numstat pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LineStats {
    pub added: usize,
    pub removed: usize,
}
