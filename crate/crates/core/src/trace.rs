//! Tracing-commit SZZ: iterated blame along a removed line's change history.
//!
//! Each removed line of a fix is blamed; when the blamed commit itself
//! removed lines, the most similar of them (by [`line_similarity`], then by
//! distance to the blamed line) is blamed again in that commit's parent. The
//! walk ends at the commit that introduced the line, which becomes the
//! chain's `Initial` element.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::git::{BlameEntry, CommitId, CommitRef, GitError, LineChange, Repo};
use crate::similarity::line_similarity;
use crate::szz::{removed_lines, Algorithm, LineAttribution, Prediction};

/// Minimum similarity for continuing a trace through a removed line.
pub const DEFAULT_THRESHOLD: f64 = 0.75;

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("{path}:{line} is not removed by {fix}")]
    LineNotRemovedByFix { fix: CommitId, path: String, line: u32 },
    #[error(transparent)]
    Git(#[from] GitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainRole {
    Previous,
    Descendant,
    Initial,
}

impl ChainRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ChainRole::Previous => "previous",
            ChainRole::Descendant => "descendant",
            ChainRole::Initial => "initial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLink {
    pub commit: CommitRef,
    pub role: ChainRole,
    /// Content of the traced line as that commit left it.
    pub matched_line: String,
    pub path: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceChain {
    pub fix: CommitId,
    pub line: LineChange,
    pub chain: Vec<ChainLink>,
}

impl TraceChain {
    pub fn commits(&self) -> impl Iterator<Item = &CommitId> {
        self.chain.iter().map(|l| &l.commit.id)
    }

    pub fn initial(&self) -> &ChainLink {
        self.chain.last().expect("chains are never empty")
    }

    /// Keeps the first `k` links; the new last link becomes `Initial`.
    pub fn truncated(mut self, k: usize) -> Self {
        if k > 0 && self.chain.len() > k {
            self.chain.truncate(k);
            assign_roles(&mut self.chain);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TcMode {
    /// Every chain, in blame order, duplicates kept.
    ChronologicalTrace,
    /// The union of all chain commits.
    UniqueCommits,
    /// Each chain cut to its first `k` links; `-1` traces to the initial
    /// commit.
    CustomBlame(i32),
}

impl TcMode {
    /// Chain length cap implied by the mode, `None` for unbounded.
    pub fn depth(self) -> Option<usize> {
        match self {
            TcMode::CustomBlame(k) if k > 0 => Some(k as usize),
            _ => None,
        }
    }
}

impl fmt::Display for TcMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TcMode::ChronologicalTrace => f.write_str("chronological"),
            TcMode::UniqueCommits => f.write_str("unique"),
            TcMode::CustomBlame(k) => write!(f, "blame:{k}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid TC mode {0:?}")]
pub struct InvalidMode(pub String);

impl FromStr for TcMode {
    type Err = InvalidMode;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "chronological" | "chronological-trace" => return Ok(TcMode::ChronologicalTrace),
            "unique" | "unique-commits" => return Ok(TcMode::UniqueCommits),
            _ => {}
        }
        let k = s.strip_prefix("blame:").unwrap_or(s);
        match k.parse::<i32>() {
            Ok(k) if k >= 1 || k == -1 => Ok(TcMode::CustomBlame(k)),
            _ => Err(InvalidMode(s.to_string())),
        }
    }
}

fn assign_roles(chain: &mut [ChainLink]) {
    let n = chain.len();
    for (i, link) in chain.iter_mut().enumerate() {
        link.role = if i == 0 {
            ChainRole::Previous
        } else if i + 1 == n {
            ChainRole::Initial
        } else {
            ChainRole::Descendant
        };
    }
}

/// The removed line of `origin` to continue the trace through, if any is
/// similar enough to the line `entry` describes.
pub fn continuation(repo: &Repo, entry: &BlameEntry, threshold: f64) -> Result<Option<LineChange>, GitError> {
    if entry.origin.is_root() {
        return Ok(None);
    }
    let diff = repo.first_parent_diff(&entry.origin)?;
    let best = diff
        .removed()
        .map(|r| {
            let sim = line_similarity(&entry.content, &r.content);
            let other_file = r.path != entry.origin_path;
            (sim, other_file, r.line.abs_diff(entry.origin_line), r.line, r)
        })
        .filter(|c| c.0 >= threshold)
        .max_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(b.1.cmp(&a.1))
                .then(b.2.cmp(&a.2))
                .then(b.3.cmp(&a.3))
        });
    Ok(best.map(|c| c.4.clone()))
}

fn trace_from(
    repo: &Repo,
    fix: &CommitRef,
    line: LineChange,
    first: BlameEntry,
    max_depth: Option<usize>,
    threshold: f64,
) -> TraceChain {
    let mut chain = Vec::new();
    let mut seen_commits = HashSet::new();
    let mut visited = HashSet::new();
    let mut entry = first;
    loop {
        visited.insert((entry.origin.id.clone(), entry.origin_path.clone(), entry.origin_line));
        seen_commits.insert(entry.origin.id.clone());
        chain.push(ChainLink {
            commit: entry.origin.clone(),
            role: ChainRole::Descendant,
            matched_line: entry.content.clone(),
            path: entry.origin_path.clone(),
            line: entry.origin_line,
        });
        if max_depth.is_some_and(|d| chain.len() >= d) {
            break;
        }
        let next = match continuation(repo, &entry, threshold) {
            Ok(Some(n)) => n,
            Ok(None) => break,
            Err(e) => {
                log::warn!("{}: diff of {} failed: {e}", fix.id, entry.origin.id);
                break;
            }
        };
        let blamed = match repo.blame_line(&entry.origin, &next.path, next.line) {
            Ok(b) => b,
            Err(e) => {
                log::warn!("{}: blame of {}:{} at {} failed: {e}", fix.id, next.path, next.line, entry.origin.id);
                break;
            }
        };
        let key = (blamed.origin.id.clone(), blamed.origin_path.clone(), blamed.origin_line);
        if visited.contains(&key) || seen_commits.contains(&blamed.origin.id) {
            break;
        }
        entry = blamed;
    }
    assign_roles(&mut chain);
    TraceChain {
        fix: fix.id.clone(),
        line,
        chain,
    }
}

/// Traces one removed line of `fix`. `max_depth` of `-1` (or any value
/// below 1) follows the line to its initial commit.
pub fn trace_line(
    repo: &Repo,
    fix: &CommitRef,
    line: &LineChange,
    max_depth: i32,
    threshold: f64,
) -> Result<TraceChain, TraceError> {
    let removed = removed_lines(repo, fix)?;
    if !removed.contains(line) {
        return Err(TraceError::LineNotRemovedByFix {
            fix: fix.id.clone(),
            path: line.path.clone(),
            line: line.line,
        });
    }
    let first = repo.blame_line(fix, &line.path, line.line)?;
    let depth = (max_depth >= 1).then_some(max_depth as usize);
    Ok(trace_from(repo, fix, line.clone(), first, depth, threshold))
}

/// All chains of a fix, in diff order of its removed lines. Lines whose
/// first blame fails are skipped.
pub fn trace_fix(repo: &Repo, fix: &CommitRef, max_depth: Option<usize>, threshold: f64) -> Result<Vec<TraceChain>, GitError> {
    let removed = removed_lines(repo, fix)?;
    let mut chains = Vec::with_capacity(removed.len());
    let mut by_file: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, l) in removed.iter().enumerate() {
        match by_file.iter_mut().find(|(p, _)| *p == l.path) {
            Some((_, v)) => v.push(i),
            None => by_file.push((l.path.clone(), vec![i])),
        }
    }
    let mut firsts: Vec<Option<BlameEntry>> = vec![None; removed.len()];
    for (path, idxs) in &by_file {
        let nums: Vec<u32> = idxs.iter().map(|&i| removed[i].line).collect();
        for (&i, res) in idxs.iter().zip(repo.blame_lines(fix, path, &nums)) {
            match res {
                Ok(e) => firsts[i] = Some(e),
                Err(e) => log::warn!("{}: blame of {}:{} failed: {e}", fix.id, path, removed[i].line),
            }
        }
    }
    for (line, first) in removed.into_iter().zip(firsts) {
        if let Some(first) = first {
            chains.push(trace_from(repo, fix, line, first, max_depth, threshold));
        }
    }
    Ok(chains)
}

/// Runs TC-SZZ on one fix, returning the prediction and the chains it was
/// built from.
pub fn tcszz(repo: &Repo, fix: &CommitRef, mode: TcMode, threshold: f64) -> Result<(Prediction, Vec<TraceChain>), GitError> {
    let chains = trace_fix(repo, fix, mode.depth(), threshold)?;
    let mut inducing = BTreeSet::new();
    let mut attribution = Vec::new();
    for c in &chains {
        for link in &c.chain {
            inducing.insert(link.commit.id.clone());
            attribution.push(LineAttribution {
                line: c.line.clone(),
                origin: link.commit.id.clone(),
            });
        }
    }
    if mode == TcMode::UniqueCommits {
        let mut seen = HashSet::new();
        attribution.retain(|a| seen.insert(a.origin.clone()));
    }
    let prediction = Prediction {
        fixing_commit: fix.id.clone(),
        algorithm: Algorithm::TC,
        inducing,
        attribution,
    };
    Ok((prediction, chains))
}
