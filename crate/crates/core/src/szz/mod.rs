//! Blame-based SZZ variants.
//!
//! All variants start from the lines a fixing commit removes (modified lines
//! show up through their removed side) and blame them in the fix's first
//! parent:
//!
//! * `B` keeps every blamed origin.
//! * `PYD` drops blank and comment-only removed lines first.
//! * `AG` additionally steps past origins whose change to the line was
//!   cosmetic (whitespace or comment edits), re-blaming the pre-image line.
//! * `MA` also steps past meta-changes (merges and commits without line
//!   changes).
//! * `L` and `R` pick one commit out of the `AG` candidates: the one with
//!   the largest diff, or the most recent one.

pub mod lines;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::git::{BlameEntry, CommitId, CommitRef, GitError, LineChange, Repo};
use crate::similarity::line_similarity;

pub use lines::{
    classify_file_lines, classify_line, classify_pair, code_signature, is_cosmetic_pair, LineClass,
};

/// Upper bound on consecutive blame step-pasts for one line.
pub const MAX_STEP_PAST: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    B,
    AG,
    L,
    R,
    MA,
    PYD,
    TC,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::B,
        Algorithm::AG,
        Algorithm::L,
        Algorithm::R,
        Algorithm::MA,
        Algorithm::PYD,
        Algorithm::TC,
    ];

    /// The six pre-existing variants, without the tracer.
    pub const CLASSIC: [Algorithm; 6] = [
        Algorithm::B,
        Algorithm::AG,
        Algorithm::L,
        Algorithm::R,
        Algorithm::MA,
        Algorithm::PYD,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::B => "B",
            Algorithm::AG => "AG",
            Algorithm::L => "L",
            Algorithm::R => "R",
            Algorithm::MA => "MA",
            Algorithm::PYD => "PYD",
            Algorithm::TC => "TC",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Algorithm::B => "B-SZZ",
            Algorithm::AG => "AG-SZZ",
            Algorithm::L => "L-SZZ",
            Algorithm::R => "R-SZZ",
            Algorithm::MA => "MA-SZZ",
            Algorithm::PYD => "SZZ@PYD",
            Algorithm::TC => "TC-SZZ",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown algorithm {0:?} (expected one of B, AG, L, R, MA, PYD, TC)")]
pub struct UnknownAlgorithm(pub String);

impl FromStr for Algorithm {
    type Err = UnknownAlgorithm;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase();
        let norm = norm.trim_end_matches("-SZZ");
        match norm {
            "B" => Ok(Algorithm::B),
            "AG" => Ok(Algorithm::AG),
            "L" => Ok(Algorithm::L),
            "R" => Ok(Algorithm::R),
            "MA" => Ok(Algorithm::MA),
            "PYD" | "SZZ@PYD" => Ok(Algorithm::PYD),
            "TC" => Ok(Algorithm::TC),
            _ => Err(UnknownAlgorithm(s.to_string())),
        }
    }
}

/// A removed line of the fix and the commit it was attributed to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineAttribution {
    pub line: LineChange,
    pub origin: CommitId,
}

/// Bug-inducing commits predicted for one fix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub fixing_commit: CommitId,
    pub algorithm: Algorithm,
    pub inducing: BTreeSet<CommitId>,
    pub attribution: Vec<LineAttribution>,
}

impl Prediction {
    pub fn empty(fix: &CommitId, algorithm: Algorithm) -> Self {
        Prediction {
            fixing_commit: fix.clone(),
            algorithm,
            inducing: BTreeSet::new(),
            attribution: Vec::new(),
        }
    }

    fn from_attribution(fix: &CommitId, algorithm: Algorithm, attribution: Vec<LineAttribution>) -> Self {
        Prediction {
            fixing_commit: fix.clone(),
            algorithm,
            inducing: attribution.iter().map(|a| a.origin.clone()).collect(),
            attribution,
        }
    }

    /// Keeps only `chosen` (and the lines attributed to it).
    fn narrowed(self, algorithm: Algorithm, chosen: Option<CommitId>) -> Self {
        let Some(chosen) = chosen else {
            return Prediction::empty(&self.fixing_commit, algorithm);
        };
        Prediction {
            fixing_commit: self.fixing_commit,
            algorithm,
            attribution: self
                .attribution
                .into_iter()
                .filter(|a| a.origin == chosen)
                .collect(),
            inducing: BTreeSet::from([chosen]),
        }
    }
}

/// Lines removed or modified by `fix`, in diff order.
pub fn removed_lines(repo: &Repo, fix: &CommitRef) -> Result<Vec<LineChange>, GitError> {
    Ok(repo.commit_diff(fix)?.removed().cloned().collect())
}

#[derive(Debug, Clone, Copy, Default)]
struct Filters {
    skip_noise: bool,
    skip_cosmetic: bool,
    skip_meta: bool,
}

/// Drops blank and comment-only lines, classifying each file as a whole at
/// the fix's parent so multi-line block comments are recognised.
pub fn code_lines_only(repo: &Repo, fix: &CommitRef, lines: Vec<LineChange>) -> Vec<LineChange> {
    let Ok(Some(parent)) = repo.parents(&fix.id).map(|p| p.into_iter().next()) else {
        return Vec::new();
    };
    let mut classes: BTreeMap<String, Option<Vec<LineClass>>> = BTreeMap::new();
    lines
        .into_iter()
        .filter(|l| {
            let per_file = classes.entry(l.path.clone()).or_insert_with(|| {
                repo.file_content(&parent, &l.path)
                    .ok()
                    .map(|c| classify_file_lines(&c))
            });
            let class = per_file
                .as_ref()
                .and_then(|c| c.get(l.line as usize - 1).copied())
                .unwrap_or_else(|| classify_line(&l.content));
            !class.is_noise()
        })
        .collect()
}

/// Blames `lines` of `fix` grouped by file, preserving input order.
fn blame_all(repo: &Repo, fix: &CommitRef, lines: &[LineChange]) -> Vec<Option<BlameEntry>> {
    let mut by_file: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in lines.iter().enumerate() {
        by_file.entry(l.path.as_str()).or_default().push(i);
    }
    let mut out = vec![None; lines.len()];
    for (path, idxs) in by_file {
        let nums: Vec<u32> = idxs.iter().map(|&i| lines[i].line).collect();
        for (&i, res) in idxs.iter().zip(repo.blame_lines(fix, path, &nums)) {
            match res {
                Ok(e) => out[i] = Some(e),
                Err(e) => log::warn!("{}: blame of {}:{} failed: {e}", fix.id, path, lines[i].line),
            }
        }
    }
    out
}

/// The removed line an origin commit rewrote into `origin_line`, when that
/// rewrite was cosmetic.
fn cosmetic_counterpart(repo: &Repo, entry: &BlameEntry) -> Option<LineChange> {
    let diff = repo.commit_diff(&entry.origin).ok()?;
    let (_, hunk) = diff.hunk_adding(&entry.origin_path, entry.origin_line)?;
    let pos = hunk.added.iter().position(|l| l.line == entry.origin_line)?;
    let added = &hunk.added[pos];
    hunk.removed
        .iter()
        .enumerate()
        .filter(|(_, r)| is_cosmetic_pair(&r.content, &added.content))
        .min_by_key(|(i, _)| i.abs_diff(pos))
        .map(|(_, r)| r.clone())
}

/// The first-parent pre-image of a line a merge (or other meta-change)
/// rewrote: the most similar removed line of the same hunk.
fn meta_counterpart(repo: &Repo, entry: &BlameEntry) -> Option<LineChange> {
    let diff = repo.first_parent_diff(&entry.origin).ok()?;
    let (_, hunk) = diff.hunk_adding(&entry.origin_path, entry.origin_line)?;
    let pos = hunk.added.iter().position(|l| l.line == entry.origin_line)?;
    let added = &hunk.added[pos];
    hunk.removed
        .iter()
        .enumerate()
        .map(|(i, r)| (line_similarity(&r.content, &added.content), i.abs_diff(pos), r))
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
        .map(|(_, _, r)| r.clone())
}

fn is_meta_change(repo: &Repo, c: &CommitRef) -> bool {
    if c.is_merge() {
        return true;
    }
    repo.commit_diff(c)
        .map(|d| d.removed_count() == 0 && d.added_count() == 0)
        .unwrap_or(false)
}

/// Follows blame past cosmetic and/or meta-change origins. `None` means the
/// line only leads to a meta-change that cannot be stepped past.
fn step_past(repo: &Repo, mut entry: BlameEntry, filters: Filters) -> Option<CommitRef> {
    for _ in 0..MAX_STEP_PAST {
        let origin = entry.origin.clone();
        let next = if filters.skip_meta && is_meta_change(repo, &origin) {
            meta_counterpart(repo, &entry)?
        } else if filters.skip_cosmetic && !origin.is_merge() {
            match cosmetic_counterpart(repo, &entry) {
                Some(pre) => pre,
                None => return Some(origin),
            }
        } else {
            return Some(origin);
        };
        match repo.blame_line(&origin, &next.path, next.line) {
            Ok(e) => entry = e,
            Err(e) => {
                log::warn!("re-blame of {}:{} at {} failed: {e}", next.path, next.line, origin.id);
                return if filters.skip_meta && origin.is_merge() { None } else { Some(origin) };
            }
        }
    }
    log::warn!(
        "step-past limit reached at {}:{}; keeping {}",
        entry.origin_path,
        entry.origin_line,
        entry.origin.id
    );
    Some(entry.origin)
}

fn blame_variant(repo: &Repo, fix: &CommitRef, algorithm: Algorithm, filters: Filters) -> Result<Prediction, GitError> {
    let mut lines = removed_lines(repo, fix)?;
    if filters.skip_noise {
        lines = code_lines_only(repo, fix, lines);
    }
    let blamed = blame_all(repo, fix, &lines);
    let mut attribution = Vec::new();
    for (line, entry) in lines.into_iter().zip(blamed) {
        let Some(entry) = entry else { continue };
        let origin = if filters.skip_cosmetic || filters.skip_meta {
            step_past(repo, entry, filters)
        } else {
            Some(entry.origin)
        };
        if let Some(origin) = origin {
            attribution.push(LineAttribution { line, origin: origin.id });
        }
    }
    Ok(Prediction::from_attribution(&fix.id, algorithm, attribution))
}

pub fn bszz(repo: &Repo, fix: &CommitRef) -> Result<Prediction, GitError> {
    blame_variant(repo, fix, Algorithm::B, Filters::default())
}

pub fn szz_pyd(repo: &Repo, fix: &CommitRef) -> Result<Prediction, GitError> {
    let filters = Filters {
        skip_noise: true,
        ..Filters::default()
    };
    blame_variant(repo, fix, Algorithm::PYD, filters)
}

pub fn agszz(repo: &Repo, fix: &CommitRef) -> Result<Prediction, GitError> {
    let filters = Filters {
        skip_noise: true,
        skip_cosmetic: true,
        skip_meta: false,
    };
    blame_variant(repo, fix, Algorithm::AG, filters)
}

pub fn maszz(repo: &Repo, fix: &CommitRef) -> Result<Prediction, GitError> {
    let filters = Filters {
        skip_noise: true,
        skip_cosmetic: true,
        skip_meta: true,
    };
    blame_variant(repo, fix, Algorithm::MA, filters)
}

/// Total removed plus added lines of a commit's diff.
pub fn changed_line_count(repo: &Repo, c: &CommitId) -> Result<usize, GitError> {
    let commit = repo.commit(c)?;
    let diff = repo.commit_diff(&commit)?;
    Ok(diff.removed_count() + diff.added_count())
}

/// Picks the `AG` candidate with the largest diff (smallest id on ties).
pub fn lszz_from(repo: &Repo, ag: Prediction) -> Result<Prediction, GitError> {
    let mut best: Option<(usize, CommitId)> = None;
    for c in &ag.inducing {
        let n = changed_line_count(repo, c)?;
        // ids iterate in ascending order, so strict > keeps the smallest on ties
        if best.as_ref().is_none_or(|(m, _)| n > *m) {
            best = Some((n, c.clone()));
        }
    }
    Ok(ag.narrowed(Algorithm::L, best.map(|(_, c)| c)))
}

/// Picks the most recent `AG` candidate (smallest id on ties).
pub fn rszz_from(repo: &Repo, ag: Prediction) -> Result<Prediction, GitError> {
    let mut best: Option<(i64, CommitId)> = None;
    for c in &ag.inducing {
        let t = repo.commit(c)?.timestamp;
        if best.as_ref().is_none_or(|(m, _)| t > *m) {
            best = Some((t, c.clone()));
        }
    }
    Ok(ag.narrowed(Algorithm::R, best.map(|(_, c)| c)))
}

pub fn lszz(repo: &Repo, fix: &CommitRef) -> Result<Prediction, GitError> {
    lszz_from(repo, agszz(repo, fix)?)
}

pub fn rszz(repo: &Repo, fix: &CommitRef) -> Result<Prediction, GitError> {
    rszz_from(repo, agszz(repo, fix)?)
}

/// Runs one of the six blame-based variants.
pub fn run_classic(repo: &Repo, fix: &CommitRef, algorithm: Algorithm) -> Result<Prediction, GitError> {
    match algorithm {
        Algorithm::B => bszz(repo, fix),
        Algorithm::AG => agszz(repo, fix),
        Algorithm::L => lszz(repo, fix),
        Algorithm::R => rszz(repo, fix),
        Algorithm::MA => maszz(repo, fix),
        Algorithm::PYD => szz_pyd(repo, fix),
        Algorithm::TC => panic!("TC-SZZ is run through trace::tcszz"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
            assert_eq!(a.display_name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("X".parse::<Algorithm>().is_err());
    }
}
