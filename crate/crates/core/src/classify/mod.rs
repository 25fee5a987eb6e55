//! Ghost commits, per-fix outcome categories and the failure-mode ladder.

mod functions;
mod prompt;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::git::{CommitId, CommitRef, GitError, Repo};
use crate::miner::BugFixLink;
use crate::szz::{bszz, Prediction};
use crate::trace::{tcszz, TcMode};

pub use functions::{scan_functions, ScanError, SourceFunction};
pub use prompt::{emit_llm_prompt, scrub_message, PromptContext, PromptKind};

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("prediction is for {predicted}, ground truth for {truth}")]
    MismatchedFix { truth: CommitId, predicted: CommitId },
    #[error("{fix} is not a B-SZZ failure without mapping ghosts ({category})")]
    PreconditionViolated { fix: CommitId, category: OutcomeCategory },
    #[error("prompt needs {0}")]
    MissingContext(&'static str),
    #[error("no prompt template for {0}")]
    NoTemplate(FailureMode),
    #[error(transparent)]
    Git(#[from] GitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GhostKind {
    RemoveMappingGhost,
    AddMappingGhost,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GhostLabel {
    pub kind: GhostKind,
    pub commit: CommitRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GhostSide {
    AsFix,
    AsInducer,
}

/// `RemoveMappingGhost` for a fix that only adds lines, `AddMappingGhost`
/// for an inducer that only removes lines. Merges and commits without line
/// changes are neither.
pub fn classify_ghost(repo: &Repo, c: &CommitRef, side: GhostSide) -> Result<Option<GhostLabel>, GitError> {
    let diff = repo.commit_diff(c)?;
    let (removed, added) = (diff.removed_count(), diff.added_count());
    let kind = match side {
        GhostSide::AsFix if removed == 0 && added > 0 => GhostKind::RemoveMappingGhost,
        GhostSide::AsInducer if added == 0 && removed > 0 => GhostKind::AddMappingGhost,
        _ => return Ok(None),
    };
    Ok(Some(GhostLabel {
        kind,
        commit: diff.commit.clone(),
    }))
}

pub fn is_remove_mapping_ghost(repo: &Repo, c: &CommitRef) -> Result<bool, GitError> {
    Ok(classify_ghost(repo, c, GhostSide::AsFix)?.is_some())
}

pub fn is_add_mapping_ghost(repo: &Repo, c: &CommitRef) -> Result<bool, GitError> {
    Ok(classify_ghost(repo, c, GhostSide::AsInducer)?.is_some())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: usize,
    pub denominator: usize,
}

impl Ratio {
    pub fn new(numerator: usize, denominator: usize) -> Self {
        Ratio { numerator, denominator }
    }

    /// `0.0` for an empty denominator.
    pub fn value(self) -> f64 {
        if self.denominator == 0 {
            0.0
        } else {
            self.numerator as f64 / self.denominator as f64
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} = {:.2}%", self.numerator, self.denominator, self.value() * 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GhostFrequencies {
    /// Fixes that remove no lines, over all fixes.
    pub rmg_over_fixes: Ratio,
    /// Commits that add no lines, over every commit up to the head.
    pub amg_over_all_commits: Ratio,
    /// (fix, inducer) pairs whose inducer adds no lines, over all pairs.
    pub amg_over_inducers: Ratio,
    /// Fixes that remove lines but whose every inducer adds none, over all
    /// fixes.
    pub fixes_failing_from_amg: Ratio,
    pub rmg_fixes: Vec<CommitId>,
    pub amg_inducers: Vec<CommitId>,
}

/// Ghost rates of a dataset. `all_commits` is the commit population for the
/// over-all-commits rate.
pub fn ghost_frequencies(repo: &Repo, dataset: &[BugFixLink], all_commits: &[CommitRef]) -> Result<GhostFrequencies, GitError> {
    let mut amg_cache: BTreeMap<CommitId, bool> = BTreeMap::new();
    let mut amg = |c: &CommitRef| -> Result<bool, GitError> {
        if let Some(&v) = amg_cache.get(&c.id) {
            return Ok(v);
        }
        let v = is_add_mapping_ghost(repo, c)?;
        amg_cache.insert(c.id.clone(), v);
        Ok(v)
    };
    let mut out = GhostFrequencies::default();
    let mut amg_pairs = 0;
    let mut pairs = 0;
    let mut failing = 0;
    let mut amg_inducers = BTreeSet::new();
    for link in dataset {
        let rmg = is_remove_mapping_ghost(repo, &link.fixing_commit)?;
        if rmg {
            out.rmg_fixes.push(link.fixing_commit.id.clone());
        }
        let mut all_amg = !link.inducing_commits.is_empty();
        for ind in &link.inducing_commits {
            pairs += 1;
            if amg(ind)? {
                amg_pairs += 1;
                amg_inducers.insert(ind.id.clone());
            } else {
                all_amg = false;
            }
        }
        if !rmg && all_amg {
            failing += 1;
        }
    }
    let mut amg_all = 0;
    for c in all_commits {
        if amg(c)? {
            amg_all += 1;
        }
    }
    out.rmg_over_fixes = Ratio::new(out.rmg_fixes.len(), dataset.len());
    out.amg_over_all_commits = Ratio::new(amg_all, all_commits.len());
    out.amg_over_inducers = Ratio::new(amg_pairs, pairs);
    out.fixes_failing_from_amg = Ratio::new(failing, dataset.len());
    out.amg_inducers = amg_inducers.into_iter().collect();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeCategory {
    Success,
    PartialSuccess,
    RemoveMG,
    AddMG,
    FailureWithoutMG,
}

impl OutcomeCategory {
    pub const ALL: [OutcomeCategory; 5] = [
        OutcomeCategory::Success,
        OutcomeCategory::PartialSuccess,
        OutcomeCategory::RemoveMG,
        OutcomeCategory::AddMG,
        OutcomeCategory::FailureWithoutMG,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeCategory::Success => "Success",
            OutcomeCategory::PartialSuccess => "PartialSuccess",
            OutcomeCategory::RemoveMG => "RemoveMG",
            OutcomeCategory::AddMG => "AddMG",
            OutcomeCategory::FailureWithoutMG => "FailureWithoutMG",
        }
    }
}

impl fmt::Display for OutcomeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutcomeCategory {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown outcome category {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureMode {
    LineChange,
    FunctionBlame,
    FunctionLog,
    WithinFile,
    CrossFile,
}

impl FailureMode {
    pub const ALL: [FailureMode; 5] = [
        FailureMode::LineChange,
        FailureMode::FunctionBlame,
        FailureMode::FunctionLog,
        FailureMode::WithinFile,
        FailureMode::CrossFile,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureMode::LineChange => "LineChange",
            FailureMode::FunctionBlame => "FunctionBlame",
            FailureMode::FunctionLog => "FunctionLog",
            FailureMode::WithinFile => "WithinFile",
            FailureMode::CrossFile => "CrossFile",
        }
    }
}

impl fmt::Display for FailureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FailureMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown failure mode {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub category: OutcomeCategory,
    pub detail: Option<FailureMode>,
}

fn check_same_fix(truth: &BugFixLink, predicted: &Prediction) -> Result<(), ClassifyError> {
    if truth.fixing_commit.id != predicted.fixing_commit {
        return Err(ClassifyError::MismatchedFix {
            truth: truth.fixing_commit.id.clone(),
            predicted: predicted.fixing_commit.clone(),
        });
    }
    Ok(())
}

/// Places one prediction into exactly one outcome category.
pub fn categorize_outcome(repo: &Repo, truth: &BugFixLink, predicted: &Prediction) -> Result<OutcomeCategory, ClassifyError> {
    check_same_fix(truth, predicted)?;
    let truth_ids = truth.inducing_ids();
    let hits = truth_ids.intersection(&predicted.inducing).count();
    if hits == truth_ids.len() {
        return Ok(OutcomeCategory::Success);
    }
    if hits > 0 {
        return Ok(OutcomeCategory::PartialSuccess);
    }
    if is_remove_mapping_ghost(repo, &truth.fixing_commit)? {
        return Ok(OutcomeCategory::RemoveMG);
    }
    let mut all_amg = true;
    for ind in &truth.inducing_commits {
        if !is_add_mapping_ghost(repo, ind)? {
            all_amg = false;
            break;
        }
    }
    Ok(if all_amg {
        OutcomeCategory::AddMG
    } else {
        OutcomeCategory::FailureWithoutMG
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSpan {
    pub file: String,
    pub name: String,
    pub start_line: u32,
    pub end_line: u32,
    pub at: CommitId,
}

impl FunctionSpan {
    pub fn contains(&self, line: u32) -> bool {
        (self.start_line..=self.end_line).contains(&line)
    }
}

/// Function spans of `file` as of commit `c`. A file the scanner cannot
/// balance is reported as one span covering the whole file.
pub fn extract_functions(repo: &Repo, c: &CommitRef, file: &str) -> Result<Vec<FunctionSpan>, GitError> {
    let content = repo.file_content(&c.id, file)?;
    let span = |name: String, start_line: u32, end_line: u32| FunctionSpan {
        file: file.to_string(),
        name,
        start_line,
        end_line,
        at: c.id.clone(),
    };
    match scan_functions(&content) {
        Ok(fs) => Ok(fs.into_iter().map(|f| span(f.name, f.start_line, f.end_line)).collect()),
        Err(e) => {
            log::warn!("{file} at {}: {e}; using the whole file", c.id);
            let lines = content.lines().count().max(1) as u32;
            let name = file.rsplit('/').next().unwrap_or(file).to_string();
            Ok(vec![span(name, 1, lines)])
        }
    }
}

/// Distinct function names in file order.
pub fn function_names(spans: &[FunctionSpan]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    spans
        .iter()
        .filter(|s| seen.insert(s.name.clone()))
        .map(|s| s.name.clone())
        .collect()
}

/// Which rung of the ladder matched and the true inducer that matched it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureEvidence {
    pub mode: FailureMode,
    pub inducer: Option<CommitId>,
    /// Functions enclosing the fix's removed lines, at the fix's parent.
    pub functions: Vec<FunctionSpan>,
}

/// Functions of the fix's parent that contain at least one removed line.
pub fn enclosing_functions(repo: &Repo, fix: &CommitRef) -> Result<Vec<FunctionSpan>, GitError> {
    let Some(parent) = repo.parents(&fix.id)?.into_iter().next() else {
        return Ok(Vec::new());
    };
    let parent = repo.commit(&parent)?;
    let diff = repo.commit_diff(fix)?;
    let mut by_file: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for l in diff.removed() {
        by_file.entry(l.path.as_str()).or_default().push(l.line);
    }
    let mut out = Vec::new();
    for (file, lines) in by_file {
        let spans = match extract_functions(repo, &parent, file) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("{}: cannot read {file} at parent: {e}", fix.id);
                continue;
            }
        };
        out.extend(spans.into_iter().filter(|s| lines.iter().any(|&l| s.contains(l))));
    }
    Ok(out)
}

fn first_hit<'a>(truth: &BTreeSet<CommitId>, found: impl IntoIterator<Item = &'a CommitId>) -> Option<CommitId> {
    // smallest matching id, so the answer does not depend on search order
    found.into_iter().filter(|c| truth.contains(*c)).min().cloned()
}

/// Membership tests of the ladder for one fix, each usable on its own.
pub struct Ladder<'r> {
    repo: &'r Repo,
    fix: CommitRef,
    truth: BTreeSet<CommitId>,
    threshold: f64,
    pub functions: Vec<FunctionSpan>,
    parent: Option<CommitRef>,
}

impl<'r> Ladder<'r> {
    pub fn new(repo: &'r Repo, truth: &BugFixLink, threshold: f64) -> Result<Self, GitError> {
        let fix = truth.fixing_commit.clone();
        let parent = match repo.parents(&fix.id)?.into_iter().next() {
            Some(p) => Some(repo.commit(&p)?),
            None => None,
        };
        Ok(Ladder {
            repo,
            functions: enclosing_functions(repo, &fix)?,
            fix,
            truth: truth.inducing_ids(),
            threshold,
            parent,
        })
    }

    /// The true inducer reached by the search of `mode`, if any.
    /// `CrossFile` is the fallback rung and never searches.
    pub fn hit(&self, mode: FailureMode) -> Result<Option<CommitId>, GitError> {
        match mode {
            FailureMode::LineChange => self.line_change(),
            FailureMode::FunctionBlame => Ok(self.function_blame()),
            FailureMode::FunctionLog => Ok(self.function_log()),
            FailureMode::WithinFile => self.within_file(),
            FailureMode::CrossFile => Ok(None),
        }
    }

    fn line_change(&self) -> Result<Option<CommitId>, GitError> {
        let (tc, _) = tcszz(self.repo, &self.fix, TcMode::UniqueCommits, self.threshold)?;
        Ok(first_hit(&self.truth, &tc.inducing))
    }

    fn function_blame(&self) -> Option<CommitId> {
        let mut blamed = BTreeSet::new();
        for span in &self.functions {
            let lines: Vec<u32> = (span.start_line..=span.end_line).collect();
            for e in self.repo.blame_lines(&self.fix, &span.file, &lines).into_iter().flatten() {
                blamed.insert(e.origin.id);
            }
        }
        first_hit(&self.truth, &blamed)
    }

    fn function_log(&self) -> Option<CommitId> {
        let parent = self.parent.as_ref()?;
        let mut logged = BTreeSet::new();
        for span in &self.functions {
            match self.repo.log_line_range(&span.file, span.start_line, span.end_line, parent) {
                Ok(cs) => logged.extend(cs.into_iter().map(|c| c.id)),
                Err(e) => log::warn!(
                    "{}: log of {}:{}-{} failed: {e}",
                    self.fix.id,
                    span.file,
                    span.start_line,
                    span.end_line
                ),
            }
        }
        first_hit(&self.truth, &logged)
    }

    fn within_file(&self) -> Result<Option<CommitId>, GitError> {
        let Some(parent) = &self.parent else { return Ok(None) };
        let diff = self.repo.commit_diff(&self.fix)?;
        let files: BTreeSet<&str> = diff.files.iter().filter_map(|f| f.old_path.as_deref()).collect();
        let mut history = BTreeSet::new();
        for file in files {
            match self.repo.file_history(file, parent) {
                Ok(cs) => history.extend(cs.into_iter().map(|c| c.id)),
                Err(e) => log::warn!("{}: history of {file} failed: {e}", self.fix.id),
            }
        }
        Ok(first_hit(&self.truth, &history))
    }
}

/// Walks the ladder for a fix that B-SZZ failed on without any mapping
/// ghost involved. The first rung whose search reaches a true inducer wins.
pub fn classify_failure(repo: &Repo, truth: &BugFixLink, threshold: f64) -> Result<FailureEvidence, ClassifyError> {
    let fix = &truth.fixing_commit;
    let b = bszz(repo, fix)?;
    let category = categorize_outcome(repo, truth, &b)?;
    if category != OutcomeCategory::FailureWithoutMG {
        return Err(ClassifyError::PreconditionViolated {
            fix: fix.id.clone(),
            category,
        });
    }
    let ladder = Ladder::new(repo, truth, threshold)?;
    for mode in FailureMode::ALL {
        if mode == FailureMode::CrossFile {
            break;
        }
        if let Some(hit) = ladder.hit(mode)? {
            return Ok(FailureEvidence {
                mode,
                inducer: Some(hit),
                functions: ladder.functions,
            });
        }
    }
    Ok(FailureEvidence {
        mode: FailureMode::CrossFile,
        inducer: None,
        functions: ladder.functions,
    })
}

/// Prompt context for a classified failure: the first file the fix
/// touches, every function name in it and the code of the enclosing
/// functions, all read at the fix's parent.
pub fn prompt_context(repo: &Repo, fix: &CommitRef, evidence: &FailureEvidence) -> Result<PromptContext, GitError> {
    let mut ctx = PromptContext::default();
    let Some(parent) = repo.parents(&fix.id)?.into_iter().next() else {
        return Ok(ctx);
    };
    let parent = repo.commit(&parent)?;
    let diff = repo.commit_diff(fix)?;
    let file = evidence
        .functions
        .first()
        .map(|f| f.file.clone())
        .or_else(|| diff.files.iter().find_map(|f| f.old_path.clone()));
    if let Some(file) = &file {
        ctx.function_names = function_names(&extract_functions(repo, &parent, file)?);
    }
    ctx.file = file;
    let mut code = Vec::new();
    for span in &evidence.functions {
        let content = repo.file_content(&span.at, &span.file)?;
        let body: Vec<&str> = content
            .lines()
            .skip(span.start_line as usize - 1)
            .take((span.end_line + 1 - span.start_line) as usize)
            .collect();
        code.push(body.join("\n"));
    }
    if !code.is_empty() {
        ctx.function_code = Some(code.join("\n\n"));
    }
    Ok(ctx)
}
