//! Ground-truth extraction from `Fixes:` trailers.
//!
//! A trailer line looks like `Fixes: 629c66a22c21 ("subject of the culprit")`.
//! The leading hex token (7 to 40 digits) is searched as a substring of every
//! full commit id reachable from the pinned head, which recovers ids whose
//! first characters were dropped by a typo.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::git::{CommitId, CommitRef, GitError, Repo};

#[derive(Debug, thiserror::Error)]
pub enum MinerError {
    #[error("partial id {partial} matches {} commits and the trailer subject does not single one out", candidates.len())]
    Ambiguous {
        partial: String,
        candidates: Vec<CommitId>,
    },
    #[error(transparent)]
    Git(#[from] GitError),
}

/// One `Fixes:` line of a commit message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawFixesRef {
    pub raw_line: String,
    /// Leading 7-40 digit lowercase hex token of the payload, if any.
    pub extracted_partial: Option<String>,
    /// Text inside `("...")` following the id.
    pub trailer_subject: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AbnormalCategory {
    PartialCommitId,
    NotInRepository,
    Ambiguous,
}

impl AbnormalCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            AbnormalCategory::PartialCommitId => "PartialCommitId",
            AbnormalCategory::NotInRepository => "NotInRepository",
            AbnormalCategory::Ambiguous => "Ambiguous",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "PartialCommitId" => Some(AbnormalCategory::PartialCommitId),
            "NotInRepository" => Some(AbnormalCategory::NotInRepository),
            "Ambiguous" => Some(AbnormalCategory::Ambiguous),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbnormalRecord {
    pub fixing_commit: CommitRef,
    pub raw_line: String,
    pub category: AbnormalCategory,
    /// `link`, `too-short`, `format` or `description` for unrecognised ids;
    /// `missing` when nothing matches; `ambiguous` for unresolved overlaps.
    pub subcause: String,
}

/// A fixing commit with its developer-annotated inducing commits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugFixLink {
    pub fixing_commit: CommitRef,
    /// Sorted by id, never empty.
    pub inducing_commits: Vec<CommitRef>,
    pub raw_refs: Vec<RawFixesRef>,
}

impl BugFixLink {
    pub fn inducing_ids(&self) -> BTreeSet<CommitId> {
        self.inducing_commits.iter().map(|c| c.id.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinkOutcome {
    Resolved(Vec<CommitRef>),
    Abnormal(AbnormalRecord),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MinedDataset {
    pub dataset: Vec<BugFixLink>,
    pub abnormal: Vec<AbnormalRecord>,
    /// Commits that are both a fixing commit and an inducing commit.
    pub common_commits: Vec<CommitId>,
    /// Number of commits carrying at least one non-empty `Fixes:` line.
    pub candidates: usize,
}

fn leading_id() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^([0-9a-f]{7,40})(?:[^0-9A-Za-z]|$)").expect("valid regex"))
}

fn subject_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"\("(.*)"\)"#).expect("valid regex"))
}

fn short_hex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[0-9a-f]{1,6}(?:[^0-9A-Za-z]|$)").expect("valid regex"))
}

fn embedded_hex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b[0-9a-f]{7,40}\b").expect("valid regex"))
}

/// Extracts one reference per line whose first token starts with `Fixes:`.
/// Lines with nothing after the keyword are ignored.
pub fn extract_fixes_annotations(message: &str) -> Vec<RawFixesRef> {
    message
        .lines()
        .filter_map(|line| {
            let payload = line.trim_start().strip_prefix("Fixes:")?.trim();
            if payload.is_empty() {
                return None;
            }
            let partial = leading_id()
                .captures(payload)
                .map(|c| c[1].to_string());
            let subject = partial.as_ref().and_then(|p| {
                subject_re()
                    .captures(&payload[p.len()..])
                    .map(|c| c[1].to_string())
            });
            Some(RawFixesRef {
                raw_line: line.to_string(),
                extracted_partial: partial,
                trailer_subject: subject,
            })
        })
        .collect()
}

/// Why a payload was not recognised as a commit id.
pub fn unrecognised_subcause(raw_line: &str) -> &'static str {
    let payload = raw_line
        .trim_start()
        .strip_prefix("Fixes:")
        .unwrap_or(raw_line)
        .trim();
    if payload.contains("://") || payload.starts_with("www.") {
        "link"
    } else if short_hex().is_match(payload) {
        "too-short"
    } else if embedded_hex().is_match(payload) {
        "format"
    } else {
        "description"
    }
}

/// Resolves one trailer of `fixing` to its inducing commit.
pub fn link_bug_inducing(repo: &Repo, fixing: &CommitRef, r: &RawFixesRef) -> Result<LinkOutcome, MinerError> {
    let abnormal = |category, subcause: &str| {
        LinkOutcome::Abnormal(AbnormalRecord {
            fixing_commit: fixing.clone(),
            raw_line: r.raw_line.clone(),
            category,
            subcause: subcause.to_string(),
        })
    };
    let Some(partial) = &r.extracted_partial else {
        return Ok(abnormal(
            AbnormalCategory::PartialCommitId,
            unrecognised_subcause(&r.raw_line),
        ));
    };
    let candidates: Vec<CommitRef> = repo
        .resolve_partial_id(partial)?
        .into_iter()
        .filter(|c| c.id != fixing.id)
        .collect();
    match candidates.len() {
        0 => Ok(abnormal(AbnormalCategory::NotInRepository, "missing")),
        1 => Ok(LinkOutcome::Resolved(candidates)),
        _ => {
            let by_subject: Vec<&CommitRef> = match &r.trailer_subject {
                Some(s) => candidates.iter().filter(|c| &c.subject == s).collect(),
                None => Vec::new(),
            };
            if let [only] = by_subject.as_slice() {
                Ok(LinkOutcome::Resolved(vec![(*only).clone()]))
            } else {
                Err(MinerError::Ambiguous {
                    partial: partial.clone(),
                    candidates: candidates.into_iter().map(|c| c.id).collect(),
                })
            }
        }
    }
}

/// Scans every ancestor of `until` for `Fixes:` trailers.
pub fn mine_dataset(repo: &Repo, until: &CommitRef) -> Result<MinedDataset, MinerError> {
    let mut out = MinedDataset::default();
    for (id, message) in repo.commit_messages(until)? {
        let refs = extract_fixes_annotations(&message);
        if refs.is_empty() {
            continue;
        }
        out.candidates += 1;
        let fixing = repo.commit(&id)?;
        let mut resolved: BTreeMap<CommitId, CommitRef> = BTreeMap::new();
        let mut failed = Vec::new();
        for r in &refs {
            match link_bug_inducing(repo, &fixing, r) {
                Ok(LinkOutcome::Resolved(cs)) => {
                    resolved.extend(cs.into_iter().map(|c| (c.id.clone(), c)));
                }
                Ok(LinkOutcome::Abnormal(rec)) => failed.push(rec),
                Err(MinerError::Ambiguous { partial, candidates }) => {
                    log::warn!(
                        "{}: partial {partial} is ambiguous among {} commits",
                        fixing.id,
                        candidates.len()
                    );
                    failed.push(AbnormalRecord {
                        fixing_commit: fixing.clone(),
                        raw_line: r.raw_line.clone(),
                        category: AbnormalCategory::Ambiguous,
                        subcause: "ambiguous".to_string(),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        if resolved.is_empty() {
            out.abnormal.extend(failed);
        } else {
            out.dataset.push(BugFixLink {
                fixing_commit: fixing,
                inducing_commits: resolved.into_values().collect(),
                raw_refs: refs,
            });
        }
    }
    let key = |c: &CommitRef| (c.timestamp, c.id.clone());
    out.dataset.sort_by_key(|l| key(&l.fixing_commit));
    out.abnormal
        .sort_by(|a, b| key(&a.fixing_commit).cmp(&key(&b.fixing_commit)).then(a.raw_line.cmp(&b.raw_line)));

    let fixing: BTreeSet<&CommitId> = out.dataset.iter().map(|l| &l.fixing_commit.id).collect();
    let inducing: BTreeSet<&CommitId> = out
        .dataset
        .iter()
        .flat_map(|l| l.inducing_commits.iter().map(|c| &c.id))
        .collect();
    out.common_commits = fixing.intersection(&inducing).map(|id| (*id).clone()).collect();
    Ok(out)
}
