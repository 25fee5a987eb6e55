//! Brute-force per-line provenance over a built fixture.
//!
//! The oracle never talks to git: it replays the script's whole-file
//! contents step by step. Lines surviving unchanged are matched by exact
//! content (longest common subsequence against the first parent, then
//! against further parents for merges); lines left over inside the same gap
//! are paired by position and inherit their predecessor's history.

use std::collections::{BTreeMap, HashMap};

use super::{FileEdit, FixtureMap};
use crate::git::CommitId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleLine {
    pub content: String,
    /// Commits that created or modified this line, newest first.
    pub history: Vec<CommitId>,
}

type FileState = BTreeMap<String, Vec<OracleLine>>;

/// File states (with per-line histories) after every fixture commit.
#[derive(Debug, Clone, Default)]
pub struct LineProvenance {
    states: HashMap<CommitId, FileState>,
}

impl LineProvenance {
    pub fn file(&self, at: &CommitId, path: &str) -> Option<&[OracleLine]> {
        self.states.get(at)?.get(path).map(Vec::as_slice)
    }

    /// History of 1-based `line` of `path` as of commit `at`, newest first.
    pub fn history(&self, at: &CommitId, path: &str, line: u32) -> Option<&[CommitId]> {
        let idx = usize::try_from(line).ok()?.checked_sub(1)?;
        self.file(at, path)?
            .get(idx)
            .map(|l| l.history.as_slice())
    }

    pub fn paths(&self, at: &CommitId) -> Vec<&str> {
        self.states
            .get(at)
            .map(|s| s.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }
}

fn split_lines(content: &str) -> Vec<&str> {
    let mut v: Vec<&str> = content.split('\n').collect();
    if v.last() == Some(&"") {
        v.pop();
    }
    v
}

/// Index pairs (old, new) of one longest common subsequence.
fn lcs_pairs(old: &[&str], new: &[&str]) -> Vec<(usize, usize)> {
    let (n, m) = (old.len(), new.len());
    let mut dp = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i][j] = if old[i] == new[j] {
                dp[i + 1][j + 1] + 1
            } else {
                dp[i + 1][j].max(dp[i][j + 1])
            };
        }
    }
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < n && j < m {
        if old[i] == new[j] {
            out.push((i, j));
            i += 1;
            j += 1;
        } else if dp[i + 1][j] >= dp[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Replays the fixture's script and records every line's edit history.
pub fn line_provenance_oracle(map: &FixtureMap) -> LineProvenance {
    let mut by_label: HashMap<&str, FileState> = HashMap::new();
    let mut states = HashMap::new();

    for step in &map.script.steps {
        let me = map.id(&step.label).clone();
        let parents: Vec<&FileState> = step.parents.iter().map(|p| &by_label[p.as_str()]).collect();
        let mut state: FileState = parents.first().map(|s| (*s).clone()).unwrap_or_default();

        for edit in &step.edits {
            match edit {
                FileEdit::Delete { path } => {
                    state.remove(path);
                }
                FileEdit::Write { path, content } => {
                    let new_lines = split_lines(content);
                    let mut result: Vec<Option<OracleLine>> = vec![None; new_lines.len()];

                    let first = parents.first().and_then(|p| p.get(path));
                    let mut anchors: Vec<(usize, usize)> = Vec::new();
                    if let Some(old) = first {
                        let old_text: Vec<&str> = old.iter().map(|l| l.content.as_str()).collect();
                        anchors = lcs_pairs(&old_text, &new_lines);
                        for &(i, j) in &anchors {
                            result[j] = Some(old[i].clone());
                        }
                    }
                    // lines carried over from later merge parents
                    for other in parents.iter().skip(1) {
                        let Some(old) = other.get(path) else { continue };
                        let open: Vec<usize> = (0..new_lines.len()).filter(|j| result[*j].is_none()).collect();
                        let open_text: Vec<&str> = open.iter().map(|j| new_lines[*j]).collect();
                        let old_text: Vec<&str> = old.iter().map(|l| l.content.as_str()).collect();
                        for (i, k) in lcs_pairs(&old_text, &open_text) {
                            result[open[k]] = Some(old[i].clone());
                        }
                    }
                    // positional pairing inside each gap between anchors
                    if let Some(old) = first {
                        let mut bounds = vec![(0usize, 0usize)];
                        bounds.extend(anchors.iter().map(|&(i, j)| (i + 1, j + 1)));
                        let ends: Vec<(usize, usize)> = anchors
                            .iter()
                            .copied()
                            .chain(std::iter::once((old.len(), new_lines.len())))
                            .collect();
                        for (&(os, ns), &(oe, ne)) in bounds.iter().zip(ends.iter()) {
                            let old_gap: Vec<usize> = (os..oe).collect();
                            let new_gap: Vec<usize> = (ns..ne).filter(|j| result[*j].is_none()).collect();
                            for (&i, &j) in old_gap.iter().zip(new_gap.iter()) {
                                let mut history = vec![me.clone()];
                                history.extend(old[i].history.iter().cloned());
                                result[j] = Some(OracleLine {
                                    content: new_lines[j].to_string(),
                                    history,
                                });
                            }
                        }
                    }
                    let lines = result
                        .into_iter()
                        .zip(&new_lines)
                        .map(|(r, text)| {
                            r.unwrap_or_else(|| OracleLine {
                                content: text.to_string(),
                                history: vec![me.clone()],
                            })
                        })
                        .collect();
                    state.insert(path.clone(), lines);
                }
            }
        }
        states.insert(me, state.clone());
        by_label.insert(step.label.as_str(), state);
    }
    LineProvenance { states }
}
