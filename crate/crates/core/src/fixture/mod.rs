//! Deterministic synthetic repositories built from declarative scripts.
//!
//! A script is an ordered list of labelled steps. Each step names its
//! parents, replaces whole files (or deletes them) and carries a message.
//! Identities are fixed and step `i` is committed at `BASE_TIME + i * 3600`
//! unless it overrides its time, so building the same script twice yields the
//! same commit ids.
//!
//! The text form, one directive per line:
//!
//! ```text
//! # comment
//! commit <label> [parents <label>...] | [root]
//! time <epoch seconds>
//! message <single line>
//! message <<TAG
//! ...lines...
//! TAG
//! write <path> <<TAG
//! ...lines...
//! TAG
//! delete <path>
//! ```
//!
//! A step without `parents` continues from the previous step.

mod oracle;

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Stdio;

use sha1::{Digest, Sha1};

use crate::git::{git_command, run_git, CommitId, CommitRef, GitError, Repo};

pub use oracle::{line_provenance_oracle, LineProvenance, OracleLine};

/// Committer time of step 0.
pub const BASE_TIME: i64 = 1_500_000_000;
/// Spacing between consecutive steps.
pub const STEP_SECONDS: i64 = 3600;

pub const AUTHOR: &str = "Fixture Author <author@fixture.invalid>";
pub const COMMITTER: &str = "Fixture Committer <committer@fixture.invalid>";

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("invalid fixture script: {0}")]
    ScriptInvalid(String),
    #[error("script line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("fixture i/o failure: {0}")]
    IoFailure(String),
    #[error(transparent)]
    Git(#[from] GitError),
}

impl From<std::io::Error> for FixtureError {
    fn from(e: std::io::Error) -> Self {
        FixtureError::IoFailure(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FileEdit {
    Write { path: String, content: String },
    Delete { path: String },
}

impl FileEdit {
    pub fn path(&self) -> &str {
        match self {
            FileEdit::Write { path, .. } | FileEdit::Delete { path } => path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureStep {
    pub label: String,
    pub parents: Vec<String>,
    pub edits: Vec<FileEdit>,
    pub message: String,
    /// Overrides the default `BASE_TIME + index * STEP_SECONDS`.
    pub time: Option<i64>,
}

impl FixtureStep {
    pub fn parents<S: AsRef<str>>(&mut self, parents: &[S]) -> &mut Self {
        self.parents = parents.iter().map(|p| p.as_ref().to_string()).collect();
        self
    }

    pub fn root(&mut self) -> &mut Self {
        self.parents.clear();
        self
    }

    pub fn write(&mut self, path: &str, content: &str) -> &mut Self {
        self.edits.push(FileEdit::Write {
            path: path.to_string(),
            content: content.to_string(),
        });
        self
    }

    /// Writes `lines` joined with a trailing newline each.
    pub fn write_lines<S: AsRef<str>>(&mut self, path: &str, lines: &[S]) -> &mut Self {
        let mut content = String::new();
        for l in lines {
            content.push_str(l.as_ref());
            content.push('\n');
        }
        self.write(path, &content)
    }

    pub fn delete(&mut self, path: &str) -> &mut Self {
        self.edits.push(FileEdit::Delete {
            path: path.to_string(),
        });
        self
    }

    pub fn message(&mut self, message: &str) -> &mut Self {
        self.message = message.to_string();
        self
    }

    pub fn time(&mut self, t: i64) -> &mut Self {
        self.time = Some(t);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixtureScript {
    pub steps: Vec<FixtureStep>,
}

impl FixtureScript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a step whose parent defaults to the previous step.
    pub fn commit(&mut self, label: &str) -> &mut FixtureStep {
        let parents = self
            .steps
            .last()
            .map(|s| vec![s.label.clone()])
            .unwrap_or_default();
        self.steps.push(FixtureStep {
            label: label.to_string(),
            parents,
            edits: Vec::new(),
            message: label.to_string(),
            time: None,
        });
        self.steps.last_mut().expect("just pushed")
    }

    pub fn step(&self, label: &str) -> Option<&FixtureStep> {
        self.steps.iter().find(|s| s.label == label)
    }

    pub fn time_of(&self, index: usize) -> i64 {
        self.steps[index]
            .time
            .unwrap_or(BASE_TIME + index as i64 * STEP_SECONDS)
    }

    pub fn validate(&self) -> Result<(), FixtureError> {
        let mut seen = HashSet::new();
        for step in &self.steps {
            if step.label.is_empty() || step.label.chars().any(char::is_whitespace) {
                return Err(FixtureError::ScriptInvalid(format!(
                    "bad label {:?}",
                    step.label
                )));
            }
            for p in &step.parents {
                if !seen.contains(p.as_str()) {
                    return Err(FixtureError::ScriptInvalid(format!(
                        "step {} has dangling parent {p}",
                        step.label
                    )));
                }
            }
            if step.parents.iter().collect::<HashSet<_>>().len() != step.parents.len() {
                return Err(FixtureError::ScriptInvalid(format!(
                    "step {} repeats a parent",
                    step.label
                )));
            }
            if !seen.insert(step.label.as_str()) {
                return Err(FixtureError::ScriptInvalid(format!(
                    "duplicate label {}",
                    step.label
                )));
            }
            for e in &step.edits {
                let p = e.path();
                if p.is_empty() || p.contains('\n') || p.starts_with('"') || p.starts_with('/') {
                    return Err(FixtureError::ScriptInvalid(format!("bad path {p:?}")));
                }
            }
        }
        Ok(())
    }

    /// Parses the line-oriented text form.
    pub fn parse(text: &str) -> Result<Self, FixtureError> {
        let mut script = FixtureScript::new();
        let lines: Vec<&str> = text.lines().collect();
        let mut i = 0;
        let syntax = |line: usize, msg: &str| FixtureError::Syntax {
            line: line + 1,
            msg: msg.to_string(),
        };
        // reads a heredoc body starting after line `start`; returns (body, next index)
        let heredoc = |start: usize, tag: &str| -> Result<(String, usize), FixtureError> {
            let mut body = String::new();
            let mut j = start + 1;
            while j < lines.len() {
                if lines[j] == tag {
                    return Ok((body, j + 1));
                }
                body.push_str(lines[j]);
                body.push('\n');
                j += 1;
            }
            Err(syntax(start, &format!("unterminated heredoc {tag}")))
        };
        while i < lines.len() {
            let line = lines[i];
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                i += 1;
                continue;
            }
            let (word, rest) = trimmed.split_once(' ').unwrap_or((trimmed, ""));
            let rest = rest.trim();
            match word {
                "commit" => {
                    let mut toks = rest.split_whitespace();
                    let label = toks.next().ok_or_else(|| syntax(i, "commit needs a label"))?;
                    let step = script.commit(label);
                    match toks.next() {
                        None => {}
                        Some("root") => {
                            step.root();
                        }
                        Some("parents") => {
                            let ps: Vec<&str> = toks.collect();
                            if ps.is_empty() {
                                return Err(syntax(i, "parents needs at least one label"));
                            }
                            step.parents(&ps);
                        }
                        Some(other) => return Err(syntax(i, &format!("unexpected {other:?}"))),
                    }
                    i += 1;
                }
                "time" | "message" | "write" | "delete" if script.steps.is_empty() => {
                    return Err(syntax(i, "directive before first commit"));
                }
                "time" => {
                    let t = rest.parse().map_err(|_| syntax(i, "bad time"))?;
                    script.steps.last_mut().expect("checked").time(t);
                    i += 1;
                }
                "message" => {
                    if let Some(tag) = rest.strip_prefix("<<") {
                        let (body, next) = heredoc(i, tag.trim())?;
                        script.steps.last_mut().expect("checked").message(&body);
                        i = next;
                    } else {
                        script.steps.last_mut().expect("checked").message(rest);
                        i += 1;
                    }
                }
                "write" => {
                    let (path, tag) = rest
                        .rsplit_once(" <<")
                        .ok_or_else(|| syntax(i, "write needs `<path> <<TAG`"))?;
                    let (body, next) = heredoc(i, tag.trim())?;
                    script.steps.last_mut().expect("checked").write(path.trim(), &body);
                    i = next;
                }
                "delete" => {
                    if rest.is_empty() {
                        return Err(syntax(i, "delete needs a path"));
                    }
                    script.steps.last_mut().expect("checked").delete(rest);
                    i += 1;
                }
                other => return Err(syntax(i, &format!("unknown directive {other:?}"))),
            }
        }
        script.validate()?;
        Ok(script)
    }

    /// Renders the text form; `parse(render(s)) == s` for valid scripts whose
    /// file contents end with a newline.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, step) in self.steps.iter().enumerate() {
            out.push_str("commit ");
            out.push_str(&step.label);
            let default_parent = i.checked_sub(1).map(|p| vec![self.steps[p].label.clone()]);
            if step.parents.is_empty() {
                if i > 0 {
                    out.push_str(" root");
                }
            } else if Some(&step.parents) != default_parent.as_ref() {
                out.push_str(" parents ");
                out.push_str(&step.parents.join(" "));
            }
            out.push('\n');
            if let Some(t) = step.time {
                out.push_str(&format!("time {t}\n"));
            }
            let tag = heredoc_tag(step);
            if step.message.contains('\n') {
                out.push_str(&format!("message <<{tag}\n{}{tag}\n", ensure_nl(&step.message)));
            } else {
                out.push_str(&format!("message {}\n", step.message));
            }
            for e in &step.edits {
                match e {
                    FileEdit::Write { path, content } => {
                        out.push_str(&format!("write {path} <<{tag}\n{}{tag}\n", content));
                    }
                    FileEdit::Delete { path } => out.push_str(&format!("delete {path}\n")),
                }
            }
        }
        out
    }
}

fn ensure_nl(s: &str) -> String {
    if s.ends_with('\n') {
        s.to_string()
    } else {
        format!("{s}\n")
    }
}

fn heredoc_tag(step: &FixtureStep) -> String {
    let mut tag = "EOF".to_string();
    let clash = |t: &str| {
        step.message.lines().any(|l| l == t)
            || step.edits.iter().any(|e| match e {
                FileEdit::Write { content, .. } => content.lines().any(|l| l == t),
                FileEdit::Delete { .. } => false,
            })
    };
    while clash(&tag) {
        tag.push('_');
    }
    tag
}

/// Label-to-commit mapping of a built fixture.
#[derive(Debug, Clone)]
pub struct FixtureMap {
    pub path: PathBuf,
    pub commits: BTreeMap<String, CommitRef>,
    pub script: FixtureScript,
}

impl FixtureMap {
    pub fn get(&self, label: &str) -> &CommitRef {
        self.commits
            .get(label)
            .unwrap_or_else(|| panic!("no fixture step labelled {label}"))
    }

    pub fn id(&self, label: &str) -> &CommitId {
        &self.get(label).id
    }

    pub fn label_of(&self, id: &CommitId) -> Option<&str> {
        self.commits
            .iter()
            .find(|(_, c)| &c.id == id)
            .map(|(l, _)| l.as_str())
    }

    pub fn open(&self) -> Result<Repo, GitError> {
        Repo::open(&self.path)
    }

    /// Tree id of a step's commit.
    pub fn tree_of(&self, label: &str) -> Result<String, FixtureError> {
        let spec = format!("{}^{{tree}}", self.id(label));
        let out = run_git(&self.path, ["rev-parse", spec.as_str()])?;
        if !out.success {
            return Err(FixtureError::IoFailure(out.stderr));
        }
        Ok(String::from_utf8_lossy(&out.stdout).trim().to_string())
    }
}

/// Message bytes as stored in the commit object.
fn stored_message(msg: &str) -> String {
    ensure_nl(msg)
}

/// Builds `script` into a fresh repository at `dir`.
pub fn build_fixture(script: &FixtureScript, dir: impl AsRef<Path>) -> Result<FixtureMap, FixtureError> {
    script.validate()?;
    let dir = dir.as_ref();
    if dir.exists() {
        if std::fs::read_dir(dir)?.next().is_some() {
            return Err(FixtureError::IoFailure(format!("{} is not empty", dir.display())));
        }
    } else {
        std::fs::create_dir_all(dir)?;
    }
    let init = run_git(dir, ["init", "-q"])?;
    if !init.success {
        return Err(FixtureError::IoFailure(init.stderr));
    }
    let head = run_git(dir, ["symbolic-ref", "HEAD", "refs/heads/main"])?;
    if !head.success {
        return Err(FixtureError::IoFailure(head.stderr));
    }

    let mut stream: Vec<u8> = Vec::new();
    let mark: BTreeMap<&str, usize> = script
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| (s.label.as_str(), i + 1))
        .collect();
    for (i, step) in script.steps.iter().enumerate() {
        let t = script.time_of(i);
        if step.parents.is_empty() {
            stream.extend_from_slice(b"reset refs/heads/main\n");
        }
        let msg = stored_message(&step.message);
        write!(
            stream,
            "commit refs/heads/main\nmark :{}\nauthor {AUTHOR} {t} +0000\ncommitter {COMMITTER} {t} +0000\ndata {}\n{}",
            i + 1,
            msg.len(),
            msg
        )?;
        for (k, p) in step.parents.iter().enumerate() {
            let kw = if k == 0 { "from" } else { "merge" };
            writeln!(stream, "{kw} :{}", mark[p.as_str()])?;
        }
        for e in &step.edits {
            match e {
                FileEdit::Write { path, content } => {
                    write!(stream, "M 100644 inline {path}\ndata {}\n{content}\n", content.len())?;
                }
                FileEdit::Delete { path } => writeln!(stream, "D {path}")?,
            }
        }
        stream.push(b'\n');
    }
    if !script.steps.is_empty() {
        write!(stream, "reset refs/heads/main\nfrom :{}\n\n", script.steps.len())?;
    }
    stream.extend_from_slice(b"done\n");

    let marks_file = dir.join(".git").join("fixture-marks");
    let marks_arg = format!("--export-marks={}", marks_file.display());
    let mut child = git_command(dir)
        .args(["fast-import", "--quiet", "--done", "--date-format=raw", &marks_arg])
        .stdin(Stdio::piped())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()?;
    child
        .stdin
        .take()
        .expect("piped stdin")
        .write_all(&stream)?;
    let out = child.wait_with_output()?;
    if !out.status.success() {
        return Err(FixtureError::IoFailure(
            String::from_utf8_lossy(&out.stderr).into_owned(),
        ));
    }

    let marks = std::fs::read_to_string(&marks_file)?;
    let mut by_mark = BTreeMap::new();
    for l in marks.lines() {
        if let Some((m, sha)) = l.trim_start_matches(':').split_once(' ') {
            by_mark.insert(m.parse::<usize>().unwrap_or(0), sha.trim().to_string());
        }
    }
    let _ = std::fs::remove_file(&marks_file);

    let mut commits = BTreeMap::new();
    if !script.steps.is_empty() {
        let repo = Repo::open(dir)?;
        for (i, step) in script.steps.iter().enumerate() {
            let sha = by_mark
                .get(&(i + 1))
                .ok_or_else(|| FixtureError::IoFailure(format!("no mark for {}", step.label)))?;
            commits.insert(step.label.clone(), repo.resolve(sha)?);
        }
    }
    Ok(FixtureMap {
        path: dir.to_path_buf(),
        commits,
        script: script.clone(),
    })
}

/// Computes the id git assigns to a fixture commit with the given tree,
/// parents, time and message, without writing anything.
pub fn predict_commit_id(tree: &str, parents: &[&CommitId], time: i64, message: &str) -> CommitId {
    let body = commit_body(tree, parents, time, message);
    let mut h = Sha1::new();
    h.update(format!("commit {}\0", body.len()).as_bytes());
    h.update(body.as_bytes());
    let digest = h.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    CommitId::new(hex).expect("sha1 hex is a valid id")
}

fn commit_body(tree: &str, parents: &[&CommitId], time: i64, message: &str) -> String {
    let mut body = format!("tree {tree}\n");
    for p in parents {
        body.push_str(&format!("parent {p}\n"));
    }
    body.push_str(&format!(
        "author {AUTHOR} {time} +0000\ncommitter {COMMITTER} {time} +0000\n\n{}",
        stored_message(message)
    ));
    body
}

/// Searches for a message `"{prefix} {nonce}"` (or with a trailing
/// `suffix` block) whose commit id satisfies `accept`. Returns the message
/// and the predicted id.
pub fn grind_message(
    tree: &str,
    parents: &[&CommitId],
    time: i64,
    prefix: &str,
    suffix: &str,
    max_tries: u64,
    mut accept: impl FnMut(&CommitId) -> bool,
) -> Option<(String, CommitId)> {
    (0..max_tries).find_map(|nonce| {
        let msg = format!("{prefix} {nonce}{suffix}");
        let id = predict_commit_id(tree, parents, time, &msg);
        accept(&id).then_some((msg, id))
    })
}

/// Some 7-character window shared by both ids, if any.
pub fn shared_window(a: &CommitId, b: &CommitId) -> Option<String> {
    let (a, b) = (a.as_str(), b.as_str());
    (0..=33).find_map(|i| {
        let w = &a[i..i + 7];
        b.contains(w).then(|| w.to_string())
    })
}
