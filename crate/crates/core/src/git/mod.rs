//! Read-only view of a local git repository.
//!
//! Every query shells out to the `git` executable (overridable through the
//! `GIT_BINARY` environment variable) with user and system configuration
//! disabled and `core.abbrev=40` pinned, so outputs depend only on the
//! repository contents. A [`Repo`] memoizes what it has already asked for and
//! is meant to be owned by a single worker; open one handle per thread.

mod diff;
mod types;

use std::cell::RefCell;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::cmp::Reverse;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;

pub use diff::{parse_patch, PatchError};
pub use types::{
    BlameEntry, CommitId, CommitRef, DiffSet, FileDiff, Hunk, LineChange, LineKind, LineStats,
};

pub(crate) use diff::unquote;
pub(crate) use types::is_full_id;

#[derive(Debug, thiserror::Error)]
pub enum GitError {
    #[error("{0} is not a git repository")]
    NotARepo(PathBuf),
    #[error("repository {0} has no commits")]
    EmptyRepo(PathBuf),
    #[error("unknown commit {0}")]
    UnknownCommit(String),
    #[error("path {path} does not exist at {commit}")]
    NoSuchPathAtCommit { path: String, commit: String },
    #[error("line {line} is out of range for {path} at {commit}")]
    LineOutOfRange { path: String, commit: String, line: u32 },
    #[error("invalid line range {start},{end} for {path}")]
    RangeInvalid { path: String, start: u32, end: u32 },
    #[error("malformed partial commit id {0:?}")]
    MalformedPartial(String),
    #[error("not a full commit id: {0:?}")]
    InvalidId(String),
    #[error("git {args} failed: {stderr}")]
    Command { args: String, stderr: String },
    #[error("unexpected git output: {0}")]
    Parse(String),
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = GitError> = std::result::Result<T, E>;

/// Executable used for every git invocation.
pub fn git_binary() -> OsString {
    std::env::var_os("GIT_BINARY").unwrap_or_else(|| OsString::from("git"))
}

/// Builds a git command isolated from user/system configuration.
pub(crate) fn git_command(dir: &Path) -> Command {
    let mut cmd = Command::new(git_binary());
    cmd.current_dir(dir)
        .env("GIT_CONFIG_NOSYSTEM", "1")
        .env("GIT_CONFIG_GLOBAL", "/dev/null")
        .env("LC_ALL", "C")
        .env("GIT_PAGER", "cat")
        .env_remove("GIT_DIR")
        .env_remove("GIT_WORK_TREE")
        .env_remove("GIT_INDEX_FILE")
        .env_remove("GIT_OBJECT_DIRECTORY")
        .args([
            "-c",
            "core.abbrev=40",
            "-c",
            "core.quotePath=false",
            "-c",
            "color.ui=never",
            "-c",
            "log.showSignature=false",
            "-c",
            "diff.noprefix=false",
        ])
        .stdin(Stdio::null());
    cmd
}

pub(crate) struct GitOutput {
    pub success: bool,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

pub(crate) fn run_git<I, S>(dir: &Path, args: I) -> Result<GitOutput>
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = git_command(dir)
        .args(args)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .output()?;
    Ok(GitOutput {
        success: out.status.success(),
        stdout: out.stdout,
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    })
}

fn command_error(args: &[&str], stderr: &str) -> GitError {
    GitError::Command {
        args: args.join(" "),
        stderr: stderr.trim().to_string(),
    }
}

const META_FORMAT: &str = "--format=%H%x1f%P%x1f%ct%x1f%s";

#[derive(Debug, Clone)]
struct CommitMeta {
    commit: CommitRef,
    parents: Vec<CommitId>,
}

/// Sorted full-ID list searchable by arbitrary substring.
struct IdIndex {
    ids: Vec<CommitId>,
    /// `id\n` for every id, in `ids` order.
    haystack: Vec<u8>,
}

impl IdIndex {
    fn new(mut ids: Vec<CommitId>) -> Self {
        ids.sort();
        ids.dedup();
        let mut haystack = Vec::with_capacity(ids.len() * 41);
        for id in &ids {
            haystack.extend_from_slice(id.as_str().as_bytes());
            haystack.push(b'\n');
        }
        IdIndex { ids, haystack }
    }

    fn find(&self, needle: &str) -> Vec<CommitId> {
        let mut hits: Vec<usize> = memchr::memmem::find_iter(&self.haystack, needle.as_bytes())
            .map(|pos| pos / 41)
            .collect();
        hits.dedup();
        hits.into_iter().map(|i| self.ids[i].clone()).collect()
    }
}

/// Handle on one repository, pinned to a head commit.
pub struct Repo {
    path: PathBuf,
    head: CommitRef,
    pinned: bool,
    meta: RefCell<HashMap<CommitId, CommitMeta>>,
    /// Heads whose full ancestry is already in `meta`.
    loaded: RefCell<HashSet<CommitId>>,
    diffs: RefCell<HashMap<CommitId, Arc<DiffSet>>>,
    first_parent_diffs: RefCell<HashMap<CommitId, Arc<DiffSet>>>,
    blames: RefCell<HashMap<(CommitId, String, u32), BlameEntry>>,
    index: RefCell<Option<Arc<IdIndex>>>,
}

impl std::fmt::Debug for Repo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Repo")
            .field("path", &self.path)
            .field("head", &self.head.id)
            .finish()
    }
}

impl Repo {
    /// Opens the repository at `path`, pinned to `HEAD`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::open_at(path, "HEAD")
    }

    /// Opens the repository at `path`, pinned to revision `rev`.
    pub fn open_at(path: impl AsRef<Path>, rev: &str) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if !path.is_dir() {
            return Err(GitError::NotARepo(path));
        }
        let probe = run_git(&path, ["rev-parse", "--git-dir"])?;
        if !probe.success {
            return Err(GitError::NotARepo(path));
        }
        // a repository with an unborn HEAD has nothing to pin to
        let has_commit = run_git(&path, ["rev-parse", "--verify", "--quiet", "HEAD^{commit}"])?;
        if !has_commit.success && rev == "HEAD" {
            let any = run_git(&path, ["rev-list", "-n", "1", "--all"])?;
            if any.stdout.is_empty() {
                return Err(GitError::EmptyRepo(path));
            }
        }
        let placeholder = CommitRef {
            id: CommitId::new("0".repeat(40))?,
            timestamp: 0,
            parent_count: 0,
            subject: String::new(),
        };
        let mut repo = Repo {
            path,
            head: placeholder,
            pinned: false,
            meta: RefCell::new(HashMap::new()),
            loaded: RefCell::new(HashSet::new()),
            diffs: RefCell::new(HashMap::new()),
            first_parent_diffs: RefCell::new(HashMap::new()),
            blames: RefCell::new(HashMap::new()),
            index: RefCell::new(None),
        };
        repo.head = match repo.resolve(rev) {
            Ok(c) => c,
            Err(GitError::UnknownCommit(_)) if !has_commit.success => {
                return Err(GitError::EmptyRepo(repo.path))
            }
            Err(e) => return Err(e),
        };
        repo.pinned = true;
        Ok(repo)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn head(&self) -> &CommitRef {
        &self.head
    }

    fn git(&self, args: &[&str]) -> Result<GitOutput> {
        run_git(&self.path, args)
    }

    fn git_ok(&self, args: &[&str]) -> Result<Vec<u8>> {
        let out = self.git(args)?;
        if !out.success {
            return Err(command_error(args, &out.stderr));
        }
        Ok(out.stdout)
    }

    fn parse_meta_records(&self, raw: &[u8]) -> Result<Vec<CommitMeta>> {
        let text = String::from_utf8_lossy(raw);
        let mut out = Vec::new();
        for rec in text.split('\0').filter(|r| !r.trim().is_empty()) {
            let rec = rec.trim_start_matches('\n');
            let mut f = rec.splitn(4, '\x1f');
            let (Some(id), Some(parents), Some(ts), Some(subject)) =
                (f.next(), f.next(), f.next(), f.next())
            else {
                return Err(GitError::Parse(format!("commit record {rec:?}")));
            };
            let parents = parents
                .split_whitespace()
                .map(CommitId::new)
                .collect::<Result<Vec<_>>>()?;
            let commit = CommitRef {
                id: CommitId::new(id)?,
                timestamp: ts
                    .trim()
                    .parse()
                    .map_err(|_| GitError::Parse(format!("timestamp {ts:?}")))?,
                parent_count: parents.len() as u32,
                subject: subject.trim_end_matches('\n').to_string(),
            };
            out.push(CommitMeta { commit, parents });
        }
        Ok(out)
    }

    /// Resolves any revision expression to a commit.
    pub fn resolve(&self, rev: &str) -> Result<CommitRef> {
        if is_full_id(rev) {
            if let Some(m) = self.meta.borrow().get(&CommitId::new(rev)?) {
                return Ok(m.commit.clone());
            }
        }
        Ok(self.meta_for(rev)?.commit)
    }

    fn meta_for(&self, rev: &str) -> Result<CommitMeta> {
        if is_full_id(rev) {
            if let Some(m) = self.meta.borrow().get(&CommitId::new(rev)?) {
                return Ok(m.clone());
            }
        }
        if rev.starts_with('-') {
            return Err(GitError::UnknownCommit(rev.to_string()));
        }
        // one history-wide pass is far cheaper than a process per commit
        if is_full_id(rev) && self.pinned && !self.loaded.borrow().contains(&self.head.id) {
            let head = self.head.id.clone();
            self.load_history(&head)?;
            if let Some(m) = self.meta.borrow().get(&CommitId::new(rev)?) {
                return Ok(m.clone());
            }
        }
        let spec = format!("{rev}^{{commit}}");
        let out = self.git(&["log", "-1", "-z", META_FORMAT, &spec, "--"])?;
        if !out.success {
            return Err(GitError::UnknownCommit(rev.to_string()));
        }
        let meta = self
            .parse_meta_records(&out.stdout)?
            .into_iter()
            .next()
            .ok_or_else(|| GitError::UnknownCommit(rev.to_string()))?;
        self.meta
            .borrow_mut()
            .insert(meta.commit.id.clone(), meta.clone());
        Ok(meta)
    }

    /// Metadata for a known commit.
    pub fn commit(&self, id: &CommitId) -> Result<CommitRef> {
        self.resolve(id.as_str())
    }

    /// Parent ids in git order (first parent first).
    pub fn parents(&self, id: &CommitId) -> Result<Vec<CommitId>> {
        Ok(self.meta_for(id.as_str())?.parents)
    }

    fn load_history(&self, until: &CommitId) -> Result<()> {
        if self.loaded.borrow().contains(until) {
            return Ok(());
        }
        let raw = self.git_ok(&["log", "-z", META_FORMAT, until.as_str(), "--"])?;
        let records = self.parse_meta_records(&raw)?;
        let mut meta = self.meta.borrow_mut();
        for m in records {
            meta.insert(m.commit.id.clone(), m);
        }
        self.loaded.borrow_mut().insert(until.clone());
        Ok(())
    }

    /// Every ancestor of `until` (inclusive), children before parents; among
    /// commits that are ready at the same time the newest comes first, ties
    /// broken by the smaller id.
    pub fn list_commits(&self, until: &CommitRef) -> Result<Vec<CommitRef>> {
        self.meta_for(until.id.as_str())?;
        self.load_history(&until.id)?;
        let meta = self.meta.borrow();

        // restrict to the ancestry of `until`
        let mut members: HashSet<&CommitId> = HashSet::new();
        let mut stack = vec![&until.id];
        while let Some(id) = stack.pop() {
            if members.insert(id) {
                let m = meta
                    .get(id)
                    .ok_or_else(|| GitError::UnknownCommit(id.to_string()))?;
                stack.extend(m.parents.iter());
            }
        }
        let mut pending_children: HashMap<&CommitId, usize> =
            members.iter().map(|id| (*id, 0)).collect();
        for id in &members {
            for p in &meta[*id].parents {
                *pending_children.get_mut(p).expect("parent in ancestry") += 1;
            }
        }
        let mut ready: BinaryHeap<(i64, Reverse<&CommitId>)> = BinaryHeap::new();
        for (id, n) in &pending_children {
            if *n == 0 {
                ready.push((meta[*id].commit.timestamp, Reverse(*id)));
            }
        }
        let mut out = Vec::with_capacity(members.len());
        while let Some((_, Reverse(id))) = ready.pop() {
            let m = &meta[id];
            out.push(m.commit.clone());
            for p in &m.parents {
                let n = pending_children.get_mut(p).expect("parent in ancestry");
                *n -= 1;
                if *n == 0 {
                    ready.push((meta[p].commit.timestamp, Reverse(p)));
                }
            }
        }
        Ok(out)
    }

    /// Raw log messages (subject and body) of every ancestor of `until`,
    /// in `git log` order.
    pub fn commit_messages(&self, until: &CommitRef) -> Result<Vec<(CommitId, String)>> {
        let raw = self.git_ok(&["log", "-z", "--format=%H%x1f%B", until.id.as_str(), "--"])?;
        let text = String::from_utf8_lossy(&raw);
        let mut out = Vec::new();
        for rec in text.split('\0').filter(|r| !r.is_empty()) {
            let rec = rec.trim_start_matches('\n');
            let (id, body) = rec
                .split_once('\x1f')
                .ok_or_else(|| GitError::Parse(format!("message record {rec:?}")))?;
            out.push((CommitId::new(id)?, body.to_string()));
        }
        Ok(out)
    }

    /// Full log message of one commit.
    pub fn message(&self, id: &CommitId) -> Result<String> {
        let out = self.git(&["log", "-1", "--format=%B", id.as_str(), "--"])?;
        if !out.success {
            return Err(GitError::UnknownCommit(id.to_string()));
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }

    /// Diff of `c` against its first parent (root commits against the empty
    /// tree) with rename detection. Merge commits yield an empty diff set.
    pub fn commit_diff(&self, c: &CommitRef) -> Result<Arc<DiffSet>> {
        if let Some(d) = self.diffs.borrow().get(&c.id) {
            return Ok(d.clone());
        }
        let commit = self.commit(&c.id)?;
        let set = if commit.is_merge() {
            Arc::new(DiffSet {
                commit,
                files: Vec::new(),
            })
        } else {
            self.compute_diff(commit, None)?
        };
        self.diffs.borrow_mut().insert(c.id.clone(), set.clone());
        Ok(set)
    }

    /// Like [`Repo::commit_diff`], but merges are diffed against their first
    /// parent instead of being reported empty. Used when stepping blame past
    /// a merge.
    pub fn first_parent_diff(&self, c: &CommitRef) -> Result<Arc<DiffSet>> {
        let commit = self.commit(&c.id)?;
        if !commit.is_merge() {
            return self.commit_diff(&commit);
        }
        if let Some(d) = self.first_parent_diffs.borrow().get(&c.id) {
            return Ok(d.clone());
        }
        let parent = self.parents(&commit.id)?.remove(0);
        let set = self.compute_diff(commit, Some(parent))?;
        self.first_parent_diffs
            .borrow_mut()
            .insert(c.id.clone(), set.clone());
        Ok(set)
    }

    fn compute_diff(&self, commit: CommitRef, against: Option<CommitId>) -> Result<Arc<DiffSet>> {
        let mut args = vec![
            "diff-tree",
            "-r",
            "-p",
            "-M",
            "-U0",
            "--root",
            "--no-commit-id",
            "--no-ext-diff",
            "--no-textconv",
            "--src-prefix=a/",
            "--dst-prefix=b/",
        ];
        if let Some(p) = &against {
            args.push(p.as_str());
        }
        args.push(commit.id.as_str());
        let raw = self.git_ok(&args)?;
        let files = parse_patch(&String::from_utf8_lossy(&raw))?;
        Ok(Arc::new(DiffSet { commit, files }))
    }

    /// Blames `line` of `file` as of the first parent of `at`.
    pub fn blame_line(&self, at: &CommitRef, file: &str, line: u32) -> Result<BlameEntry> {
        self.blame_lines(at, file, &[line])
            .pop()
            .expect("one result per requested line")
    }

    /// Blames several lines of one file as of the first parent of `at`, with
    /// one result per requested line in request order.
    pub fn blame_lines(&self, at: &CommitRef, file: &str, lines: &[u32]) -> Vec<Result<BlameEntry>> {
        let mut results: Vec<Option<Result<BlameEntry>>> = Vec::with_capacity(lines.len());
        results.resize_with(lines.len(), || None);
        let mut missing = Vec::new();
        {
            let cache = self.blames.borrow();
            for (i, &l) in lines.iter().enumerate() {
                match cache.get(&(at.id.clone(), file.to_string(), l)) {
                    Some(e) => results[i] = Some(Ok(e.clone())),
                    None => missing.push(l),
                }
            }
        }
        if !missing.is_empty() {
            missing.sort_unstable();
            missing.dedup();
            match self.run_blame(at, file, &missing) {
                Ok(entries) => {
                    let mut cache = self.blames.borrow_mut();
                    for (l, e) in entries {
                        cache.insert((at.id.clone(), file.to_string(), l), e);
                    }
                }
                Err(_) if missing.len() > 1 => {
                    // isolate the failing line(s)
                    for &l in &missing {
                        if let Ok(mut one) = self.run_blame(at, file, &[l]) {
                            if let Some((_, e)) = one.pop() {
                                self.blames
                                    .borrow_mut()
                                    .insert((at.id.clone(), file.to_string(), l), e);
                            }
                        }
                    }
                }
                Err(_) => {}
            }
        }
        let cache = self.blames.borrow();
        lines
            .iter()
            .zip(results)
            .map(|(&l, r)| match r {
                Some(r) => r,
                None => match cache.get(&(at.id.clone(), file.to_string(), l)) {
                    Some(e) => Ok(e.clone()),
                    None => Err(self.blame_failure(at, file, l)),
                },
            })
            .collect()
    }

    fn blame_failure(&self, at: &CommitRef, file: &str, line: u32) -> GitError {
        match self.run_blame(at, file, &[line]) {
            Err(e) => e,
            Ok(_) => GitError::Parse(format!("blame returned nothing for {file}:{line}")),
        }
    }

    fn run_blame(&self, at: &CommitRef, file: &str, lines: &[u32]) -> Result<Vec<(u32, BlameEntry)>> {
        let commit = self.commit(&at.id)?;
        let parent = match self.parents(&commit.id)?.into_iter().next() {
            Some(p) => p,
            None => {
                return Err(GitError::NoSuchPathAtCommit {
                    path: file.to_string(),
                    commit: format!("{}^", commit.id),
                })
            }
        };
        if lines.contains(&0) {
            return Err(GitError::LineOutOfRange {
                path: file.to_string(),
                commit: parent.to_string(),
                line: 0,
            });
        }
        let ranges: Vec<String> = lines.iter().map(|l| format!("-L{l},{l}")).collect();
        let mut args: Vec<&str> = vec!["blame", "--line-porcelain"];
        args.extend(ranges.iter().map(String::as_str));
        args.extend([parent.as_str(), "--", file]);
        let out = self.git(&args)?;
        if !out.success {
            let err = &out.stderr;
            return Err(if err.contains("no such path") {
                GitError::NoSuchPathAtCommit {
                    path: file.to_string(),
                    commit: parent.to_string(),
                }
            } else if err.contains("has only") || err.contains("invalid -L") {
                GitError::LineOutOfRange {
                    path: file.to_string(),
                    commit: parent.to_string(),
                    line: *lines.last().unwrap_or(&0),
                }
            } else {
                command_error(&args, err)
            });
        }
        self.parse_porcelain(&out.stdout)
    }

    fn parse_porcelain(&self, raw: &[u8]) -> Result<Vec<(u32, BlameEntry)>> {
        let text = String::from_utf8_lossy(raw);
        let mut out = Vec::new();
        let mut header: Option<(String, u32, u32)> = None;
        let mut filename: Option<String> = None;
        for line in text.split('\n') {
            if let Some(content) = line.strip_prefix('\t') {
                let (sha, orig, fin) = header
                    .take()
                    .ok_or_else(|| GitError::Parse("blame content without header".into()))?;
                let path = filename
                    .take()
                    .ok_or_else(|| GitError::Parse("blame entry without filename".into()))?;
                let origin = self.commit(&CommitId::new(sha)?)?;
                out.push((
                    fin,
                    BlameEntry {
                        origin,
                        origin_path: path,
                        origin_line: orig,
                        content: content.to_string(),
                    },
                ));
            } else if header.is_none() {
                let mut parts = line.split(' ');
                if let (Some(sha), Some(orig), Some(fin)) = (parts.next(), parts.next(), parts.next()) {
                    if is_full_id(sha) {
                        let orig = orig.parse().map_err(|_| GitError::Parse(line.into()))?;
                        let fin = fin.parse().map_err(|_| GitError::Parse(line.into()))?;
                        header = Some((sha.to_string(), orig, fin));
                    }
                }
            } else if let Some(name) = line.strip_prefix("filename ") {
                filename = Some(unquote(name));
            }
        }
        Ok(out)
    }

    /// Commits that touched lines `start..=end` of `file` as tracked by
    /// `git log -L` from `from`, newest first.
    pub fn log_line_range(&self, file: &str, start: u32, end: u32, from: &CommitRef) -> Result<Vec<CommitRef>> {
        if start == 0 || end < start {
            return Err(GitError::RangeInvalid {
                path: file.to_string(),
                start,
                end,
            });
        }
        let range = format!("-L{start},{end}:{file}");
        let args = ["log", "--format=%x00%H", range.as_str(), from.id.as_str()];
        let out = self.git(&args)?;
        if !out.success {
            let err = &out.stderr;
            return Err(if err.contains("no path") || err.contains("no such path") {
                GitError::NoSuchPathAtCommit {
                    path: file.to_string(),
                    commit: from.id.to_string(),
                }
            } else if err.contains("has only") || err.contains("invalid") {
                GitError::RangeInvalid {
                    path: file.to_string(),
                    start,
                    end,
                }
            } else {
                command_error(&args, err)
            });
        }
        let text = String::from_utf8_lossy(&out.stdout);
        text.split('\n')
            .filter_map(|l| l.strip_prefix('\0'))
            .map(|id| self.commit(&CommitId::new(id)?))
            .collect()
    }

    /// Commits touching `file`, following renames, newest first.
    pub fn file_history(&self, file: &str, from: &CommitRef) -> Result<Vec<CommitRef>> {
        let args = ["log", "--follow", "--format=%H", from.id.as_str(), "--", file];
        let raw = self.git_ok(&args)?;
        let text = String::from_utf8_lossy(&raw);
        let out: Vec<CommitRef> = text
            .split('\n')
            .filter(|l| !l.is_empty())
            .map(|id| self.commit(&CommitId::new(id)?))
            .collect::<Result<_>>()?;
        if out.is_empty() {
            return Err(GitError::NoSuchPathAtCommit {
                path: file.to_string(),
                commit: from.id.to_string(),
            });
        }
        Ok(out)
    }

    /// Content of `file` as of commit `at`, if the path exists there.
    pub fn file_content(&self, at: &CommitId, file: &str) -> Result<String> {
        let spec = format!("{at}:{file}");
        let out = self.git(&["cat-file", "blob", &spec])?;
        if !out.success {
            return Err(GitError::NoSuchPathAtCommit {
                path: file.to_string(),
                commit: at.to_string(),
            });
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }

    /// Full ids containing `partial` anywhere (not only as a prefix), among
    /// the ancestors of the pinned head, in id order.
    pub fn resolve_partial_id(&self, partial: &str) -> Result<Vec<CommitRef>> {
        if partial.len() < 7
            || partial.len() > 40
            || !partial.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
        {
            return Err(GitError::MalformedPartial(partial.to_string()));
        }
        let index = self.id_index()?;
        index.find(partial).iter().map(|id| self.commit(id)).collect()
    }

    fn id_index(&self) -> Result<Arc<IdIndex>> {
        if let Some(i) = self.index.borrow().as_ref() {
            return Ok(i.clone());
        }
        self.load_history(&self.head.id)?;
        let ids = self.list_commits(&self.head)?.into_iter().map(|c| c.id).collect();
        let index = Arc::new(IdIndex::new(ids));
        *self.index.borrow_mut() = Some(index.clone());
        Ok(index)
    }

    /// Added/removed line totals of every ancestor of `until` in one pass.
    /// Totals agree with [`Repo::commit_diff`]: merges count as 0/0 and
    /// binary changes contribute no lines.
    pub fn line_stats(&self, until: &CommitRef) -> Result<HashMap<CommitId, LineStats>> {
        let raw = self.git_ok(&[
            "log",
            "-M",
            "--numstat",
            "--format=%H",
            "--no-ext-diff",
            until.id.as_str(),
            "--",
        ])?;
        let text = String::from_utf8_lossy(&raw);
        let mut out: HashMap<CommitId, LineStats> = HashMap::new();
        let mut current: Option<CommitId> = None;
        for line in text.split('\n') {
            if is_full_id(line) {
                let id = CommitId::new(line)?;
                out.entry(id.clone()).or_default();
                current = Some(id);
            } else if let (Some(id), Some((a, rest))) = (&current, line.split_once('\t')) {
                let r = rest.split('\t').next().unwrap_or("");
                let entry = out.get_mut(id).expect("inserted with header");
                entry.added += a.parse::<usize>().unwrap_or(0);
                entry.removed += r.parse::<usize>().unwrap_or(0);
            }
        }
        Ok(out)
    }
}
