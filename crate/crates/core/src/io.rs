//! CSV and JSON artifacts exchanged between pipeline stages.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{FailureMode, OutcomeCategory};
use crate::git::{CommitId, GitError, Repo};
use crate::miner::{AbnormalCategory, AbnormalRecord, BugFixLink};
use crate::szz::{Algorithm, LineAttribution, Prediction};
use crate::trace::TraceChain;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: row {row}: {msg}")]
    Format { path: String, row: usize, msg: String },
    #[error(transparent)]
    Git(#[from] GitError),
}

fn disp(path: &Path) -> String {
    path.display().to_string()
}

fn writer(path: &Path) -> Result<csv::Writer<File>, IoError> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|source| IoError::Csv { path: disp(path), source })
}

fn reader(path: &Path) -> Result<csv::Reader<File>, IoError> {
    csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|source| IoError::Csv { path: disp(path), source })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv { path: disp(path), source }
}

fn join_ids<'a>(ids: impl IntoIterator<Item = &'a CommitId>) -> String {
    ids.into_iter().map(|c| c.as_str()).collect::<Vec<_>>().join("|")
}

fn split_ids(field: &str, path: &Path, row: usize) -> Result<Vec<CommitId>, IoError> {
    field
        .split('|')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse().map_err(|_| IoError::Format {
                path: disp(path),
                row,
                msg: format!("bad commit id {s:?}"),
            })
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetRow {
    fix_sha: String,
    inducing_shas: String,
    subject: String,
}

pub fn write_dataset(path: &Path, dataset: &[BugFixLink]) -> Result<(), IoError> {
    let mut w = writer(path)?;
    for l in dataset {
        w.serialize(DatasetRow {
            fix_sha: l.fixing_commit.id.to_string(),
            inducing_shas: join_ids(l.inducing_commits.iter().map(|c| &c.id)),
            subject: l.fixing_commit.subject.clone(),
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| IoError::Io { path: disp(path), source })
}

/// Reads a dataset CSV back, re-resolving every commit in `repo`. The raw
/// trailer lines are not part of the file and come back empty.
pub fn read_dataset(path: &Path, repo: &Repo) -> Result<Vec<BugFixLink>, IoError> {
    let mut out = Vec::new();
    for (i, row) in reader(path)?.deserialize::<DatasetRow>().enumerate() {
        let row = row.map_err(csv_err(path))?;
        let fix = split_ids(&row.fix_sha, path, i + 1)?;
        let [fix] = fix.as_slice() else {
            return Err(IoError::Format {
                path: disp(path),
                row: i + 1,
                msg: "expected one fixing commit".into(),
            });
        };
        let mut inducing = Vec::new();
        for id in split_ids(&row.inducing_shas, path, i + 1)? {
            inducing.push(repo.commit(&id)?);
        }
        out.push(BugFixLink {
            fixing_commit: repo.commit(fix)?,
            inducing_commits: inducing,
            raw_refs: Vec::new(),
        });
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct AbnormalRow {
    fix_sha: String,
    raw_line: String,
    category: String,
    subcause: String,
}

pub fn write_abnormal(path: &Path, records: &[AbnormalRecord]) -> Result<(), IoError> {
    let mut w = writer(path)?;
    for r in records {
        w.serialize(AbnormalRow {
            fix_sha: r.fixing_commit.id.to_string(),
            raw_line: r.raw_line.clone(),
            category: r.category.as_str().to_string(),
            subcause: r.subcause.clone(),
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| IoError::Io { path: disp(path), source })
}

/// Abnormal rows as `(fix, raw_line, category, subcause)`.
pub fn read_abnormal(path: &Path) -> Result<Vec<(CommitId, String, AbnormalCategory, String)>, IoError> {
    let mut out = Vec::new();
    for (i, row) in reader(path)?.deserialize::<AbnormalRow>().enumerate() {
        let row = row.map_err(csv_err(path))?;
        let bad = |msg: String| IoError::Format {
            path: disp(path),
            row: i + 1,
            msg,
        };
        let fix = row.fix_sha.parse().map_err(|_| bad(format!("bad commit id {:?}", row.fix_sha)))?;
        let cat = AbnormalCategory::parse(&row.category).ok_or_else(|| bad(format!("unknown category {:?}", row.category)))?;
        out.push((fix, row.raw_line, cat, row.subcause));
    }
    Ok(out)
}

pub fn write_id_list(path: &Path, ids: &[CommitId]) -> Result<(), IoError> {
    let io = |source| IoError::Io { path: disp(path), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for id in ids {
        writeln!(w, "{id}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_id_list(path: &Path) -> Result<Vec<CommitId>, IoError> {
    let io = |source| IoError::Io { path: disp(path), source };
    let f = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line.map_err(io)?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.push(line.parse().map_err(|_| IoError::Format {
            path: disp(path),
            row: i + 1,
            msg: format!("bad commit id {line:?}"),
        })?);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictionRow {
    fix_sha: String,
    algorithm: String,
    inducing_shas: String,
}

pub fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<(), IoError> {
    let mut w = writer(path)?;
    for p in predictions {
        w.serialize(PredictionRow {
            fix_sha: p.fixing_commit.to_string(),
            algorithm: p.algorithm.as_str().to_string(),
            inducing_shas: join_ids(&p.inducing),
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| IoError::Io { path: disp(path), source })
}

/// Reads predictions without per-line attribution.
pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>, IoError> {
    let mut out = Vec::new();
    for (i, row) in reader(path)?.deserialize::<PredictionRow>().enumerate() {
        let row = row.map_err(csv_err(path))?;
        let bad = |msg: String| IoError::Format {
            path: disp(path),
            row: i + 1,
            msg,
        };
        let algorithm: Algorithm = row.algorithm.parse().map_err(|e: crate::szz::UnknownAlgorithm| bad(e.to_string()))?;
        let fix = row.fix_sha.parse().map_err(|_| bad(format!("bad commit id {:?}", row.fix_sha)))?;
        out.push(Prediction {
            fixing_commit: fix,
            algorithm,
            inducing: split_ids(&row.inducing_shas, path, i + 1)?.into_iter().collect(),
            attribution: Vec::new(),
        });
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct AttributionJson<'a> {
    fix_sha: &'a CommitId,
    algorithm: Algorithm,
    lines: Vec<AttributedLine<'a>>,
}

#[derive(Debug, Serialize)]
struct AttributedLine<'a> {
    path: &'a str,
    line: u32,
    content: &'a str,
    origin: &'a CommitId,
}

fn attribution_json(p: &Prediction) -> AttributionJson<'_> {
    AttributionJson {
        fix_sha: &p.fixing_commit,
        algorithm: p.algorithm,
        lines: p
            .attribution
            .iter()
            .map(|LineAttribution { line, origin }| AttributedLine {
                path: &line.path,
                line: line.line,
                content: &line.content,
                origin,
            })
            .collect(),
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    let io = |source| IoError::Io { path: disp(path), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| IoError::Json { path: disp(path), source })?;
    w.write_all(b"\n").map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let f = File::open(path).map_err(|source| IoError::Io { path: disp(path), source })?;
    serde_json::from_reader(BufReader::new(f)).map_err(|source| IoError::Json { path: disp(path), source })
}

pub fn write_attribution(path: &Path, predictions: &[Prediction]) -> Result<(), IoError> {
    let rows: Vec<_> = predictions.iter().map(attribution_json).collect();
    write_json(path, &rows)
}

#[derive(Debug, Serialize)]
struct ChainJson<'a> {
    fix_sha: &'a CommitId,
    line: LineJson<'a>,
    chain: Vec<ChainLinkJson<'a>>,
}

#[derive(Debug, Serialize)]
struct LineJson<'a> {
    path: &'a str,
    line: u32,
    content: &'a str,
}

#[derive(Debug, Serialize)]
struct ChainLinkJson<'a> {
    sha: &'a CommitId,
    role: &'static str,
    matched_line: &'a str,
}

pub fn write_chains(path: &Path, chains: &[TraceChain]) -> Result<(), IoError> {
    let rows: Vec<_> = chains
        .iter()
        .map(|c| ChainJson {
            fix_sha: &c.fix,
            line: LineJson {
                path: &c.line.path,
                line: c.line.line,
                content: &c.line.content,
            },
            chain: c
                .chain
                .iter()
                .map(|l| ChainLinkJson {
                    sha: &l.commit.id,
                    role: l.role.as_str(),
                    matched_line: &l.matched_line,
                })
                .collect(),
        })
        .collect();
    write_json(path, &rows)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationRow {
    pub fix_sha: CommitId,
    pub algorithm: Algorithm,
    pub category: OutcomeCategory,
    pub failure_mode: Option<FailureMode>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawClassificationRow {
    fix_sha: String,
    algorithm: String,
    category: String,
    failure_mode: String,
}

pub fn write_classification(path: &Path, rows: &[ClassificationRow]) -> Result<(), IoError> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(RawClassificationRow {
            fix_sha: r.fix_sha.to_string(),
            algorithm: r.algorithm.as_str().to_string(),
            category: r.category.as_str().to_string(),
            failure_mode: r.failure_mode.map(|m| m.as_str().to_string()).unwrap_or_default(),
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| IoError::Io { path: disp(path), source })
}

pub fn read_classification(path: &Path) -> Result<Vec<ClassificationRow>, IoError> {
    let mut out = Vec::new();
    for (i, row) in reader(path)?.deserialize::<RawClassificationRow>().enumerate() {
        let row = row.map_err(csv_err(path))?;
        let bad = |msg: String| IoError::Format {
            path: disp(path),
            row: i + 1,
            msg,
        };
        out.push(ClassificationRow {
            fix_sha: row.fix_sha.parse().map_err(|_| bad(format!("bad commit id {:?}", row.fix_sha)))?,
            algorithm: row.algorithm.parse().map_err(|e: crate::szz::UnknownAlgorithm| bad(e.to_string()))?,
            category: row.category.parse().map_err(bad)?,
            failure_mode: match row.failure_mode.as_str() {
                "" => None,
                m => Some(m.parse().map_err(bad)?),
            },
        });
    }
    Ok(out)
}

/// Per-category counts for each algorithm.
pub fn category_counts(rows: &[ClassificationRow]) -> BTreeMap<Algorithm, BTreeMap<OutcomeCategory, usize>> {
    let mut out: BTreeMap<Algorithm, BTreeMap<OutcomeCategory, usize>> = BTreeMap::new();
    for r in rows {
        let per = out.entry(r.algorithm).or_insert_with(|| OutcomeCategory::ALL.iter().map(|&c| (c, 0)).collect());
        *per.entry(r.category).or_default() += 1;
    }
    out
}
