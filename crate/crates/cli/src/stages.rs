//! The four pipeline stages. Each reads the previous stage's files from the
//! output directory and writes its own there.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use szz_core::classify::{
    categorize_outcome, classify_failure, emit_llm_prompt, ghost_frequencies, prompt_context, ClassifyError, FailureMode,
    GhostFrequencies, OutcomeCategory, PromptKind,
};
use szz_core::io::{self, ClassificationRow, IoError};
use szz_core::metrics::{self, GhostFilter, MetricRow, TTest, UniqueContribution, MIN_FIXES_PER_YEAR};
use szz_core::szz::{self, Algorithm, Prediction};
use szz_core::trace::{tcszz, TraceChain};
use szz_core::{AbnormalCategory, BugFixLink, CommitId, GitError, Repo};

use crate::config::RunConfig;
use crate::stamp::Stamp;
use crate::CliError;

fn repo_err(e: GitError) -> CliError {
    CliError::Repo(e.to_string())
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Write(format!("{}: {e}", path.display()))
}

fn dataset_path(out: &Path) -> PathBuf {
    out.join("dataset.csv")
}

fn predictions_path(out: &Path, a: Algorithm) -> PathBuf {
    out.join("predictions").join(format!("{}.csv", a.as_str()))
}

fn classification_path(out: &Path) -> PathBuf {
    out.join("classification.csv")
}

fn ghosts_path(out: &Path) -> PathBuf {
    out.join("ghosts.json")
}

fn open_repo(cfg: &RunConfig) -> Result<Repo, CliError> {
    Repo::open_at(&cfg.repo, &cfg.until).map_err(repo_err)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| write_err(dir, e))
}

fn written(path: &Path, r: Result<(), IoError>) -> Result<(), CliError> {
    r.map_err(|e| write_err(path, e))
}

fn stamp(cfg: &RunConfig, repo: &Repo, stage: &str, parts: Vec<String>, inputs: &[PathBuf]) -> Result<Stamp, CliError> {
    let mut all = vec![repo.head().id.to_string()];
    all.extend(parts);
    Stamp::new(&cfg.out, stage, &all, inputs).map_err(|e| CliError::Write(e.to_string()))
}

fn finish(stamp: &Stamp, summary: String) -> Result<String, CliError> {
    stamp.record(&summary).map_err(|e| CliError::Write(e.to_string()))?;
    Ok(summary)
}

/// Maps `f` over `items` on `cfg.workers` threads, each with its own
/// repository handle. Results keep the input order.
fn par_map<T, R, F>(cfg: &RunConfig, head: &CommitId, items: &[T], f: F) -> Result<Vec<R>, CliError>
where
    T: Sync,
    R: Send,
    F: Fn(&Repo, &T) -> Result<R, CliError> + Sync,
{
    if items.is_empty() {
        return Ok(Vec::new());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let chunk = items.len().div_ceil(cfg.workers);
    let parts: Vec<Result<Vec<R>, CliError>> = pool.install(|| {
        items
            .par_chunks(chunk)
            .map(|part| {
                let repo = Repo::open_at(&cfg.repo, head.as_str()).map_err(repo_err)?;
                part.iter().map(|item| f(&repo, item)).collect()
            })
            .collect()
    });
    let mut out = Vec::with_capacity(items.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn read_dataset(cfg: &RunConfig, repo: &Repo, missing: fn(String) -> CliError) -> Result<Vec<BugFixLink>, CliError> {
    let path = dataset_path(&cfg.out);
    if !path.is_file() {
        return Err(missing(format!("{} not found; run `szz mine` first", path.display())));
    }
    io::read_dataset(&path, repo).map_err(|e| match e {
        IoError::Git(g) => repo_err(g),
        other => missing(format!("{}: {other}", path.display())),
    })
}

pub fn mine(cfg: &RunConfig) -> Result<String, CliError> {
    let repo = open_repo(cfg)?;
    let outputs = [dataset_path(&cfg.out), cfg.out.join("abnormal.csv"), cfg.out.join("common_commits.txt")];
    let st = stamp(cfg, &repo, "mine", vec![], &[])?;
    if let Some(s) = st.fresh(&outputs) {
        return Ok(s);
    }
    st.clear();
    let mined = szz_core::miner::mine_dataset(&repo, repo.head()).map_err(|e| match e {
        szz_core::miner::MinerError::Git(g) => repo_err(g),
        other => CliError::Repo(other.to_string()),
    })?;
    ensure_dir(&cfg.out)?;
    written(&outputs[0], io::write_dataset(&outputs[0], &mined.dataset))?;
    written(&outputs[1], io::write_abnormal(&outputs[1], &mined.abnormal))?;
    written(&outputs[2], io::write_id_list(&outputs[2], &mined.common_commits))?;
    let count = |c| mined.abnormal.iter().filter(|r| r.category == c).count();
    finish(
        &st,
        format!(
            "mine: {} fixes from {} annotated commits; abnormal {} (partial id {}, not in repository {}), ambiguous {}; {} commits are both fix and inducer",
            mined.dataset.len(),
            mined.candidates,
            count(AbnormalCategory::PartialCommitId) + count(AbnormalCategory::NotInRepository),
            count(AbnormalCategory::PartialCommitId),
            count(AbnormalCategory::NotInRepository),
            count(AbnormalCategory::Ambiguous),
            mined.common_commits.len()
        ),
    )
}

fn predict_fix(
    repo: &Repo,
    link: &BugFixLink,
    cfg: &RunConfig,
) -> Result<(Vec<Prediction>, Vec<TraceChain>), GitError> {
    let fix = &link.fixing_commit;
    let mut ag: Option<Prediction> = None;
    let mut out = Vec::with_capacity(cfg.algorithms.len());
    let mut chains = Vec::new();
    for &a in &cfg.algorithms {
        let p = match a {
            Algorithm::B => szz::bszz(repo, fix)?,
            Algorithm::PYD => szz::szz_pyd(repo, fix)?,
            Algorithm::MA => szz::maszz(repo, fix)?,
            Algorithm::AG | Algorithm::L | Algorithm::R => {
                if ag.is_none() {
                    ag = Some(szz::agszz(repo, fix)?);
                }
                let base = ag.clone().expect("just set");
                match a {
                    Algorithm::L => szz::lszz_from(repo, base)?,
                    Algorithm::R => szz::rszz_from(repo, base)?,
                    _ => base,
                }
            }
            Algorithm::TC => {
                let (p, c) = tcszz(repo, fix, cfg.tc_mode, cfg.similarity_threshold)?;
                chains = c;
                p
            }
        };
        out.push(p);
    }
    Ok((out, chains))
}

pub fn run(cfg: &RunConfig) -> Result<String, CliError> {
    let repo = open_repo(cfg)?;
    let dataset = read_dataset(cfg, &repo, CliError::MissingDataset)?;
    let pred_dir = cfg.out.join("predictions");
    let mut outputs: Vec<PathBuf> = cfg.algorithms.iter().map(|&a| predictions_path(&cfg.out, a)).collect();
    if cfg.attribution {
        outputs.extend(cfg.algorithms.iter().map(|a| pred_dir.join(format!("{}.attribution.json", a.as_str()))));
        if cfg.algorithms.contains(&Algorithm::TC) {
            outputs.push(pred_dir.join("TC.chains.json"));
        }
    }
    let parts = vec![
        cfg.algorithms.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(","),
        cfg.tc_mode.to_string(),
        cfg.similarity_threshold.to_string(),
        cfg.attribution.to_string(),
    ];
    let st = stamp(cfg, &repo, "run", parts, &[dataset_path(&cfg.out)])?;
    if let Some(s) = st.fresh(&outputs) {
        return Ok(s);
    }
    st.clear();
    let head = repo.head().id.clone();
    let per_fix = par_map(cfg, &head, &dataset, |r, link| predict_fix(r, link, cfg).map_err(repo_err))?;
    ensure_dir(&pred_dir)?;
    let mut by_alg: BTreeMap<Algorithm, Vec<Prediction>> = BTreeMap::new();
    let mut chains = Vec::new();
    for (preds, c) in per_fix {
        for p in preds {
            by_alg.entry(p.algorithm).or_default().push(p);
        }
        chains.extend(c);
    }
    let mut counts = Vec::new();
    for &a in &cfg.algorithms {
        let preds = by_alg.remove(&a).unwrap_or_default();
        let path = predictions_path(&cfg.out, a);
        written(&path, io::write_predictions(&path, &preds))?;
        if cfg.attribution {
            let path = pred_dir.join(format!("{}.attribution.json", a.as_str()));
            written(&path, io::write_attribution(&path, &preds))?;
        }
        let nonempty = preds.iter().filter(|p| !p.inducing.is_empty()).count();
        counts.push(format!("{} {nonempty}", a.display_name()));
    }
    if cfg.attribution && cfg.algorithms.contains(&Algorithm::TC) {
        let path = pred_dir.join("TC.chains.json");
        written(&path, io::write_chains(&path, &chains))?;
    }
    finish(
        &st,
        format!("run: {} fixes; fixes with a prediction: {}", dataset.len(), counts.join(", ")),
    )
}

/// Predictions of every algorithm in `algs` whose file exists, keyed by fix.
fn load_predictions(
    out: &Path,
    algs: &[Algorithm],
    missing: fn(String) -> CliError,
) -> Result<BTreeMap<Algorithm, BTreeMap<CommitId, Prediction>>, CliError> {
    let mut all = BTreeMap::new();
    for &a in algs {
        let path = predictions_path(out, a);
        if !path.is_file() {
            return Err(missing(format!("{} not found; run `szz run` first", path.display())));
        }
        let ps = io::read_predictions(&path).map_err(|e| missing(format!("{}: {e}", path.display())))?;
        all.insert(a, ps.into_iter().map(|p| (p.fixing_commit.clone(), p)).collect());
    }
    Ok(all)
}

fn prediction_for(preds: &BTreeMap<CommitId, Prediction>, fix: &CommitId, a: Algorithm) -> Prediction {
    preds.get(fix).cloned().unwrap_or_else(|| Prediction::empty(fix, a))
}

struct Classified {
    rows: Vec<ClassificationRow>,
    prompt: Option<(FailureMode, String)>,
}

fn classify_fix(
    repo: &Repo,
    link: &BugFixLink,
    preds: &BTreeMap<Algorithm, BTreeMap<CommitId, Prediction>>,
    cfg: &RunConfig,
) -> Result<Classified, CliError> {
    let fix = &link.fixing_commit.id;
    let mut rows = Vec::new();
    let mut prompt = None;
    let err = |e: ClassifyError| match e {
        ClassifyError::Git(g) => repo_err(g),
        other => CliError::Repo(other.to_string()),
    };
    for (&a, ps) in preds {
        let p = prediction_for(ps, fix, a);
        let category = categorize_outcome(repo, link, &p).map_err(err)?;
        let mut failure_mode = None;
        if a == Algorithm::B && category == OutcomeCategory::FailureWithoutMG {
            let ev = classify_failure(repo, link, cfg.similarity_threshold).map_err(err)?;
            failure_mode = Some(ev.mode);
            if cfg.emit_prompts && PromptKind::for_mode(ev.mode).is_some() {
                let message = repo.message(fix).map_err(repo_err)?;
                let ctx = prompt_context(repo, &link.fixing_commit, &ev).map_err(repo_err)?;
                let inducers: Vec<CommitId> = link.inducing_ids().into_iter().collect();
                match emit_llm_prompt(ev.mode, &message, &ctx, &inducers) {
                    Ok(text) => prompt = Some((ev.mode, text)),
                    Err(e) => log::warn!("{fix}: no prompt: {e}"),
                }
            }
        }
        rows.push(ClassificationRow {
            fix_sha: fix.clone(),
            algorithm: a,
            category,
            failure_mode,
        });
    }
    Ok(Classified { rows, prompt })
}

pub fn classify(cfg: &RunConfig) -> Result<String, CliError> {
    let repo = open_repo(cfg)?;
    let dataset = read_dataset(cfg, &repo, CliError::MissingDataset)?;
    if !predictions_path(&cfg.out, Algorithm::B).is_file() {
        return Err(CliError::MissingBaseline(format!(
            "{} not found; the failure ladder needs B-SZZ predictions",
            predictions_path(&cfg.out, Algorithm::B).display()
        )));
    }
    let mut algs: Vec<Algorithm> = cfg
        .algorithms
        .iter()
        .copied()
        .filter(|&a| predictions_path(&cfg.out, a).is_file())
        .collect();
    if !algs.contains(&Algorithm::B) {
        algs.insert(0, Algorithm::B);
    }
    let mut inputs = vec![dataset_path(&cfg.out)];
    inputs.extend(algs.iter().map(|&a| predictions_path(&cfg.out, a)));
    let parts = vec![
        algs.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(","),
        cfg.similarity_threshold.to_string(),
        cfg.emit_prompts.to_string(),
    ];
    let outputs = [classification_path(&cfg.out), ghosts_path(&cfg.out)];
    let st = stamp(cfg, &repo, "classify", parts, &inputs)?;
    if let Some(s) = st.fresh(&outputs) {
        return Ok(s);
    }
    st.clear();
    let preds = load_predictions(&cfg.out, &algs, CliError::MissingBaseline)?;
    let head = repo.head().id.clone();
    let per_fix = par_map(cfg, &head, &dataset, |r, link| classify_fix(r, link, &preds, cfg))?;

    let all_commits = repo.list_commits(repo.head()).map_err(repo_err)?;
    let ghosts = ghost_frequencies(&repo, &dataset, &all_commits).map_err(repo_err)?;

    ensure_dir(&cfg.out)?;
    let prompt_dir = cfg.out.join("prompts");
    if cfg.emit_prompts {
        // stale prompts from an earlier run would otherwise linger
        if prompt_dir.exists() {
            fs::remove_dir_all(&prompt_dir).map_err(|e| write_err(&prompt_dir, e))?;
        }
        ensure_dir(&prompt_dir)?;
    }
    let mut rows = Vec::new();
    let mut prompts = 0;
    for (link, c) in dataset.iter().zip(per_fix) {
        rows.extend(c.rows);
        if let Some((mode, text)) = c.prompt {
            let path = prompt_dir.join(format!("{}.{}.prompt.txt", link.fixing_commit.id, mode));
            fs::write(&path, format!("{text}\n")).map_err(|e| write_err(&path, e))?;
            prompts += 1;
        }
    }
    written(&outputs[0], io::write_classification(&outputs[0], &rows))?;
    written(&outputs[1], io::write_json(&outputs[1], &ghosts))?;

    let b_rows: Vec<&ClassificationRow> = rows.iter().filter(|r| r.algorithm == Algorithm::B).collect();
    let cats: Vec<String> = OutcomeCategory::ALL
        .iter()
        .map(|&c| format!("{c} {}", b_rows.iter().filter(|r| r.category == c).count()))
        .collect();
    let modes: Vec<String> = FailureMode::ALL
        .iter()
        .map(|&m| format!("{m} {}", b_rows.iter().filter(|r| r.failure_mode == Some(m)).count()))
        .collect();
    let mut summary = format!(
        "classify: {} fixes; B-SZZ outcomes: {}; failure modes: {}; RMG {}",
        dataset.len(),
        cats.join(", "),
        modes.join(", "),
        ghosts.rmg_over_fixes
    );
    if cfg.emit_prompts {
        summary.push_str(&format!("; {prompts} prompts"));
    }
    finish(&st, summary)
}

#[derive(Serialize)]
struct Comparison {
    algorithm: Algorithm,
    baseline: Algorithm,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<TTest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct GhostReport {
    #[serde(flatten)]
    frequencies: GhostFrequencies,
    without_rmg: Vec<MetricRow>,
    without_amg: Vec<MetricRow>,
    without_both: Vec<MetricRow>,
}

#[derive(Serialize)]
struct Stats {
    year_groups: Vec<(String, usize)>,
    recall_by_year: BTreeMap<Algorithm, Vec<(String, f64)>>,
    comparisons: Vec<Comparison>,
}

#[derive(Serialize)]
struct Report {
    algorithms: Vec<MetricRow>,
    overlap_order: Vec<Algorithm>,
    overlap: Vec<Vec<f64>>,
    unique: BTreeMap<Algorithm, UniqueContribution>,
    categories: BTreeMap<Algorithm, BTreeMap<OutcomeCategory, usize>>,
    failure_modes: BTreeMap<FailureMode, usize>,
    ghosts: GhostReport,
    stats: Stats,
}

pub fn report(cfg: &RunConfig) -> Result<String, CliError> {
    let repo = open_repo(cfg)?;
    let dataset = read_dataset(cfg, &repo, CliError::MissingInputs)?;
    let mut inputs = vec![dataset_path(&cfg.out), classification_path(&cfg.out), ghosts_path(&cfg.out)];
    inputs.extend(cfg.algorithms.iter().map(|&a| predictions_path(&cfg.out, a)));
    if let Some(missing) = inputs.iter().find(|p| !p.is_file()) {
        return Err(CliError::MissingInputs(format!("{} not found", missing.display())));
    }
    let outputs = [cfg.out.join("report.json"), cfg.out.join("table.csv")];
    let parts = vec![cfg.algorithms.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(",")];
    let st = stamp(cfg, &repo, "report", parts, &inputs)?;
    if let Some(s) = st.fresh(&outputs) {
        return Ok(s);
    }
    st.clear();

    let loaded = load_predictions(&cfg.out, &cfg.algorithms, CliError::MissingInputs)?;
    // one prediction per fix, in dataset order
    let preds: BTreeMap<Algorithm, Vec<Prediction>> = loaded
        .iter()
        .map(|(&a, ps)| {
            let v = dataset.iter().map(|l| prediction_for(ps, &l.fixing_commit.id, a)).collect();
            (a, v)
        })
        .collect();
    let rows_in = io::read_classification(&classification_path(&cfg.out))
        .map_err(|e| CliError::MissingInputs(e.to_string()))?;
    let frequencies: GhostFrequencies =
        io::read_json(&ghosts_path(&cfg.out)).map_err(|e| CliError::MissingInputs(e.to_string()))?;

    let algorithms: Vec<MetricRow> = preds.iter().map(|(&a, ps)| metrics::aggregate(a, &dataset, ps)).collect();
    let comp = metrics::complementarity(&dataset, &preds);
    let mut failure_modes = BTreeMap::new();
    for r in rows_in.iter().filter(|r| r.algorithm == Algorithm::B) {
        if let Some(m) = r.failure_mode {
            *failure_modes.entry(m).or_insert(0) += 1;
        }
    }
    let rmg: BTreeSet<CommitId> = frequencies.rmg_fixes.iter().cloned().collect();
    let amg: BTreeSet<CommitId> = frequencies.amg_inducers.iter().cloned().collect();
    let ablate = |rmg_on, amg_on| metrics::ghost_ablation(&dataset, &preds, &rmg, &amg, GhostFilter { rmg: rmg_on, amg: amg_on });
    let ghosts = GhostReport {
        without_rmg: ablate(true, false),
        without_amg: ablate(false, true),
        without_both: ablate(true, true),
        frequencies,
    };

    let groups = metrics::group_by_year(&dataset, MIN_FIXES_PER_YEAR);
    let recall_by_year: BTreeMap<Algorithm, Vec<(String, f64)>> = preds
        .iter()
        .map(|(&a, ps)| (a, metrics::recall_by_year(&groups, a, ps)))
        .collect();
    let mut comparisons = Vec::new();
    if let Some(base) = recall_by_year.get(&Algorithm::B) {
        let base: Vec<f64> = base.iter().map(|(_, r)| *r).collect();
        for (&a, series) in recall_by_year.iter().filter(|(a, _)| **a != Algorithm::B) {
            let s: Vec<f64> = series.iter().map(|(_, r)| *r).collect();
            let (result, error) = match metrics::compare_recall_series(&s, &base) {
                Ok(t) => (Some(t), None),
                Err(e) => (None, Some(e.to_string())),
            };
            comparisons.push(Comparison {
                algorithm: a,
                baseline: Algorithm::B,
                result,
                error,
            });
        }
    }
    let report = Report {
        overlap_order: comp.algorithms.clone(),
        overlap: comp.overlap.clone(),
        unique: comp.unique.clone(),
        categories: io::category_counts(&rows_in),
        failure_modes,
        ghosts,
        stats: Stats {
            year_groups: groups.iter().map(|(l, g)| (l.clone(), g.len())).collect(),
            recall_by_year,
            comparisons,
        },
        algorithms,
    };
    ensure_dir(&cfg.out)?;
    written(&outputs[0], io::write_json(&outputs[0], &report))?;
    let mut table = String::from("Algorithm,Precision,Recall,F1\n");
    for r in &report.algorithms {
        table.push_str(&format!("{},{:.4},{:.4},{:.4}\n", r.algorithm.display_name(), r.precision, r.recall, r.f1));
    }
    fs::write(&outputs[1], table).map_err(|e| write_err(&outputs[1], e))?;
    let best = report
        .algorithms
        .iter()
        .max_by(|a, b| a.f1.total_cmp(&b.f1).then(b.algorithm.cmp(&a.algorithm)))
        .map(|r| format!("; best F1 {} ({:.4})", r.algorithm.display_name(), r.f1))
        .unwrap_or_default();
    finish(&st, format!("report: {} fixes, {} algorithms{best}", dataset.len(), report.algorithms.len()))
}
