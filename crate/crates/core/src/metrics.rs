//! Recall, precision and F1 over a ground-truth dataset, complementarity
//! between variants, ghost ablation and the recall comparison statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{DateTime, Datelike};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::git::CommitId;
use crate::miner::BugFixLink;
use crate::szz::{Algorithm, Prediction};

/// Years with fewer fixes than this are folded into the following year
/// when they lead the series.
pub const MIN_FIXES_PER_YEAR: usize = 200;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("prediction is for {predicted}, ground truth for {truth}")]
    MismatchedFix { truth: CommitId, predicted: CommitId },
    #[error("need at least two values per series (got {a} and {b})")]
    TooFewSamples { a: usize, b: usize },
    #[error("both series have zero variance; the effect size is undefined")]
    DegenerateVariance,
}

/// Sum in a fixed pairwise order, independent of how the input was
/// produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2..=8 => xs.iter().fold(0.0, |a, b| a + b),
        n => {
            let (l, r) = xs.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        pairwise_sum(xs) / xs.len() as f64
    }
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixScore {
    pub recall: f64,
    /// Undefined for an empty prediction.
    pub precision: Option<f64>,
}

pub fn per_fix_scores(truth: &BugFixLink, predicted: &Prediction) -> Result<FixScore, MetricsError> {
    if truth.fixing_commit.id != predicted.fixing_commit {
        return Err(MetricsError::MismatchedFix {
            truth: truth.fixing_commit.id.clone(),
            predicted: predicted.fixing_commit.clone(),
        });
    }
    Ok(score_sets(&truth.inducing_ids(), &predicted.inducing))
}

fn score_sets(truth: &BTreeSet<CommitId>, predicted: &BTreeSet<CommitId>) -> FixScore {
    let hits = truth.intersection(predicted).count() as f64;
    FixScore {
        recall: if truth.is_empty() { 0.0 } else { hits / truth.len() as f64 },
        precision: (!predicted.is_empty()).then(|| hits / predicted.len() as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub algorithm: Algorithm,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_fixes_recall: usize,
    pub n_fixes_precision: usize,
}

fn index(predictions: &[Prediction]) -> HashMap<&CommitId, &Prediction> {
    predictions.iter().map(|p| (&p.fixing_commit, p)).collect()
}

/// Means over the dataset: recall over every fix (a missing or empty
/// prediction scores 0), precision over fixes with a non-empty prediction.
pub fn aggregate(algorithm: Algorithm, dataset: &[BugFixLink], predictions: &[Prediction]) -> MetricRow {
    let by_fix = index(predictions);
    let empty = BTreeSet::new();
    let mut recalls = Vec::with_capacity(dataset.len());
    let mut precisions = Vec::new();
    for link in dataset {
        let predicted = by_fix.get(&link.fixing_commit.id).map_or(&empty, |p| &p.inducing);
        let s = score_sets(&link.inducing_ids(), predicted);
        recalls.push(s.recall);
        precisions.extend(s.precision);
    }
    let (p, r) = (mean(&precisions), mean(&recalls));
    MetricRow {
        algorithm,
        precision: p,
        recall: r,
        f1: f1(p, r),
        n_fixes_recall: recalls.len(),
        n_fixes_precision: precisions.len(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GhostFilter {
    pub rmg: bool,
    pub amg: bool,
}

/// The dataset with remove-mapping-ghost fixes and/or add-mapping-ghost
/// inducers dropped; fixes left without inducers are dropped too.
pub fn filter_ghosts(
    dataset: &[BugFixLink],
    rmg_fixes: &BTreeSet<CommitId>,
    amg_inducers: &BTreeSet<CommitId>,
    filter: GhostFilter,
) -> Vec<BugFixLink> {
    dataset
        .iter()
        .filter(|l| !(filter.rmg && rmg_fixes.contains(&l.fixing_commit.id)))
        .filter_map(|l| {
            let mut l = l.clone();
            if filter.amg {
                l.inducing_commits.retain(|c| !amg_inducers.contains(&c.id));
            }
            (!l.inducing_commits.is_empty()).then_some(l)
        })
        .collect()
}

pub fn ghost_ablation(
    dataset: &[BugFixLink],
    predictions: &BTreeMap<Algorithm, Vec<Prediction>>,
    rmg_fixes: &BTreeSet<CommitId>,
    amg_inducers: &BTreeSet<CommitId>,
    filter: GhostFilter,
) -> Vec<MetricRow> {
    let kept = filter_ghosts(dataset, rmg_fixes, amg_inducers, filter);
    predictions
        .iter()
        .map(|(&a, ps)| aggregate(a, &kept, ps))
        .collect()
}

/// (fix, inducer) pairs an algorithm got right.
pub type CorrectSet = BTreeSet<(CommitId, CommitId)>;

pub fn correct_pairs(dataset: &[BugFixLink], predictions: &[Prediction]) -> CorrectSet {
    let by_fix = index(predictions);
    let mut out = BTreeSet::new();
    for link in dataset {
        if let Some(p) = by_fix.get(&link.fixing_commit.id) {
            for c in &link.inducing_commits {
                if p.inducing.contains(&c.id) {
                    out.insert((link.fixing_commit.id.clone(), c.id.clone()));
                }
            }
        }
    }
    out
}

/// Intersection over union of two correct sets; two empty sets overlap
/// fully.
pub fn overlap(a: &CorrectSet, b: &CorrectSet) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        log::debug!("overlap of two empty correct sets taken as 1.0");
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniqueContribution {
    pub numerator: usize,
    pub denominator: usize,
    pub ratio: f64,
}

/// Share of `correct_i ∪ others` that only `correct_i` found.
pub fn unique_contribution(correct_i: &CorrectSet, others: &CorrectSet) -> UniqueContribution {
    let numerator = correct_i.difference(others).count();
    let denominator = correct_i.union(others).count();
    UniqueContribution {
        numerator,
        denominator,
        ratio: if denominator == 0 { 0.0 } else { numerator as f64 / denominator as f64 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Complementarity {
    pub algorithms: Vec<Algorithm>,
    pub overlap: Vec<Vec<f64>>,
    pub unique: BTreeMap<Algorithm, UniqueContribution>,
}

pub fn complementarity(dataset: &[BugFixLink], predictions: &BTreeMap<Algorithm, Vec<Prediction>>) -> Complementarity {
    let algorithms: Vec<Algorithm> = predictions.keys().copied().collect();
    let correct: Vec<CorrectSet> = predictions.values().map(|p| correct_pairs(dataset, p)).collect();
    let n = algorithms.len();
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = overlap(&correct[i], &correct[j]);
            matrix[i][j] = v;
            matrix[j][i] = v;
        }
    }
    let mut unique = BTreeMap::new();
    for (i, &a) in algorithms.iter().enumerate() {
        let others: CorrectSet = correct
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, s)| s.iter().cloned())
            .collect();
        unique.insert(a, unique_contribution(&correct[i], &others));
    }
    Complementarity {
        algorithms,
        overlap: matrix,
        unique,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t_statistic: f64,
    pub p_value: f64,
    pub cohens_d: f64,
    pub degrees_of_freedom: f64,
}

fn sample_variance(xs: &[f64], m: f64) -> f64 {
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (xs.len() - 1) as f64
}

/// Sample skewness (the biased moment estimator).
pub fn skewness(xs: &[f64]) -> Option<f64> {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = pairwise_sum(&xs.iter().map(|x| (x - m).powi(2)).collect::<Vec<_>>()) / n;
    let m3 = pairwise_sum(&xs.iter().map(|x| (x - m).powi(3)).collect::<Vec<_>>()) / n;
    (m2 > 0.0).then(|| m3 / m2.powf(1.5))
}

/// Student's two-sample t-test with pooled variance, two-sided p-value and
/// Cohen's d on the pooled standard deviation.
pub fn compare_recall_series(a: &[f64], b: &[f64]) -> Result<TTest, MetricsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MetricsError::TooFewSamples { a: a.len(), b: b.len() });
    }
    for (name, xs) in [("first", a), ("second", b)] {
        if let Some(s) = skewness(xs).filter(|s| s.abs() > 2.0) {
            log::warn!("{name} recall series is strongly skewed ({s:.2}); the t-test assumes normality");
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let pooled_var = ((na - 1.0) * sample_variance(a, ma) + (nb - 1.0) * sample_variance(b, mb)) / (na + nb - 2.0);
    if pooled_var == 0.0 {
        return Err(MetricsError::DegenerateVariance);
    }
    let sd = pooled_var.sqrt();
    let t = (ma - mb) / (sd * (1.0 / na + 1.0 / nb).sqrt());
    let df = na + nb - 2.0;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(TTest {
        t_statistic: t,
        p_value: p,
        cohens_d: (ma - mb) / sd,
        degrees_of_freedom: df,
    })
}

/// UTC calendar year of a unix timestamp.
pub fn year_of(timestamp: i64) -> i32 {
    DateTime::from_timestamp(timestamp, 0).map_or(1970, |d| d.year())
}

/// Fixes grouped by the year of the fixing commit. Leading years with
/// fewer than `min_fixes` fixes are merged into the next year; the group is
/// labelled with its first and last year (`2013-2014`).
pub fn group_by_year(dataset: &[BugFixLink], min_fixes: usize) -> Vec<(String, Vec<BugFixLink>)> {
    let mut years: BTreeMap<i32, Vec<BugFixLink>> = BTreeMap::new();
    for l in dataset {
        years.entry(year_of(l.fixing_commit.timestamp)).or_default().push(l.clone());
    }
    let mut out = Vec::new();
    let mut pending: Option<(i32, Vec<BugFixLink>)> = None;
    let mut leading = true;
    let last_year = years.keys().next_back().copied();
    for (year, links) in years {
        let (first, mut acc) = pending.take().unwrap_or((year, Vec::new()));
        acc.extend(links);
        if leading && acc.len() < min_fixes {
            pending = Some((first, acc));
            continue;
        }
        leading = false;
        let label = if first == year { year.to_string() } else { format!("{first}-{year}") };
        out.push((label, acc));
    }
    if let (Some((first, acc)), Some(last)) = (pending, last_year) {
        let label = if first == last { first.to_string() } else { format!("{first}-{last}") };
        out.push((label, acc));
    }
    out
}

/// Recall of one algorithm within each year group.
pub fn recall_by_year(groups: &[(String, Vec<BugFixLink>)], algorithm: Algorithm, predictions: &[Prediction]) -> Vec<(String, f64)> {
    groups
        .iter()
        .map(|(label, links)| (label.clone(), aggregate(algorithm, links, predictions).recall))
        .collect()
}
