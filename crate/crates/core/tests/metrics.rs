use szz_core::metrics::{self, compare_recall_series, group_by_year, recall_by_year, MetricsError, MIN_FIXES_PER_YEAR};
use szz_core::szz::{Algorithm, Prediction};
use szz_core::{BugFixLink, CommitId, CommitRef};

fn commit(n: u32, timestamp: i64) -> CommitRef {
    CommitRef {
        id: CommitId::new(format!("{n:040x}")).unwrap(),
        timestamp,
        parent_count: 1,
        subject: String::new(),
    }
}

/// Jan 1st 00:00 UTC plus a day offset.
fn in_year(year: i32, day: i64) -> i64 {
    let days_before: i64 = (1970..year).map(|y| if y % 4 == 0 && (y % 100 != 0 || y % 400 == 0) { 366 } else { 365 }).sum();
    (days_before + day) * 86_400
}

fn dataset(per_year: &[(i32, usize)]) -> Vec<BugFixLink> {
    let mut n = 1;
    let mut out = Vec::new();
    for &(year, count) in per_year {
        for i in 0..count {
            let fix = commit(n, in_year(year, (i % 300) as i64));
            let ind = commit(n + 1_000_000, in_year(year, 0) - 1);
            n += 1;
            out.push(BugFixLink {
                fixing_commit: fix,
                inducing_commits: vec![ind],
                raw_refs: Vec::new(),
            });
        }
    }
    out
}

#[test]
fn sparse_leading_years_are_merged() {
    let d = dataset(&[(2013, 50), (2014, 120), (2015, 40), (2016, 300), (2017, 10)]);
    let groups = group_by_year(&d, MIN_FIXES_PER_YEAR);
    let summary: Vec<(&str, usize)> = groups.iter().map(|(l, g)| (l.as_str(), g.len())).collect();
    assert_eq!(summary, [("2013-2015", 210), ("2016", 300), ("2017", 10)]);
}

#[test]
fn all_sparse_years_form_one_group() {
    let d = dataset(&[(2020, 5), (2022, 7)]);
    let groups = group_by_year(&d, MIN_FIXES_PER_YEAR);
    assert_eq!(groups.len(), 1);
    assert_eq!(groups[0].0, "2020-2022");
}

#[test]
fn recall_per_year_group() {
    let d = dataset(&[(2019, 200), (2020, 200)]);
    // predict correctly for every 2019 fix and every other 2020 fix
    let preds: Vec<Prediction> = d
        .iter()
        .enumerate()
        .map(|(i, l)| Prediction {
            fixing_commit: l.fixing_commit.id.clone(),
            algorithm: Algorithm::B,
            inducing: if i < 200 || i % 2 == 0 { l.inducing_ids() } else { Default::default() },
            attribution: Vec::new(),
        })
        .collect();
    let groups = group_by_year(&d, MIN_FIXES_PER_YEAR);
    let r = recall_by_year(&groups, Algorithm::B, &preds);
    assert_eq!(r, [("2019".to_string(), 1.0), ("2020".to_string(), 0.5)]);
}

#[test]
fn statistics_edge_cases() {
    assert_eq!(compare_recall_series(&[0.5], &[0.1, 0.2]), Err(MetricsError::TooFewSamples { a: 1, b: 2 }));
    assert_eq!(compare_recall_series(&[0.5, 0.5], &[0.2, 0.2]), Err(MetricsError::DegenerateVariance));
    let same = compare_recall_series(&[0.1, 0.3], &[0.3, 0.1]).unwrap();
    assert_eq!((same.t_statistic, same.cohens_d), (0.0, 0.0));
    assert!((same.p_value - 1.0).abs() < 1e-12);
    let far = compare_recall_series(&[0.90, 0.91, 0.92, 0.93], &[0.10, 0.11, 0.12, 0.13]).unwrap();
    assert!(far.p_value > 0.0 && far.p_value < 1e-9);
    assert_eq!(far.degrees_of_freedom, 6.0);
}

#[test]
fn skewness_sign() {
    assert!(metrics::skewness(&[1.0, 1.0, 1.0, 10.0]).unwrap() > 1.0);
    assert!(metrics::skewness(&[1.0, 10.0, 10.0, 10.0]).unwrap() < -1.0);
    assert_eq!(metrics::skewness(&[2.0, 2.0]), None);
}
