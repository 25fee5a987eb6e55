//! Run configuration: a flat `key = value` file overridden by flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use szz_core::trace::{TcMode, DEFAULT_THRESHOLD};
use szz_core::Algorithm;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub repo: PathBuf,
    pub until: String,
    pub algorithms: Vec<Algorithm>,
    pub tc_mode: TcMode,
    pub similarity_threshold: f64,
    pub emit_prompts: bool,
    pub attribution: bool,
    pub workers: usize,
    pub out: PathBuf,
}

/// Settings as given, before defaults. Flags and the config file both fill
/// one of these.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub repo: Option<PathBuf>,
    pub until: Option<String>,
    pub algorithms: Option<String>,
    pub tc_mode: Option<String>,
    pub blame_count: Option<i32>,
    pub similarity_threshold: Option<f64>,
    pub emit_prompts: Option<bool>,
    pub attribution: Option<bool>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// Fields set in `flags` win over `self`.
    pub fn merge(self, flags: Overrides) -> Overrides {
        Overrides {
            repo: flags.repo.or(self.repo),
            until: flags.until.or(self.until),
            algorithms: flags.algorithms.or(self.algorithms),
            tc_mode: flags.tc_mode.or(self.tc_mode),
            blame_count: flags.blame_count.or(self.blame_count),
            similarity_threshold: flags.similarity_threshold.or(self.similarity_threshold),
            emit_prompts: flags.emit_prompts.or(self.emit_prompts),
            attribution: flags.attribution.or(self.attribution),
            workers: flags.workers.or(self.workers),
            out: flags.out.or(self.out),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(usage(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| usage(format!("{key}: bad value {v:?}")))
}

/// Parses the config file format. Blank lines and `#` comments are
/// skipped; keys may use `-` or `_`.
pub fn parse_config(text: &str) -> Result<Overrides, CliError> {
    let mut seen = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key = value", n + 1)))?;
        let key = k.trim().replace('-', "_");
        if seen.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(usage(format!("config line {}: {key} given twice", n + 1)));
        }
    }
    let mut o = Overrides::default();
    for (key, v) in seen {
        let v = v.as_str();
        match key.as_str() {
            "repo" => o.repo = Some(v.into()),
            "until" => o.until = Some(v.into()),
            "algos" | "algorithms" => o.algorithms = Some(v.into()),
            "tc_mode" => o.tc_mode = Some(v.into()),
            "blame_count" => o.blame_count = Some(parse_num(&key, v)?),
            "similarity_threshold" => o.similarity_threshold = Some(parse_num(&key, v)?),
            "emit_prompts" => o.emit_prompts = Some(parse_bool(&key, v)?),
            "attribution" => o.attribution = Some(parse_bool(&key, v)?),
            "workers" => o.workers = Some(parse_num(&key, v)?),
            "out" => o.out = Some(v.into()),
            _ => return Err(usage(format!("unknown config key {key:?}"))),
        }
    }
    Ok(o)
}

pub fn load_config(path: &Path) -> Result<Overrides, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>, CliError> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(Algorithm::ALL.to_vec());
    }
    let mut out: Vec<Algorithm> = Vec::new();
    for tok in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let a: Algorithm = tok.parse().map_err(|e| usage(format!("{e}")))?;
        if !out.contains(&a) {
            out.push(a);
        }
    }
    if out.is_empty() {
        return Err(usage("no algorithms selected"));
    }
    out.sort();
    Ok(out)
}

impl RunConfig {
    pub fn resolve(o: Overrides) -> Result<Self, CliError> {
        let repo = o.repo.ok_or_else(|| usage("no repository given (--repo or repo= in the config)"))?;
        let algorithms = match &o.algorithms {
            Some(s) => parse_algorithms(s)?,
            None => Algorithm::ALL.to_vec(),
        };
        let mut tc_mode = match &o.tc_mode {
            Some(s) => s.parse::<TcMode>().map_err(|e| usage(e.to_string()))?,
            None => TcMode::UniqueCommits,
        };
        if let Some(k) = o.blame_count {
            if k == 0 || k < -1 {
                return Err(usage(format!("blame count must be -1 or positive, got {k}")));
            }
            tc_mode = TcMode::CustomBlame(k);
        }
        let similarity_threshold = o.similarity_threshold.unwrap_or(DEFAULT_THRESHOLD);
        if !(similarity_threshold > 0.0 && similarity_threshold <= 1.0) {
            return Err(usage(format!("similarity threshold must be in (0, 1], got {similarity_threshold}")));
        }
        let workers = o
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if workers == 0 {
            return Err(usage("workers must be at least 1"));
        }
        Ok(RunConfig {
            repo,
            until: o.until.unwrap_or_else(|| "HEAD".into()),
            algorithms,
            tc_mode,
            similarity_threshold,
            emit_prompts: o.emit_prompts.unwrap_or(false),
            attribution: o.attribution.unwrap_or(false),
            workers,
            out: o.out.unwrap_or_else(|| "szz-out".into()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let file = parse_config("# run\nrepo = /a\nalgos = B,AG\nworkers=2\nemit-prompts = yes\n").unwrap();
        let flags = Overrides {
            algorithms: Some("R".into()),
            ..Default::default()
        };
        let c = RunConfig::resolve(file.merge(flags)).unwrap();
        assert_eq!(c.repo, PathBuf::from("/a"));
        assert_eq!(c.algorithms, vec![Algorithm::R]);
        assert_eq!(c.workers, 2);
        assert!(c.emit_prompts);
        assert_eq!(c.tc_mode, TcMode::UniqueCommits);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(parse_config("nope = 1\n").is_err());
        assert!(parse_config("repo\n").is_err());
        assert!(parse_config("workers = x\n").is_err());
        assert!(parse_config("repo = a\nrepo = b\n").is_err());
        let base = || Overrides {
            repo: Some("r".into()),
            ..Default::default()
        };
        for bad in [
            Overrides { similarity_threshold: Some(0.0), ..base() },
            Overrides { similarity_threshold: Some(1.5), ..base() },
            Overrides { blame_count: Some(0), ..base() },
            Overrides { workers: Some(0), ..base() },
            Overrides { algorithms: Some(",".into()), ..base() },
            Overrides::default(),
        ] {
            assert!(RunConfig::resolve(bad).is_err());
        }
    }

    #[test]
    fn algorithm_lists() {
        assert_eq!(parse_algorithms("all").unwrap().len(), 7);
        assert_eq!(parse_algorithms("TC, B-SZZ,B").unwrap(), vec![Algorithm::B, Algorithm::TC]);
        assert!(parse_algorithms("B,X").is_err());
    }

    #[test]
    fn blame_count_sets_mode() {
        let c = RunConfig::resolve(Overrides {
            repo: Some("r".into()),
            blame_count: Some(3),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(c.tc_mode, TcMode::CustomBlame(3));
    }
}
