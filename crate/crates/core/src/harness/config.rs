//! Flat key-value experiment configuration.
//!
//! Files hold one `key = value` pair per line with dotted keys
//! (`solver.grad_tol = 1e-6`), `#` comments, and comma-separated lists for
//! grids. CLI overrides arrive as the same `key=value` strings and win over
//! the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::solver::SolverConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Z2Sweep,
    SbmSweep,
    ExactRecovery,
    Tails,
    OracleAudit,
    SolveOne,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "z2-sweep" => ExperimentKind::Z2Sweep,
            "sbm-sweep" => ExperimentKind::SbmSweep,
            "exact-recovery" => ExperimentKind::ExactRecovery,
            "tails" => ExperimentKind::Tails,
            "oracle-audit" => ExperimentKind::OracleAudit,
            "solve-one" => ExperimentKind::SolveOne,
            other => {
                return Err(Error::Config(format!(
                    "unknown experiment '{other}' (expected z2-sweep, sbm-sweep, \
                     exact-recovery, tails, oracle-audit, or solve-one)"
                )))
            }
        })
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ExperimentKind::Z2Sweep => "z2-sweep",
            ExperimentKind::SbmSweep => "sbm-sweep",
            ExperimentKind::ExactRecovery => "exact-recovery",
            ExperimentKind::Tails => "tails",
            ExperimentKind::OracleAudit => "oracle-audit",
            ExperimentKind::SolveOne => "solve-one",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Optional solver overrides; unset fields fall back to the
/// dimension-scaled defaults of [`SolverConfig::for_dim`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolverOverrides {
    pub grad_tol: Option<f64>,
    pub hess_tol: Option<f64>,
    pub max_outer: Option<usize>,
    pub tcg_max: Option<usize>,
    pub trust_init: Option<f64>,
    pub trust_max: Option<f64>,
}

impl SolverOverrides {
    pub fn resolve(&self, n: usize, seed: u64) -> SolverConfig {
        let mut cfg = SolverConfig::for_dim(n).with_seed(seed);
        if let Some(v) = self.grad_tol {
            cfg.grad_tol = v;
        }
        if let Some(v) = self.hess_tol {
            cfg.hess_tol = v;
        }
        if let Some(v) = self.max_outer {
            cfg.max_outer = v;
        }
        if let Some(v) = self.tcg_max {
            cfg.tcg_max = v;
        }
        if let Some(v) = self.trust_init {
            cfg.trust_init = v;
        }
        if let Some(v) = self.trust_max {
            cfg.trust_max = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailsModel {
    Wigner,
    Sbm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailsSettings {
    pub model: TailsModel,
    pub t_values: Vec<f64>,
    pub with_sdp: bool,
}

impl Default for TailsSettings {
    fn default() -> Self {
        TailsSettings {
            model: TailsModel::Wigner,
            t_values: vec![2.0, 4.0, 6.0],
            with_sdp: false,
        }
    }
}

/// Aggregate thresholds checked after a sweep; violations map to the
/// assertion-failure exit code in the CLI.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Asserts {
    pub min_correlation: Option<f64>,
    pub min_exact_rate: Option<f64>,
    pub max_exact_rate: Option<f64>,
    pub min_certified_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub lambda_grid: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    /// `(a, b)` pairs for the graph model.
    pub ab_grid: Vec<(f64, f64)>,
    pub trials: usize,
    pub restarts: usize,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    /// 0 = honor `RANKTWO_WORKERS`, then the library default.
    pub workers: usize,
    pub solver: SolverOverrides,
    pub tails: TailsSettings,
    pub asserts: Asserts,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, n: usize) -> Self {
        ExperimentConfig {
            experiment,
            n,
            lambda_grid: Vec::new(),
            sigma_grid: Vec::new(),
            ab_grid: Vec::new(),
            trials: 1,
            restarts: 1,
            master_seed: 0,
            output: None,
            format: OutputFormat::Csv,
            workers: 0,
            solver: SolverOverrides::default(),
            tails: TailsSettings::default(),
            asserts: Asserts::default(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut map = parse_key_values(&text)?;
        Self::from_map(&mut map)
    }

    pub fn from_str_config(text: &str) -> Result<Self> {
        let mut map = parse_key_values(text)?;
        Self::from_map(&mut map)
    }

    /// Apply `key=value` overrides on top of an existing config.
    pub fn apply_overrides(&mut self, pairs: &[(String, String)]) -> Result<()> {
        let mut map = self.to_key_values();
        for (k, v) in pairs {
            map.insert(k.clone(), v.clone());
        }
        *self = Self::from_map(&mut map)?;
        Ok(())
    }

    fn from_map(map: &mut BTreeMap<String, String>) -> Result<Self> {
        let experiment: ExperimentKind = take_req(map, "experiment")?.parse()?;
        let n = parse_as(map, "n")?.ok_or_else(|| Error::Config("missing key 'n'".into()))?;
        let mut cfg = ExperimentConfig::new(experiment, n);
        if let Some(v) = parse_list(map, "z2.lambda")? {
            cfg.lambda_grid = v;
        }
        if let Some(v) = parse_list(map, "z2.sigma")? {
            cfg.sigma_grid = v;
        }
        let a_list = parse_list(map, "sbm.a")?;
        let b_list = parse_list(map, "sbm.b")?;
        match (a_list, b_list) {
            (Some(a), Some(b)) => {
                if a.len() != b.len() {
                    return Err(Error::Config(format!(
                        "sbm.a has {} entries but sbm.b has {}",
                        a.len(),
                        b.len()
                    )));
                }
                cfg.ab_grid = a.into_iter().zip(b).collect();
            }
            (None, None) => {}
            _ => return Err(Error::Config("sbm.a and sbm.b must be given together".into())),
        }
        if let Some(v) = parse_as(map, "trials")? {
            cfg.trials = v;
        }
        if let Some(v) = parse_as(map, "restarts")? {
            cfg.restarts = v;
        }
        if let Some(v) = parse_as(map, "master_seed")? {
            cfg.master_seed = v;
        }
        if let Some(v) = map.remove("output") {
            cfg.output = Some(PathBuf::from(v));
        }
        if let Some(v) = map.remove("format") {
            cfg.format = match v.as_str() {
                "csv" => OutputFormat::Csv,
                "json" => OutputFormat::Json,
                other => return Err(Error::Config(format!("unknown format '{other}'"))),
            };
        }
        if let Some(v) = parse_as(map, "workers")? {
            cfg.workers = v;
        }
        cfg.solver.grad_tol = parse_as(map, "solver.grad_tol")?;
        cfg.solver.hess_tol = parse_as(map, "solver.hess_tol")?;
        cfg.solver.max_outer = parse_as(map, "solver.max_outer")?;
        cfg.solver.tcg_max = parse_as(map, "solver.tcg_max")?;
        cfg.solver.trust_init = parse_as(map, "solver.trust_init")?;
        cfg.solver.trust_max = parse_as(map, "solver.trust_max")?;
        if let Some(v) = map.remove("tails.model") {
            cfg.tails.model = match v.as_str() {
                "wigner" => TailsModel::Wigner,
                "sbm" => TailsModel::Sbm,
                other => return Err(Error::Config(format!("unknown tails.model '{other}'"))),
            };
        }
        if let Some(v) = parse_list(map, "tails.t_values")? {
            cfg.tails.t_values = v;
        }
        if let Some(v) = parse_as::<bool>(map, "tails.with_sdp")? {
            cfg.tails.with_sdp = v;
        }
        cfg.asserts.min_correlation = parse_as(map, "assert.min_correlation")?;
        cfg.asserts.min_exact_rate = parse_as(map, "assert.min_exact_rate")?;
        cfg.asserts.max_exact_rate = parse_as(map, "assert.max_exact_rate")?;
        cfg.asserts.min_certified_rate = parse_as(map, "assert.min_certified_rate")?;
        if let Some(stray) = map.keys().next() {
            return Err(Error::Config(format!("unknown config key '{stray}'")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.restarts == 0 {
            return Err(Error::Config("trials and restarts must be >= 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be >= 1".into()));
        }
        match self.experiment {
            ExperimentKind::Z2Sweep | ExperimentKind::ExactRecovery | ExperimentKind::SolveOne => {
                if self.lambda_grid.is_empty() && self.sigma_grid.is_empty() {
                    return Err(Error::Config(
                        "z2 experiments need a z2.lambda or z2.sigma grid".into(),
                    ));
                }
                if !self.lambda_grid.is_empty() && !self.sigma_grid.is_empty() {
                    return Err(Error::Config(
                        "give either z2.lambda or z2.sigma, not both".into(),
                    ));
                }
                if self.experiment == ExperimentKind::SolveOne
                    && self.lambda_grid.len() + self.sigma_grid.len() != 1
                {
                    return Err(Error::Config("solve-one takes exactly one grid point".into()));
                }
            }
            ExperimentKind::SbmSweep => {
                if self.ab_grid.is_empty() {
                    return Err(Error::Config("sbm-sweep needs sbm.a and sbm.b grids".into()));
                }
            }
            ExperimentKind::Tails => {
                if self.tails.t_values.is_empty() && matches!(self.tails.model, TailsModel::Wigner)
                {
                    return Err(Error::Config("tails needs tails.t_values".into()));
                }
                if matches!(self.tails.model, TailsModel::Sbm) && self.ab_grid.len() != 1 {
                    return Err(Error::Config(
                        "sbm tails need exactly one (sbm.a, sbm.b) pair".into(),
                    ));
                }
            }
            ExperimentKind::OracleAudit => {
                if self.n > crate::oracle::SOC_CAP {
                    return Err(Error::Config(format!(
                        "oracle-audit caps n at {}",
                        crate::oracle::SOC_CAP
                    )));
                }
                if self.sigma_grid.len() != 1 {
                    return Err(Error::Config(
                        "oracle-audit takes exactly one z2.sigma value".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Flatten back to the file representation (used by the run manifest).
    pub fn to_key_values(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("experiment".into(), self.experiment.to_string());
        m.insert("n".into(), self.n.to_string());
        if !self.lambda_grid.is_empty() {
            m.insert("z2.lambda".into(), join_list(&self.lambda_grid));
        }
        if !self.sigma_grid.is_empty() {
            m.insert("z2.sigma".into(), join_list(&self.sigma_grid));
        }
        if !self.ab_grid.is_empty() {
            let a: Vec<f64> = self.ab_grid.iter().map(|p| p.0).collect();
            let b: Vec<f64> = self.ab_grid.iter().map(|p| p.1).collect();
            m.insert("sbm.a".into(), join_list(&a));
            m.insert("sbm.b".into(), join_list(&b));
        }
        m.insert("trials".into(), self.trials.to_string());
        m.insert("restarts".into(), self.restarts.to_string());
        m.insert("master_seed".into(), self.master_seed.to_string());
        if let Some(p) = &self.output {
            m.insert("output".into(), p.display().to_string());
        }
        m.insert(
            "format".into(),
            match self.format {
                OutputFormat::Csv => "csv".into(),
                OutputFormat::Json => "json".into(),
            },
        );
        if self.workers > 0 {
            m.insert("workers".into(), self.workers.to_string());
        }
        macro_rules! opt {
            ($key:expr, $val:expr) => {
                if let Some(v) = $val {
                    m.insert($key.into(), format!("{v}"));
                }
            };
        }
        opt!("solver.grad_tol", self.solver.grad_tol);
        opt!("solver.hess_tol", self.solver.hess_tol);
        opt!("solver.max_outer", self.solver.max_outer);
        opt!("solver.tcg_max", self.solver.tcg_max);
        opt!("solver.trust_init", self.solver.trust_init);
        opt!("solver.trust_max", self.solver.trust_max);
        m.insert(
            "tails.model".into(),
            match self.tails.model {
                TailsModel::Wigner => "wigner".into(),
                TailsModel::Sbm => "sbm".into(),
            },
        );
        if !self.tails.t_values.is_empty() {
            m.insert("tails.t_values".into(), join_list(&self.tails.t_values));
        }
        m.insert("tails.with_sdp".into(), self.tails.with_sdp.to_string());
        opt!("assert.min_correlation", self.asserts.min_correlation);
        opt!("assert.min_exact_rate", self.asserts.min_exact_rate);
        opt!("assert.max_exact_rate", self.asserts.max_exact_rate);
        opt!("assert.min_certified_rate", self.asserts.min_certified_rate);
        m
    }
}

fn join_list(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (ln, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (k, v) = t.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected 'key = value', got '{t}'", ln + 1))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn take_req(map: &mut BTreeMap<String, String>, key: &str) -> Result<String> {
    map.remove(key)
        .ok_or_else(|| Error::Config(format!("missing key '{key}'")))
}

fn parse_as<T: std::str::FromStr>(map: &mut BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match map.remove(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|e| Error::Config(format!("key '{key}': {e}"))),
    }
}

fn parse_list(map: &mut BTreeMap<String, String>, key: &str) -> Result<Option<Vec<f64>>> {
    match map.remove(key) {
        None => Ok(None),
        Some(v) => {
            let mut out = Vec::new();
            for part in v.split(',') {
                let p = part.trim();
                if p.is_empty() {
                    continue;
                }
                out.push(
                    p.parse()
                        .map_err(|e| Error::Config(format!("key '{key}': {e}")))?,
                );
            }
            if out.is_empty() {
                return Err(Error::Config(format!("key '{key}': empty list")));
            }
            Ok(Some(out))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip() {
        let text = "\
# sweep config
experiment = z2-sweep
n = 200
z2.lambda = 4, 8, 16
trials = 10
restarts = 2
master_seed = 99
solver.grad_tol = 1e-5
format = json
assert.min_correlation = 0.1
";
        let cfg = ExperimentConfig::from_str_config(text).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Z2Sweep);
        assert_eq!(cfg.n, 200);
        assert_eq!(cfg.lambda_grid, vec![4.0, 8.0, 16.0]);
        assert_eq!(cfg.trials, 10);
        assert_eq!(cfg.solver.grad_tol, Some(1e-5));
        assert_eq!(cfg.asserts.min_correlation, Some(0.1));
        // flatten and re-parse
        let kv = cfg.to_key_values();
        let text2: String = kv.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let cfg2 = ExperimentConfig::from_str_config(&text2).unwrap();
        assert_eq!(cfg2.lambda_grid, cfg.lambda_grid);
        assert_eq!(cfg2.master_seed, cfg.master_seed);
    }

    #[test]
    fn rejects_empty_grid() {
        let text = "experiment = z2-sweep\nn = 100\ntrials = 5\n";
        assert!(ExperimentConfig::from_str_config(text).is_err());
    }

    #[test]
    fn rejects_unknown_key() {
        let text = "experiment = z2-sweep\nn = 100\nz2.lambda = 8\nbogus = 1\n";
        let err = ExperimentConfig::from_str_config(text).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn overrides_win() {
        let text = "experiment = z2-sweep\nn = 100\nz2.lambda = 8\ntrials = 5\n";
        let mut cfg = ExperimentConfig::from_str_config(text).unwrap();
        cfg.apply_overrides(&[("trials".into(), "9".into()), ("n".into(), "64".into())])
            .unwrap();
        assert_eq!(cfg.trials, 9);
        assert_eq!(cfg.n, 64);
    }

    #[test]
    fn sbm_grids_must_pair() {
        let text = "experiment = sbm-sweep\nn = 100\nsbm.a = 20, 30\nsbm.b = 2\n";
        assert!(ExperimentConfig::from_str_config(text).is_err());
    }
}
