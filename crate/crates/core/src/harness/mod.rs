//! Experiment harness: seeded sweeps over model grids, per-row
//! certification and recovery measurement, and CSV/JSON persistence.
//!
//! Determinism contract: a sweep is a pure function of its config and
//! master seed. Work items are keyed by `(grid index, trial, restart)`,
//! every random stream is derived from those indices, and rows are merged
//! in key order — so the table is bit-identical whatever the worker count.
//! The only non-reproducible column is the wall-time diagnostic, which the
//! equality helper below ignores.

mod config;

pub use config::{
    Asserts, ExperimentConfig, ExperimentKind, OutputFormat, SolverOverrides, TailsModel,
    TailsSettings,
};

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{self, Verdict};
use crate::models::{self, SbmParams, Snr};
use crate::oracle;
use crate::recover;
use crate::solver::solve_rank2;
use crate::spectral::{spectral_norm, SymOp};
use crate::{Error, Result};

/// Schema version stamped into manifests; bump on any column change.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable consulted for the worker count when the config
/// leaves `workers = 0`.
pub const WORKERS_ENV: &str = "RANKTWO_WORKERS";

/// One row per `(grid point, trial, restart)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    /// Instance seed of this trial.
    pub seed: u64,
    pub n: usize,
    pub grid_index: usize,
    pub trial: usize,
    pub restart: usize,
    pub sigma: Option<f64>,
    pub lambda: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub status: String,
    pub cost: f64,
    pub grad_residual: f64,
    pub hess_min_eig: f64,
    pub s_min_eig: f64,
    pub q_rank: u8,
    pub verdict: String,
    pub correlation: f64,
    pub overlap: f64,
    pub exact: bool,
    pub gamma_hat: Option<f64>,
    /// Diagnostic only; excluded from determinism comparisons.
    pub wall_time_s: f64,
}

/// Per-grid-point aggregates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSummary {
    pub grid_index: usize,
    pub label: String,
    pub rows: usize,
    pub min_correlation: f64,
    pub median_correlation: f64,
    pub exact_rate: f64,
    /// Fraction of rows whose verdict is at least second-order critical.
    pub certified_rate: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<ResultRecord>,
    pub summaries: Vec<GridSummary>,
}

/// splitmix64 finalizer.
fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Reproducible work-item seed from `(master, grid, trial, restart)`.
pub fn derive_seed(master: u64, grid: u64, trial: u64, restart: u64) -> u64 {
    let mut h = mix64(master);
    for v in [grid, trial, restart] {
        h = mix64(h ^ v.wrapping_mul(0xff51_afd7_ed55_8ccd));
    }
    h
}

fn resolve_workers(cfg_workers: usize) -> usize {
    if cfg_workers > 0 {
        return cfg_workers;
    }
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

#[derive(Clone, Copy)]
enum GridPoint {
    Sigma(f64),
    Lambda(f64),
    Ab(f64, f64),
}

impl GridPoint {
    fn label(&self) -> String {
        match self {
            GridPoint::Sigma(s) => format!("sigma={s}"),
            GridPoint::Lambda(l) => format!("lambda={l}"),
            GridPoint::Ab(a, b) => format!("a={a},b={b}"),
        }
    }
}

fn grid_points(cfg: &ExperimentConfig) -> Vec<GridPoint> {
    match cfg.experiment {
        ExperimentKind::SbmSweep => cfg
            .ab_grid
            .iter()
            .map(|&(a, b)| GridPoint::Ab(a, b))
            .collect(),
        _ => {
            if !cfg.lambda_grid.is_empty() {
                cfg.lambda_grid.iter().map(|&l| GridPoint::Lambda(l)).collect()
            } else {
                cfg.sigma_grid.iter().map(|&s| GridPoint::Sigma(s)).collect()
            }
        }
    }
}

fn error_record(
    cfg: &ExperimentConfig,
    point: GridPoint,
    gi: usize,
    trial: usize,
    restart: usize,
    seed: u64,
    wall: f64,
) -> ResultRecord {
    let (sigma, lambda, a, b) = match point {
        GridPoint::Sigma(s) => (
            Some(s),
            Some(models::lambda_from_sigma(cfg.n, s)).filter(|l| l.is_finite()),
            None,
            None,
        ),
        GridPoint::Lambda(l) => (Some(models::sigma_from_lambda(cfg.n, l)), Some(l), None, None),
        GridPoint::Ab(a, b) => (None, None, Some(a), Some(b)),
    };
    ResultRecord {
        experiment: cfg.experiment.to_string(),
        seed,
        n: cfg.n,
        grid_index: gi,
        trial,
        restart,
        sigma,
        lambda,
        a,
        b,
        status: "error".into(),
        cost: f64::NAN,
        grad_residual: f64::NAN,
        hess_min_eig: f64::NAN,
        s_min_eig: f64::NAN,
        q_rank: 0,
        verdict: "inconclusive".into(),
        correlation: f64::NAN,
        overlap: f64::NAN,
        exact: false,
        gamma_hat: None,
        wall_time_s: wall,
    }
}

/// Generate, solve, certify, and measure one trial (all restarts).
fn run_trial(cfg: &ExperimentConfig, gi: usize, point: GridPoint, trial: usize) -> Vec<ResultRecord> {
    let n = cfg.n;
    let instance_seed = derive_seed(cfg.master_seed, gi as u64, trial as u64, u64::MAX);
    let experiment = cfg.experiment.to_string();

    // instance + ground truth + certificate scale + noise summary
    enum Inst {
        Z2(models::Z2Instance),
        Sbm(models::SbmInstance),
    }
    let built: Result<(Inst, Option<f64>)> = (|| match point {
        GridPoint::Sigma(s) => {
            let inst = models::gen_z2(n, Snr::Sigma(s), instance_seed)?;
            let gh = models::noise_summary_z2(&inst)?.gamma_hat;
            Ok((Inst::Z2(inst), Some(gh)))
        }
        GridPoint::Lambda(l) => {
            let inst = models::gen_z2(n, Snr::Lambda(l), instance_seed)?;
            let gh = models::noise_summary_z2(&inst)?.gamma_hat;
            Ok((Inst::Z2(inst), Some(gh)))
        }
        GridPoint::Ab(a, b) => {
            let inst = models::gen_sbm(n, SbmParams::Ab { a, b }, instance_seed)?;
            let (e, _, _) = models::noise_decomposition(&inst);
            let spec = spectral_norm(&e, (1e-6 * n as f64).max(1e-9))?;
            let gf: Vec<f64> = inst.g.iter().map(|&s| s as f64).collect();
            let eg = e.apply(&gf);
            let inf = eg.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            Ok((Inst::Sbm(inst), Some(models::gamma_hat(n, spec, inf))))
        }
    })();

    let (inst, gamma_hat) = match built {
        Ok(v) => v,
        Err(_) => {
            return (0..cfg.restarts)
                .map(|r| error_record(cfg, point, gi, trial, r, instance_seed, 0.0))
                .collect()
        }
    };
    let (op, labels): (&dyn SymOp, &[i8]) = match &inst {
        Inst::Z2(z) => (&z.y, &z.z),
        Inst::Sbm(s) => (&s.anat, &s.g),
    };
    let scale = match spectral_norm(op, (1e-6 * n as f64).max(1e-9)) {
        Ok(nrm) => n as f64 * nrm,
        Err(_) => {
            return (0..cfg.restarts)
                .map(|r| error_record(cfg, point, gi, trial, r, instance_seed, 0.0))
                .collect()
        }
    };

    let (sigma, lambda, a_param, b_param) = match (&inst, point) {
        (Inst::Z2(z), _) => (
            Some(z.sigma),
            z.lambda.is_finite().then_some(z.lambda),
            None,
            None,
        ),
        (Inst::Sbm(s), _) => (None, None, Some(s.a_param), Some(s.b_param)),
    };

    (0..cfg.restarts)
        .map(|restart| {
            let start = Instant::now();
            let solve_seed = derive_seed(cfg.master_seed, gi as u64, trial as u64, restart as u64);
            let solver_cfg = cfg.solver.resolve(n, solve_seed);
            let solved = solve_rank2(op, &solver_cfg, None);
            let report = match solved {
                Ok(r) => r,
                Err(_) => {
                    return error_record(
                        cfg,
                        point,
                        gi,
                        trial,
                        restart,
                        instance_seed,
                        start.elapsed().as_secs_f64(),
                    )
                }
            };
            let cert = certify::dual_certificate_scaled(
                op,
                &report.point,
                certify::DEFAULT_CERT_TOL,
                scale,
            );
            let (s_min, q_rank, verdict) = match cert {
                Ok(c) => (c.s_min_eig, c.q_rank, c.verdict),
                Err(_) => (f64::NAN, 0, Verdict::Inconclusive),
            };
            let mut round_rng = ChaCha8Rng::seed_from_u64(solve_seed ^ 0x0ddc_0ffe_e0dd_f00d);
            let metrics = recover::metrics(
                &report.point,
                labels,
                recover::default_exact_tol(n),
                &mut round_rng,
            )
            .unwrap_or(recover::RecoveryMetrics {
                correlation: f64::NAN,
                overlap: f64::NAN,
                exact: false,
                frobenius_gap: f64::NAN,
            });
            ResultRecord {
                experiment: experiment.clone(),
                seed: instance_seed,
                n,
                grid_index: gi,
                trial,
                restart,
                sigma,
                lambda,
                a: a_param,
                b: b_param,
                status: report.status.to_string(),
                cost: report.cost,
                grad_residual: report.grad_residual,
                hess_min_eig: report.hess_min_eig,
                s_min_eig: s_min,
                q_rank,
                verdict: verdict.to_string(),
                correlation: metrics.correlation,
                overlap: metrics.overlap,
                exact: metrics.exact,
                gamma_hat,
                wall_time_s: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

/// Run a solving sweep: `grid x trials x restarts` rows, exactly, in key
/// order. Per-trial failures become `status = "error"` rows; only config
/// errors abort.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::Tails | ExperimentKind::OracleAudit => {
            return Err(Error::Config(format!(
                "experiment '{}' does not produce sweep rows; use its dedicated runner",
                cfg.experiment
            )))
        }
        _ => {}
    }
    let points = grid_points(cfg);
    let items: Vec<(usize, GridPoint, usize)> = points
        .iter()
        .enumerate()
        .flat_map(|(gi, &p)| (0..cfg.trials).map(move |t| (gi, p, t)))
        .collect();

    let workers = resolve_workers(cfg.workers);
    let run_all = || -> Vec<Vec<ResultRecord>> {
        items
            .par_iter()
            .map(|&(gi, p, t)| run_trial(cfg, gi, p, t))
            .collect()
    };
    let nested: Vec<Vec<ResultRecord>> = if workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(run_all)
    } else {
        run_all()
    };
    let records: Vec<ResultRecord> = nested.into_iter().flatten().collect();
    assert_eq!(
        records.len(),
        points.len() * cfg.trials * cfg.restarts,
        "sweep dropped rows"
    );

    let summaries = summarize(&points, &records);
    Ok(SweepOutput { records, summaries })
}

fn summarize(points: &[GridPoint], records: &[ResultRecord]) -> Vec<GridSummary> {
    points
        .iter()
        .enumerate()
        .map(|(gi, p)| {
            let rows: Vec<&ResultRecord> =
                records.iter().filter(|r| r.grid_index == gi).collect();
            let mut corrs: Vec<f64> = rows
                .iter()
                .map(|r| r.correlation)
                .filter(|c| c.is_finite())
                .collect();
            corrs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let min_correlation = corrs.first().copied().unwrap_or(f64::NAN);
            let median_correlation = if corrs.is_empty() {
                f64::NAN
            } else {
                corrs[corrs.len() / 2]
            };
            let exact_rate =
                rows.iter().filter(|r| r.exact).count() as f64 / rows.len().max(1) as f64;
            let certified = rows
                .iter()
                .filter(|r| r.verdict != Verdict::Inconclusive.to_string() && r.status != "error")
                .count();
            GridSummary {
                grid_index: gi,
                label: p.label(),
                rows: rows.len(),
                min_correlation,
                median_correlation,
                exact_rate,
                certified_rate: certified as f64 / rows.len().max(1) as f64,
            }
        })
        .collect()
}

/// Outcome of the configured aggregate assertions.
#[derive(Debug, Clone)]
pub struct AssertOutcome {
    pub passed: bool,
    pub failures: Vec<String>,
}

pub fn check_asserts(asserts: &Asserts, summaries: &[GridSummary]) -> AssertOutcome {
    let mut failures = Vec::new();
    for s in summaries {
        if let Some(v) = asserts.min_correlation {
            if !(s.min_correlation >= v) {
                failures.push(format!(
                    "{}: min correlation {:.6} < required {v}",
                    s.label, s.min_correlation
                ));
            }
        }
        if let Some(v) = asserts.min_exact_rate {
            if !(s.exact_rate >= v) {
                failures.push(format!(
                    "{}: exact-recovery rate {:.3} < required {v}",
                    s.label, s.exact_rate
                ));
            }
        }
        if let Some(v) = asserts.max_exact_rate {
            if !(s.exact_rate <= v) {
                failures.push(format!(
                    "{}: exact-recovery rate {:.3} > allowed {v}",
                    s.label, s.exact_rate
                ));
            }
        }
        if let Some(v) = asserts.min_certified_rate {
            if !(s.certified_rate >= v) {
                failures.push(format!(
                    "{}: certified rate {:.3} < required {v}",
                    s.label, s.certified_rate
                ));
            }
        }
    }
    AssertOutcome {
        passed: failures.is_empty(),
        failures,
    }
}

/// Tail-diagnostic runner for the `tails` experiment kind.
pub enum TailsOutput {
    Wigner(models::WignerTailReport),
    Sbm(models::SbmTailReport),
}

pub fn run_tails(cfg: &ExperimentConfig) -> Result<TailsOutput> {
    cfg.validate()?;
    match cfg.tails.model {
        TailsModel::Wigner => Ok(TailsOutput::Wigner(models::tail_check_wigner(
            cfg.n,
            cfg.trials,
            &cfg.tails.t_values,
            cfg.master_seed,
        )?)),
        TailsModel::Sbm => {
            let (a, b) = cfg.ab_grid[0];
            Ok(TailsOutput::Sbm(models::tail_check_sbm(
                cfg.n,
                a,
                b,
                cfg.trials,
                cfg.master_seed,
                cfg.tails.with_sdp,
            )?))
        }
    }
}

/// Exhaustive rank-1 audit over seeded noisy instances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleAuditOutput {
    pub instances: usize,
    pub soc_points_total: usize,
    pub counterexamples: usize,
    /// Dumped in full when any instance produces one.
    pub counterexample_seeds: Vec<u64>,
}

pub fn run_oracle_audit(cfg: &ExperimentConfig) -> Result<OracleAuditOutput> {
    cfg.validate()?;
    let sigma = cfg.sigma_grid[0];
    let results: Vec<(usize, Vec<u64>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_seed(cfg.master_seed, 0, trial as u64, u64::MAX);
            let inst = models::gen_z2(cfg.n, Snr::Sigma(sigma), seed)?;
            let audit = oracle::audit_rank1_soc(&inst.y)?;
            let bad = if audit.counterexamples.is_empty() {
                Vec::new()
            } else {
                vec![seed]
            };
            Ok((audit.oracle.soc_rank1_points.len(), bad))
        })
        .collect::<Result<_>>()?;
    let mut total = 0;
    let mut bad_seeds = Vec::new();
    for (count, bad) in results {
        total += count;
        bad_seeds.extend(bad);
    }
    Ok(OracleAuditOutput {
        instances: cfg.trials,
        soc_points_total: total,
        counterexamples: bad_seeds.len(),
        counterexample_seeds: bad_seeds,
    })
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

pub const CSV_HEADER: &str = "experiment,seed,n,grid_index,trial,restart,sigma,lambda,a,b,\
status,cost,grad_residual,hess_min_eig,s_min_eig,q_rank,verdict,correlation,overlap,exact,\
gamma_hat,wall_time_s";

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn records_to_csv(records: &[ResultRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 256 + 256);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.experiment,
            r.seed,
            r.n,
            r.grid_index,
            r.trial,
            r.restart,
            fmt_opt(r.sigma),
            fmt_opt(r.lambda),
            fmt_opt(r.a),
            fmt_opt(r.b),
            r.status,
            fmt_f64(r.cost),
            fmt_f64(r.grad_residual),
            fmt_f64(r.hess_min_eig),
            fmt_f64(r.s_min_eig),
            r.q_rank,
            r.verdict,
            fmt_f64(r.correlation),
            fmt_f64(r.overlap),
            r.exact,
            fmt_opt(r.gamma_hat),
            fmt_f64(r.wall_time_s),
        ));
    }
    out
}

pub fn records_to_json(records: &[ResultRecord]) -> Result<String> {
    serde_json::to_string_pretty(records).map_err(|e| Error::Config(format!("json encode: {e}")))
}

/// Parse a table produced by [`records_to_csv`].
pub fn records_from_csv(text: &str) -> Result<Vec<ResultRecord>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Config("empty csv".into()))?;
    if header != CSV_HEADER {
        return Err(Error::Config("unrecognized csv header".into()));
    }
    let parse_f = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|e| Error::Config(format!("csv float '{s}': {e}")))
    };
    let parse_opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            parse_f(s).map(Some)
        }
    };
    let mut out = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 22 {
            return Err(Error::Config(format!(
                "csv line {}: expected 22 fields, got {}",
                ln + 2,
                f.len()
            )));
        }
        let int = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|e| Error::Config(format!("csv int '{s}': {e}")))
        };
        out.push(ResultRecord {
            experiment: f[0].into(),
            seed: f[1]
                .parse()
                .map_err(|e| Error::Config(format!("csv seed: {e}")))?,
            n: int(f[2])?,
            grid_index: int(f[3])?,
            trial: int(f[4])?,
            restart: int(f[5])?,
            sigma: parse_opt(f[6])?,
            lambda: parse_opt(f[7])?,
            a: parse_opt(f[8])?,
            b: parse_opt(f[9])?,
            status: f[10].into(),
            cost: parse_f(f[11])?,
            grad_residual: parse_f(f[12])?,
            hess_min_eig: parse_f(f[13])?,
            s_min_eig: parse_f(f[14])?,
            q_rank: f[15]
                .parse()
                .map_err(|e| Error::Config(format!("csv rank: {e}")))?,
            verdict: f[16].into(),
            correlation: parse_f(f[17])?,
            overlap: parse_f(f[18])?,
            exact: f[19] == "true",
            gamma_hat: parse_opt(f[20])?,
            wall_time_s: parse_f(f[21])?,
        });
    }
    Ok(out)
}

/// Bitwise equality of every reproducible field (wall time excluded).
pub fn records_deterministic_eq(a: &[ResultRecord], b: &[ResultRecord]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let key = |r: &ResultRecord| -> String {
        format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
            r.experiment,
            r.seed,
            r.n,
            r.grid_index,
            r.trial,
            r.restart,
            fmt_opt(r.sigma),
            fmt_opt(r.lambda),
            fmt_opt(r.a),
            fmt_opt(r.b),
            r.status,
            r.cost.to_bits(),
            r.grad_residual.to_bits(),
            r.hess_min_eig.to_bits(),
            r.s_min_eig.to_bits(),
            r.q_rank,
            r.verdict,
            r.correlation.to_bits(),
            r.overlap.to_bits(),
            r.exact,
            fmt_opt(r.gamma_hat),
        )
    };
    a.iter().zip(b).all(|(x, y)| key(x) == key(y))
}

/// Written next to every emitted table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub code_version: String,
    pub master_seed: u64,
    pub rows: usize,
    pub config: std::collections::BTreeMap<String, String>,
}

impl RunManifest {
    pub fn for_run(cfg: &ExperimentConfig, rows: usize) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: cfg.master_seed,
            rows,
            config: cfg.to_key_values(),
        }
    }
}

/// Write the table in the requested format plus `<path>.manifest.json`.
pub fn emit_results(
    records: &[ResultRecord],
    format: OutputFormat,
    path: &Path,
    manifest: &RunManifest,
) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidParam("refusing to emit an empty table".into()));
    }
    let body = match format {
        OutputFormat::Csv => records_to_csv(records),
        OutputFormat::Json => records_to_json(records)?,
    };
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    let manifest_path = path.with_extension(match format {
        OutputFormat::Csv => "csv.manifest.json",
        OutputFormat::Json => "json.manifest.json",
    });
    let mj = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Config(format!("manifest encode: {e}")))?;
    std::fs::write(&manifest_path, mj).map_err(|e| Error::io(&manifest_path, e))
}
