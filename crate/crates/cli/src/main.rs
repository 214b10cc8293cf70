//! Command-line front end: instance generation, single solves, certificate
//! checks, experiment sweeps, tail diagnostics, and exhaustive audits.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure,
//! 3 aggregate-assertion failure (for CI gating).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ranktwo::certify;
use ranktwo::circle;
use ranktwo::harness::{self, ExperimentConfig, ExperimentKind, OutputFormat, RunManifest};
use ranktwo::models;
use ranktwo::solver::{solve_rank2, SolverConfig};
use ranktwo::spectral::{read_coord, spectral_norm, SymOp};
use ranktwo::Error;

#[derive(Parser)]
#[command(name = "ranktwo", version, about = "Rank-2 factorized SDP solver and experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Experiment config file (flat `key = value` lines, dotted keys).
    #[arg(long)]
    config: PathBuf,
    /// Override config entries, e.g. `--set solver.grad_tol=1e-6`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one instance: matrix in coordinate format plus a JSON sidecar.
    Gen {
        /// Model: `z2` or `sbm`.
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        /// Noise level for z2 (alternative: --lambda).
        #[arg(long)]
        sigma: Option<f64>,
        /// Signal-to-noise for z2 (alternative: --sigma).
        #[arg(long)]
        lambda: Option<f64>,
        /// Within-community degree parameter (sbm).
        #[arg(long)]
        a: Option<f64>,
        /// Across-community degree parameter (sbm).
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix; writes `<prefix>.coord` and `<prefix>.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one matrix from a coordinate file.
    Solve {
        #[arg(long)]
        matrix: PathBuf,
        /// Warm start from a point file.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Center the matrix before solving: drop its diagonal and subtract
        /// `shift` from every entry (rank-1 correction, applied
        /// matrix-free). For a graph instance use `(p + q) / 2`.
        #[arg(long)]
        shift: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Solver overrides, e.g. `--set grad_tol=1e-6` (keys as in
        /// `solver.*` config entries, without the prefix).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Write the solve report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the final point in text form.
        #[arg(long)]
        point_out: Option<PathBuf>,
    },
    /// Certify a point against a matrix.
    Certify {
        #[arg(long)]
        matrix: PathBuf,
        /// Same centering as `solve --shift`.
        #[arg(long)]
        shift: Option<f64>,
        #[arg(long)]
        point: PathBuf,
        /// Instance sidecar with ground-truth labels; enables the
        /// uniqueness upgrade.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Relative certificate tolerance.
        #[arg(long, default_value_t = certify::DEFAULT_CERT_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a sweep experiment from a config file.
    Sweep(ConfigArgs),
    /// Run tail diagnostics from a config file.
    Tails(ConfigArgs),
    /// Run the exhaustive small-n audit from a config file.
    Oracle(ConfigArgs),
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParam(_) | Error::Parse { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn parse_sets(sets: &[String]) -> Result<Vec<(String, String)>, Error> {
    sets.iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("--set needs KEY=VALUE, got '{s}'")))
        })
        .collect()
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    cfg.apply_overrides(&parse_sets(&args.sets)?)?;
    Ok(cfg)
}

fn write_json(path: &PathBuf, value: &serde_json::Value) -> Result<(), Error> {
    let s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("json encode: {e}")))?;
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Gen {
            model,
            n,
            sigma,
            lambda,
            a,
            b,
            seed,
            out,
        } => {
            match model.as_str() {
                "z2" => {
                    let snr = match (sigma, lambda) {
                        (Some(s), None) => models::Snr::Sigma(s),
                        (None, Some(l)) => models::Snr::Lambda(l),
                        _ => {
                            return Err(Error::Config(
                                "z2 needs exactly one of --sigma / --lambda".into(),
                            ))
                        }
                    };
                    let inst = models::gen_z2(n, snr, seed)?;
                    models::save_z2(&inst, &out)?;
                    println!(
                        "wrote {}.coord and {}.json (n={n}, sigma={}, seed={seed})",
                        out.display(),
                        out.display(),
                        inst.sigma
                    );
                }
                "sbm" => {
                    let (a, b) = match (a, b) {
                        (Some(a), Some(b)) => (a, b),
                        _ => return Err(Error::Config("sbm needs --a and --b".into())),
                    };
                    let inst = models::gen_sbm(n, models::SbmParams::Ab { a, b }, seed)?;
                    models::save_sbm(&inst, &out)?;
                    println!(
                        "wrote {}.coord and {}.json (n={n}, a={a}, b={b}, lambda={:.4}, seed={seed})",
                        out.display(),
                        out.display(),
                        inst.lambda_ab
                    );
                }
                other => return Err(Error::Config(format!("unknown model '{other}'"))),
            }
            Ok(0)
        }

        Command::Solve {
            matrix,
            init,
            shift,
            seed,
            sets,
            out,
            point_out,
        } => {
            let raw = read_coord(&matrix)?;
            let m: Box<dyn SymOp> = match shift {
                Some(s) => Box::new(ranktwo::spectral::CenteredAdjacency::new(
                    raw.strip_diagonal(),
                    s,
                )),
                None => Box::new(raw),
            };
            let mut cfg = SolverConfig::for_dim(m.dim()).with_seed(seed);
            for (k, v) in parse_sets(&sets)? {
                let parse = |v: &str| -> Result<f64, Error> {
                    v.parse().map_err(|e| Error::Config(format!("{k}: {e}")))
                };
                match k.as_str() {
                    "grad_tol" => cfg.grad_tol = parse(&v)?,
                    "hess_tol" => cfg.hess_tol = parse(&v)?,
                    "trust_init" => cfg.trust_init = parse(&v)?,
                    "trust_max" => cfg.trust_max = parse(&v)?,
                    "max_outer" => {
                        cfg.max_outer =
                            v.parse().map_err(|e| Error::Config(format!("{k}: {e}")))?
                    }
                    "tcg_max" => {
                        cfg.tcg_max = v.parse().map_err(|e| Error::Config(format!("{k}: {e}")))?
                    }
                    other => return Err(Error::Config(format!("unknown solver key '{other}'"))),
                }
            }
            let init_point = init.map(|p| circle::read_point_file(&p)).transpose()?;
            let report = solve_rank2(m.as_ref(), &cfg, init_point)?;
            println!(
                "status={} cost={:.6} grad_residual={:.3e} hess_min_eig={:.3e} outer={} matvecs={}",
                report.status,
                report.cost,
                report.grad_residual,
                report.hess_min_eig,
                report.outer_iters,
                report.matvecs
            );
            if let Some(path) = out {
                write_json(&path, &report.to_json())?;
            }
            if let Some(path) = point_out {
                circle::write_point_file(&path, &report.point)?;
            }
            Ok(0)
        }

        Command::Certify {
            matrix,
            shift,
            point,
            labels,
            tol,
            out,
        } => {
            let raw = read_coord(&matrix)?;
            let m: Box<dyn SymOp> = match shift {
                Some(s) => Box::new(ranktwo::spectral::CenteredAdjacency::new(
                    raw.strip_diagonal(),
                    s,
                )),
                None => Box::new(raw),
            };
            let q = circle::read_point_file(&point)?;
            let report = match labels {
                Some(side_path) => {
                    let side = models::read_sidecar(&side_path)?;
                    let scale = m.dim() as f64
                        * spectral_norm(m.as_ref(), (1e-6 * m.dim() as f64).max(1e-9))?;
                    certify::certify_with_ground_truth(m.as_ref(), &q, &side.labels, tol, scale)?
                }
                None => certify::dual_certificate(m.as_ref(), &q, tol)?,
            };
            println!(
                "verdict={} q_rank={} grad_residual={:.3e} hess_min_eig={:.3e} s_min_eig={:.3e}",
                report.verdict, report.q_rank, report.grad_residual, report.hess_min_eig,
                report.s_min_eig
            );
            if let Some(path) = out {
                let v = serde_json::to_value(&report)
                    .map_err(|e| Error::Config(format!("json encode: {e}")))?;
                write_json(&path, &v)?;
            }
            Ok(0)
        }

        Command::Sweep(args) => {
            let cfg = load_config(&args)?;
            match cfg.experiment {
                ExperimentKind::Tails | ExperimentKind::OracleAudit => {
                    return Err(Error::Config(format!(
                        "experiment '{}' belongs to the `tails` / `oracle` subcommand",
                        cfg.experiment
                    )))
                }
                _ => {}
            }
            let output = cfg.output.clone().unwrap_or_else(|| {
                PathBuf::from(match cfg.format {
                    OutputFormat::Csv => "results.csv",
                    OutputFormat::Json => "results.json",
                })
            });
            let sweep = harness::run_sweep(&cfg)?;
            let manifest = RunManifest::for_run(&cfg, sweep.records.len());
            harness::emit_results(&sweep.records, cfg.format, &output, &manifest)?;
            println!("wrote {} rows to {}", sweep.records.len(), output.display());
            for s in &sweep.summaries {
                println!(
                    "  {}: min_corr={:.4} median_corr={:.4} exact_rate={:.3} certified_rate={:.3}",
                    s.label, s.min_correlation, s.median_correlation, s.exact_rate,
                    s.certified_rate
                );
            }
            let outcome = harness::check_asserts(&cfg.asserts, &sweep.summaries);
            if !outcome.passed {
                for f in &outcome.failures {
                    eprintln!("assertion failed: {f}");
                }
                return Ok(3);
            }
            Ok(0)
        }

        Command::Tails(args) => {
            let mut cfg = load_config(&args)?;
            cfg.experiment = ExperimentKind::Tails;
            cfg.validate()?;
            let report_json = match harness::run_tails(&cfg)? {
                harness::TailsOutput::Wigner(rep) => {
                    for row in &rep.rows {
                        println!(
                            "t={:<4} spec: freq={:.4} bound={:.4}   inf: freq={:.4} bound={:.4}",
                            row.t, row.freq_spec, row.bound_spec, row.freq_inf, row.bound_inf
                        );
                    }
                    serde_json::to_value(&rep)
                }
                harness::TailsOutput::Sbm(rep) => {
                    println!(
                        "d={} median ||E||={:.4} median ||Eg||_inf={:.4} fitted C_spec={:.3} fitted C_inf={:.3}",
                        rep.d,
                        rep.median_spec_norm,
                        rep.median_inf_norm,
                        rep.fitted_c_spec,
                        rep.fitted_c_inf
                    );
                    serde_json::to_value(&rep)
                }
            }
            .map_err(|e| Error::Config(format!("json encode: {e}")))?;
            if let Some(path) = &cfg.output {
                write_json(path, &report_json)?;
                println!("wrote {}", path.display());
            }
            Ok(0)
        }

        Command::Oracle(args) => {
            let mut cfg = load_config(&args)?;
            cfg.experiment = ExperimentKind::OracleAudit;
            cfg.validate()?;
            let audit = harness::run_oracle_audit(&cfg)?;
            println!(
                "instances={} rank-1 critical points={} counterexamples={}",
                audit.instances, audit.soc_points_total, audit.counterexamples
            );
            if let Some(path) = &cfg.output {
                let v = serde_json::to_value(&audit)
                    .map_err(|e| Error::Config(format!("json encode: {e}")))?;
                write_json(path, &v)?;
                println!("wrote {}", path.display());
            }
            if audit.counterexamples > 0 {
                eprintln!(
                    "audit FAILED: rank-1 second-order critical points below the optimum (seeds {:?})",
                    audit.counterexample_seeds
                );
                return Ok(3);
            }
            Ok(0)
        }
    }
}
