//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities. Every tolerance is pinned here, in code.
//!
//! The statistical criteria run at desk scale (n in the hundreds, tens of
//! trials); the asymptotic constants of the exact-recovery regime are not
//! measurable at this scale and are covered instead by the regime checks
//! and the falsification audits below.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ranktwo::certify::{self, Verdict};
use ranktwo::circle::{self, retract, TangentCoeffs};
use ranktwo::harness::{
    self, derive_seed, records_deterministic_eq, ExperimentConfig, ExperimentKind,
};
use ranktwo::models::{self, Snr};
use ranktwo::oracle;
use ranktwo::recover;
use ranktwo::solver::{solve_rank2, SolveStatus, SolverConfig};
use ranktwo::spectral::{spectral_norm, DenseSym, SymOp};

fn wigner(n: usize, seed: u64) -> DenseSym {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DenseSym::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            m.set_sym(i, j, rng.sample(StandardNormal));
        }
    }
    m
}

/// 1. Directional derivatives of the cost agree with finite differences:
///    first order to 1e-5 relative, curvature to 1e-4 relative, over 100
///    random (A, Q, alpha) with n <= 50.
#[test]
fn criterion_01_calculus_against_finite_differences() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(0xc1);
    let mut worst_grad = 0.0f64;
    let mut worst_hess = 0.0f64;
    for case in 0..100 {
        let n = 5 + (case % 46);
        let a: Box<dyn SymOp> = if case % 3 == 0 {
            let inst = models::gen_z2(n, Snr::Sigma(0.7), 10_000 + case as u64).unwrap();
            Box::new(inst.y.to_dense())
        } else {
            Box::new(wigner(n, 20_000 + case as u64))
        };
        let q = circle::random_point_seeded(n, 30_000 + case as u64);
        let alpha = TangentCoeffs((0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect());

        let g = circle::rgrad(a.as_ref(), &q).unwrap();
        let analytic = g.dot(&alpha);
        let h = 1e-6;
        let fp = circle::cost(a.as_ref(), &retract(&q, &alpha, h)).unwrap();
        let fm = circle::cost(a.as_ref(), &retract(&q, &alpha, -h)).unwrap();
        let fd = (fp - fm) / (2.0 * h);
        let scale = analytic.abs().max(1e-3 * n as f64);
        let rel = (fd - analytic).abs() / scale;
        worst_grad = worst_grad.max(rel);
        assert!(rel <= 1e-5, "case {case}: gradient fd error {rel:.2e}");

        let hq = circle::hess_matrix(a.as_ref(), &q).unwrap();
        let halpha = hq.apply(&alpha.0);
        let quad = -2.0 * alpha.0.iter().zip(&halpha).map(|(x, y)| x * y).sum::<f64>();
        let h2 = 1e-4;
        let f0 = circle::cost(a.as_ref(), &q).unwrap();
        let fp2 = circle::cost(a.as_ref(), &retract(&q, &alpha, h2)).unwrap();
        let fm2 = circle::cost(a.as_ref(), &retract(&q, &alpha, -h2)).unwrap();
        let fd2 = (fp2 - 2.0 * f0 + fm2) / (h2 * h2);
        let scale2 = quad.abs().max(1e-3 * n as f64);
        let rel2 = (fd2 - quad).abs() / scale2;
        worst_hess = worst_hess.max(rel2);
        assert!(rel2 <= 1e-4, "case {case}: curvature fd error {rel2:.2e}");
    }
    println!(
        "ACCEPTANCE 01 calculus: PASS (worst gradient rel err {worst_grad:.2e}, \
         worst curvature rel err {worst_hess:.2e})"
    );
}

/// 2. At solver-converged points both first-order identities hold:
///    `||(ddiag(A Q Q^T) - A) Q||_F <= grad_tol` and
///    `||A x o y - A y o x||_inf <= 1e-8 ||A||`, on 100 of 100 instances.
#[test]
fn criterion_02_optimality_identities() {
    let mut checked = 0;
    for case in 0u64..100 {
        let n = 30 + (case as usize % 31);
        let a: Box<dyn SymOp> = if case % 2 == 0 {
            let sigma = 0.3 + 0.05 * (case as f64 % 20.0);
            Box::new(models::gen_z2(n, Snr::Sigma(sigma), 40_000 + case).unwrap().y)
        } else {
            Box::new(wigner(n, 50_000 + case))
        };
        let norm_a = spectral_norm(a.as_ref(), 1e-8 * n as f64).unwrap();
        let mut cfg = SolverConfig::for_dim(n).with_seed(case);
        cfg.grad_tol = 1e-8 * (n as f64).min(norm_a);
        let rep = solve_rank2(a.as_ref(), &cfg, None).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged, "case {case}");

        let grad_res = certify::grad_residual(a.as_ref(), &rep.point).unwrap();
        assert!(
            grad_res <= cfg.grad_tol,
            "case {case}: matrix-form residual {grad_res:.3e} > {:.3e}",
            cfg.grad_tol
        );
        let x = rep.point.column(0);
        let y = rep.point.column(1);
        let ax = a.apply(&x);
        let ay = a.apply(&y);
        let inf = (0..n)
            .map(|i| (ax[i] * y[i] - ay[i] * x[i]).abs())
            .fold(0.0f64, f64::max);
        assert!(
            inf <= 1e-8 * norm_a,
            "case {case}: hadamard identity {inf:.3e} > {:.3e}",
            1e-8 * norm_a
        );
        checked += 1;
    }
    println!("ACCEPTANCE 02 optimality identities: PASS ({checked}/100 instances)");
}

/// 3. Noiseless limit: n=100, sigma=0, 50 random starts all reach
///    `Q Q^T = z z^T` (gap <= 1e-6) with verdict rank-deficient-global.
#[test]
fn criterion_03_noiseless_exact_recovery() {
    let n = 100;
    let inst = models::gen_z2(n, Snr::Sigma(0.0), 0xc3).unwrap();
    let scale = n as f64 * spectral_norm(&inst.y, 1e-7 * n as f64).unwrap();
    let mut worst_gap = 0.0f64;
    for trial in 0..50 {
        let cfg = SolverConfig::for_dim(n).with_seed(trial);
        let rep = solve_rank2(&inst.y, &cfg, None).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged, "trial {trial}");
        let gap = recover::frobenius_gap(&rep.point, &inst.z);
        worst_gap = worst_gap.max(gap);
        assert!(gap <= 1e-6, "trial {trial}: gap {gap:.3e}");
        let cert = certify::dual_certificate_scaled(
            &inst.y,
            &rep.point,
            certify::DEFAULT_CERT_TOL,
            scale,
        )
        .unwrap();
        assert_eq!(
            cert.verdict,
            Verdict::RankDeficientGlobal,
            "trial {trial}: verdict {:?}",
            cert.verdict
        );
    }
    println!("ACCEPTANCE 03 noiseless exact recovery: PASS (50/50 starts, worst gap {worst_gap:.2e})");
}

/// 4. Strong-signal correlation floor: n=500, lambda=20, 50 trials x 5
///    restarts; every converged second-order point satisfies
///    correlation >= 1 - 1.1 * 16/20 = 0.12.
#[test]
fn criterion_04_strong_signal_correlation_floor() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Z2Sweep, 500);
    cfg.lambda_grid = vec![20.0];
    cfg.trials = 50;
    cfg.restarts = 5;
    cfg.master_seed = 0xc4;
    let out = harness::run_sweep(&cfg).unwrap();
    assert_eq!(out.records.len(), 250);
    let floor = 1.0 - 1.1 * 16.0 / 20.0;
    let mut converged = 0;
    let mut min_corr = f64::INFINITY;
    for r in &out.records {
        assert_ne!(r.status, "error", "trial {} restart {}", r.trial, r.restart);
        if r.status == "converged" {
            converged += 1;
            min_corr = min_corr.min(r.correlation);
            assert!(
                r.correlation >= floor,
                "trial {} restart {}: correlation {} below {floor}",
                r.trial,
                r.restart,
                r.correlation
            );
        }
    }
    assert!(
        converged >= 245,
        "only {converged}/250 solves converged to second-order points"
    );
    println!(
        "ACCEPTANCE 04 strong-signal floor: PASS ({converged}/250 converged, \
         min correlation {min_corr:.4} >= {floor})"
    );
}

/// 5. Exact-recovery regime: n=500. At sigma=4 recovery and uniqueness both
///    succeed in >= 90% of 50 trials; at sigma=30 recovery drops to <= 10%.
#[test]
fn criterion_05_exact_recovery_regime() {
    let n = 500;
    let trials = 50;

    let mut recovered = 0;
    let mut unique = 0;
    for trial in 0..trials {
        let seed = derive_seed(0xc5, 0, trial, u64::MAX);
        let inst = models::gen_z2(n, Snr::Sigma(4.0), seed).unwrap();
        let cfg = SolverConfig::for_dim(n).with_seed(derive_seed(0xc5, 0, trial, 0));
        let rep = solve_rank2(&inst.y, &cfg, None).unwrap();
        if recover::exact_recovery(&rep.point, &inst.z, recover::default_exact_tol(n)).unwrap() {
            recovered += 1;
        }
        if certify::uniqueness_check(&inst.y, &inst.z, certify::DEFAULT_CERT_TOL).unwrap() {
            unique += 1;
        }
    }
    assert!(
        recovered * 10 >= trials * 9,
        "recovery rate {recovered}/{trials} below 90% at sigma=4"
    );
    assert!(
        unique * 10 >= trials * 9,
        "uniqueness rate {unique}/{trials} below 90% at sigma=4"
    );

    let mut recovered_high = 0;
    for trial in 0..trials {
        let seed = derive_seed(0xc5, 1, trial, u64::MAX);
        let inst = models::gen_z2(n, Snr::Sigma(30.0), seed).unwrap();
        let cfg = SolverConfig::for_dim(n).with_seed(derive_seed(0xc5, 1, trial, 0));
        let rep = solve_rank2(&inst.y, &cfg, None).unwrap();
        if recover::exact_recovery(&rep.point, &inst.z, recover::default_exact_tol(n)).unwrap() {
            recovered_high += 1;
        }
    }
    assert!(
        recovered_high * 10 <= trials,
        "recovery rate {recovered_high}/{trials} above 10% at sigma=30"
    );
    println!(
        "ACCEPTANCE 05 exact-recovery regime: PASS (sigma=4: recovery {recovered}/{trials}, \
         uniqueness {unique}/{trials}; sigma=30: recovery {recovered_high}/{trials})"
    );
}

/// 6. Two-community regime above the constant-degree threshold:
///    n=1000, a=200, b=2 (signal 9.85 > 8): min correlation over
///    20 trials x 5 restarts >= 0.1.
#[test]
fn criterion_06_sbm_regime() {
    let (lab, _) = models::lambda_params(0.2, 0.002, 1000);
    assert!(lab > 8.0);
    let mut cfg = ExperimentConfig::new(ExperimentKind::SbmSweep, 1000);
    cfg.ab_grid = vec![(200.0, 2.0)];
    cfg.trials = 20;
    cfg.restarts = 5;
    cfg.master_seed = 0xc6;
    let out = harness::run_sweep(&cfg).unwrap();
    assert_eq!(out.records.len(), 100);
    let min_corr = out.summaries[0].min_correlation;
    assert!(
        min_corr >= 0.1,
        "min correlation {min_corr} below 0.1 in the a=200, b=2 regime"
    );
    println!(
        "ACCEPTANCE 06 sbm regime: PASS (signal {lab:.3} > 8, min correlation {min_corr:.4} \
         over 100 rows)"
    );
}

/// 7. Exhaustive falsification at n=12: over 200 noisy instances, every
///    rank-1 second-order critical point attains the exhaustive optimum.
#[test]
fn criterion_07_rank1_oracle_audit() {
    let mut total_points = 0usize;
    for trial in 0u64..200 {
        let sigma = 0.3 + 0.003 * trial as f64; // noise spread [0.3, 0.9)
        let inst = models::gen_z2(12, Snr::Sigma(sigma), derive_seed(0xc7, 0, trial, 0)).unwrap();
        let audit = oracle::audit_rank1_soc(&inst.y).unwrap();
        assert!(
            audit.counterexamples.is_empty(),
            "trial {trial}: rank-1 critical point below the exhaustive optimum"
        );
        total_points += audit.oracle.soc_rank1_points.len();
    }
    // at stronger noise the rank-2 optimum is occasionally genuinely rank 2
    // and the rank-1 critical set is empty; most instances must contribute
    assert!(total_points >= 190, "only {total_points} critical points over 200 instances");
    println!(
        "ACCEPTANCE 07 rank-1 oracle audit: PASS (200 instances, {total_points} critical \
         points, 0 counterexamples)"
    );
}

/// 8. Deterministic correlation guarantees: 50 noisy instances at n=200;
///    whenever the measured (gamma, c) hypotheses hold at a certified point,
///    both conclusions hold (partial bound with criticality slack, strong
///    bound at 1 - 8 gamma c).
#[test]
fn criterion_08_deterministic_guarantee_audit() {
    let n = 200;
    let sigma = 0.5;
    let mut audited = 0;
    let mut hyp_held = 0;
    for trial in 0u64..50 {
        let inst = models::gen_z2(n, Snr::Sigma(sigma), derive_seed(0xc8, 0, trial, 0)).unwrap();
        let cfg = SolverConfig::for_dim(n).with_seed(trial);
        let rep = solve_rank2(&inst.y, &cfg, None).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged, "trial {trial}");
        let noise = match inst.y.noise() {
            ranktwo::spectral::NoiseMatrix::Dense(d) => d.clone(),
            _ => unreachable!(),
        };
        let c = sigma / (n as f64).sqrt();
        let eps = cfg.hess_tol;
        let report =
            oracle::verify_deterministic_lemmas(&inst.z, &noise, None, c, &rep.point, eps)
                .unwrap();
        audited += 1;
        if report.partial_correlation.hypothesis_held {
            hyp_held += 1;
            assert!(
                report.partial_correlation.conclusion_held,
                "trial {trial}: squared correlation {:.4} below bound {:.4}",
                report.partial_correlation.actual, report.partial_correlation.bound
            );
        }
        if report.strong_correlation.hypothesis_held {
            assert!(
                report.strong_correlation.conclusion_held,
                "trial {trial}: correlation {:.4} below bound {:.4}",
                report.strong_correlation.actual, report.strong_correlation.bound
            );
        }
    }
    assert_eq!(hyp_held, audited, "measured hypotheses should hold by construction");
    println!(
        "ACCEPTANCE 08 guarantee audit: PASS ({audited} instances, conclusions held on all \
         certified points)"
    );
}

/// 9. Gaussian tail bound: n=300, 200 trials, t in {2, 4, 6}; the empirical
///    exceedance of `||W|| >= 2 sqrt(n) + t` stays within exp(-t^2/4) + 0.02.
#[test]
fn criterion_09_wigner_tails() {
    let rep = models::tail_check_wigner(300, 200, &[2.0, 4.0, 6.0], 0xc9).unwrap();
    for row in &rep.rows {
        assert!(
            row.freq_spec <= row.bound_spec + 0.02,
            "t={}: frequency {:.4} exceeds bound {:.4} + 0.02",
            row.t,
            row.freq_spec,
            row.bound_spec
        );
    }
    let detail: Vec<String> = rep
        .rows
        .iter()
        .map(|r| format!("t={}: {:.3} <= {:.3}", r.t, r.freq_spec, r.bound_spec + 0.02))
        .collect();
    println!("ACCEPTANCE 09 tail bound: PASS ({})", detail.join("; "));
}

/// 10. Relaxation sandwich everywhere it is checkable: exhaustive optimum
///     <= rank-2 cost <= SDP upper estimate <= n ||A|| + 1e-9 (exact first
///     inequality at n <= 12).
#[test]
fn criterion_10_relaxation_sandwich() {
    // small instances: full chain with the exhaustive oracle
    for trial in 0u64..10 {
        let n = 8 + 2 * (trial as usize % 3);
        let sigma = 0.5 + 0.2 * (trial % 4) as f64;
        let inst = models::gen_z2(n, Snr::Sigma(sigma), derive_seed(0xc10, 0, trial, 0)).unwrap();
        let mle = oracle::mle_bruteforce(&inst.y).unwrap();
        let cfg = SolverConfig::for_dim(n).with_seed(trial);
        let best = ranktwo::solver::multistart(&inst.y, 10, &cfg).unwrap().remove(0);
        let (lo, hi) = certify::sdp_value_estimate(&inst.y, &cfg).unwrap();
        let norm_a = spectral_norm(&inst.y, 1e-9 * n as f64).unwrap();
        let fp_slack = 1e-7 * n as f64 * norm_a;
        assert!(
            mle.best_value <= best.cost + fp_slack,
            "trial {trial}: exhaustive {} > rank-2 {}",
            mle.best_value,
            best.cost
        );
        assert!(best.cost <= hi + fp_slack, "trial {trial}: cost above upper bound");
        assert!(lo <= hi + 1e-12, "trial {trial}");
        assert!(
            hi <= n as f64 * norm_a + 1e-9,
            "trial {trial}: upper {hi} above n||A|| = {}",
            n as f64 * norm_a
        );
    }
    // larger instances: skip the exhaustive oracle, keep the rest
    for trial in 0u64..4 {
        let n = 60 + 40 * (trial as usize % 2);
        let inst = models::gen_z2(n, Snr::Sigma(2.0), derive_seed(0xc10, 1, trial, 0)).unwrap();
        let cfg = SolverConfig::for_dim(n).with_seed(trial);
        let rep = solve_rank2(&inst.y, &cfg, None).unwrap();
        let norm_a = spectral_norm(&inst.y, 1e-8 * n as f64).unwrap();
        let (lo, hi) = certify::sdp_value_estimate(&inst.y, &cfg).unwrap();
        let fp_slack = 1e-7 * n as f64 * norm_a;
        assert!(rep.cost <= hi + fp_slack, "trial {trial}");
        assert!(lo <= n as f64 * norm_a + 1e-9, "trial {trial}");
        assert!(hi <= n as f64 * norm_a + 1e-9, "trial {trial}");
    }
    println!("ACCEPTANCE 10 relaxation sandwich: PASS (10 exhaustive + 4 large instances)");
}

/// 11. Bit-exact determinism: the same sweep with different worker counts
///     (and a re-run with the same count) produces identical tables.
#[test]
fn criterion_11_determinism_across_workers() {
    let make = |workers: usize| {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Z2Sweep, 80);
        cfg.lambda_grid = vec![6.0, 12.0];
        cfg.trials = 4;
        cfg.restarts = 2;
        cfg.master_seed = 0xc11;
        cfg.workers = workers;
        cfg
    };
    let one = harness::run_sweep(&make(1)).unwrap();
    let four = harness::run_sweep(&make(4)).unwrap();
    let again = harness::run_sweep(&make(4)).unwrap();
    assert_eq!(one.records.len(), 16);
    assert!(
        records_deterministic_eq(&one.records, &four.records),
        "tables diverge between 1 and 4 workers"
    );
    assert!(
        records_deterministic_eq(&four.records, &again.records),
        "tables diverge across identical re-runs"
    );
    // serialized forms agree byte-for-byte on every reproducible column
    let strip_wall = |csv: &str| -> String {
        csv.lines()
            .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap_or_default())
            .collect::<Vec<_>>()
            .join("\n")
    };
    let csv1 = strip_wall(&harness::records_to_csv(&one.records));
    let csv4 = strip_wall(&harness::records_to_csv(&four.records));
    assert_eq!(csv1, csv4);
    println!("ACCEPTANCE 11 determinism: PASS (16 rows bit-identical across worker counts)");
}
