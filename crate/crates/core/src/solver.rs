//! Riemannian trust-region solver for `max Tr(Q^T A Q)` over unit-row `Q`,
//! at rank 2 (product of circles) and at general rank p (oblique manifold).
//!
//! The outer loop is a classical ratio-gated trust region; the subproblem is
//! solved by truncated CG in the tangent space. When the gradient residual
//! drops below tolerance the smallest eigenvalue of the curvature operator is
//! computed explicitly; a negative eigenvalue triggers a line-searched escape
//! along that direction, so a `Converged` report certifies both residuals.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::{
    self, random_oblique, retract, CirclePoint, HessianForm, ObliquePoint, TangentCoeffs,
};
use crate::spectral::{extreme_eigenpair, EigOptions, Extreme, SymOp};
use crate::{Error, Result};

/// Trust-region configuration. Tolerances are absolute: `grad_tol` bounds
/// `||(ddiag(A Q Q^T) - A) Q||_F` and `hess_tol` bounds the allowed negative
/// part of the curvature spectrum; both default to dimension-scaled values
/// because the residuals grow with `n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grad_tol: f64,
    pub hess_tol: f64,
    pub max_outer: usize,
    pub tcg_max: usize,
    pub trust_init: f64,
    pub trust_max: f64,
    pub seed: u64,
}

impl SolverConfig {
    /// Defaults for dimension `n`: `grad_tol = 1e-8 n`, `hess_tol = 1e-6 n`,
    /// `max_outer = 1000`, `tcg_max = 4n`.
    pub fn for_dim(n: usize) -> Self {
        let trust_max = std::f64::consts::PI * (n as f64).sqrt();
        SolverConfig {
            grad_tol: 1e-8 * n as f64,
            hess_tol: 1e-6 * n as f64,
            max_outer: 1000,
            tcg_max: 4 * n,
            trust_init: trust_max / 8.0,
            trust_max,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("grad_tol", self.grad_tol),
            ("hess_tol", self.hess_tol),
            ("trust_init", self.trust_init),
            ("trust_max", self.trust_max),
        ];
        for (name, v) in pos {
            if !(v > 0.0) {
                return Err(Error::InvalidParam(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.max_outer == 0 || self.tcg_max == 0 {
            return Err(Error::InvalidParam("iteration limits must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    IterationLimit,
    Stagnated,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Converged => "converged",
            SolveStatus::IterationLimit => "iteration-limit",
            SolveStatus::Stagnated => "stagnated",
        };
        f.write_str(s)
    }
}

/// Solver output at rank 2. `Converged` guarantees
/// `grad_residual <= grad_tol` and `hess_min_eig >= -hess_tol`.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub point: CirclePoint,
    pub cost: f64,
    pub grad_residual: f64,
    /// Smallest eigenvalue of `ddiag(A Q Q^T) - A o (Q Q^T)` at the final
    /// point (NaN only if the eigensolver failed on a non-converged exit).
    pub hess_min_eig: f64,
    pub outer_iters: usize,
    pub matvecs: usize,
    pub status: SolveStatus,
}

impl SolveReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "cost": self.cost,
            "grad_residual": self.grad_residual,
            "hess_min_eig": if self.hess_min_eig.is_nan() {
                serde_json::Value::Null
            } else {
                serde_json::json!(self.hess_min_eig)
            },
            "outer_iters": self.outer_iters,
            "matvecs": self.matvecs,
            "status": self.status.to_string(),
            "point": circle::point_to_string(&self.point),
        })
    }
}

/// Rank-p analogue of [`SolveReport`]. At `p = 2` the solve delegates to the
/// circle-parametrized path, so the two agree exactly for equal seeds.
#[derive(Debug, Clone)]
pub struct RankpReport {
    pub point: ObliquePoint,
    pub cost: f64,
    pub grad_residual: f64,
    /// Smallest tangent-restricted curvature eigenvalue (see `ObliqueHessOp`).
    pub hess_min_eig: f64,
    pub outer_iters: usize,
    pub matvecs: usize,
    pub status: SolveStatus,
}

/// Matvec-counting wrapper so reports can carry the work done.
struct CountingOp<'a> {
    inner: &'a dyn SymOp,
    count: AtomicUsize,
}

impl<'a> CountingOp<'a> {
    fn new(inner: &'a dyn SymOp) -> Self {
        CountingOp {
            inner,
            count: AtomicUsize::new(0),
        }
    }

    fn total(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }
}

impl SymOp for CountingOp<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.apply_into(v, out);
    }

    fn diag(&self) -> Vec<f64> {
        self.inner.diag()
    }
}

/// State recomputed after every accepted step.
struct CircleState {
    q: CirclePoint,
    aq: Vec<[f64; 2]>,
    cost: f64,
    /// `||(ddiag(A Q Q^T) - A) Q||_F`, the matrix-form residual.
    grad_residual: f64,
    /// Per-row gradient coefficients (norm is twice the residual above).
    rgrad: TangentCoeffs,
}

impl CircleState {
    fn at(a: &dyn SymOp, q: CirclePoint) -> Result<Self> {
        let aq = circle::apply_to_point(a, &q);
        let mut cost = 0.0;
        let mut res2 = 0.0;
        for (r, g) in q.rows().iter().zip(&aq) {
            let d = r[0] * g[0] + r[1] * g[1];
            cost += d;
            let e0 = d * r[0] - g[0];
            let e1 = d * r[1] - g[1];
            res2 += e0 * e0 + e1 * e1;
        }
        if !cost.is_finite() {
            return Err(Error::NonFiniteCost);
        }
        let rgrad = circle::rgrad_from_aq(&q, &aq);
        Ok(CircleState {
            q,
            aq,
            cost,
            grad_residual: res2.sqrt(),
            rgrad,
        })
    }
}

fn eig_opts_for(cfg: &SolverConfig, salt: u64) -> EigOptions {
    EigOptions {
        tol: (cfg.hess_tol / 4.0).max(1e-12),
        max_iter: 0,
        seed: cfg.seed ^ 0xc2b2_ae3d_27d4_eb4f ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15),
    }
}

/// Maximize `Tr(Q^T A Q)` over the product of circles from `init` (or a
/// seeded random point). Returns a report with the best point found; only a
/// non-finite cost is an error.
pub fn solve_rank2(
    a: &dyn SymOp,
    cfg: &SolverConfig,
    init: Option<CirclePoint>,
) -> Result<SolveReport> {
    cfg.validate()?;
    let n = a.dim();
    if let Some(q) = &init {
        if q.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: q.n(),
            });
        }
    }
    let counting = CountingOp::new(a);
    let a: &dyn SymOp = &counting;

    let q0 = init.unwrap_or_else(|| circle::random_point_seeded(n, cfg.seed));
    let mut state = CircleState::at(a, q0)?;
    let mut radius = cfg.trust_init.min(cfg.trust_max);
    let mut status = SolveStatus::IterationLimit;
    let mut hess_min: f64 = f64::NAN;
    let mut outer = 0;

    while outer < cfg.max_outer {
        outer += 1;

        if state.grad_residual <= cfg.grad_tol {
            let hform = HessianForm::from_aq(a, &state.q, &state.aq);
            let eig = extreme_eigenpair(&hform, Extreme::Smallest, &eig_opts_for(cfg, outer as u64))?;
            hess_min = eig.value;
            if eig.value >= -cfg.hess_tol {
                status = SolveStatus::Converged;
                break;
            }
            // Strict saddle: move along the negative-curvature direction.
            match escape_step(a, &state, &TangentCoeffs(eig.vector), -eig.value, radius)? {
                Some(new_state) => {
                    state = new_state;
                    continue;
                }
                None => {
                    status = SolveStatus::Stagnated;
                    break;
                }
            }
        }

        let hform = HessianForm::from_aq(a, &state.q, &state.aq);
        let step = tcg(&hform, &state.rgrad.0, radius, cfg.tcg_max);
        if step.predicted_increase <= 0.0 || step.direction.iter().all(|&x| x == 0.0) {
            radius *= 0.25;
            if radius < 1e-13 * cfg.trust_max {
                status = SolveStatus::Stagnated;
                break;
            }
            continue;
        }
        let candidate = retract(&state.q, &TangentCoeffs(step.direction), 1.0);
        let cand_state = CircleState::at(a, candidate)?;
        // Near optima both differences sit at the cost's roundoff floor;
        // the regularizer keeps the ratio meaningful there.
        let reg = 100.0 * f64::EPSILON * state.cost.abs().max(1.0);
        let rho = (cand_state.cost - state.cost + reg) / (step.predicted_increase + reg);
        if rho >= 0.1 {
            state = cand_state;
        }
        if rho < 0.25 {
            radius *= 0.25;
        } else if rho > 0.75 && step.hit_boundary {
            radius = (2.0 * radius).min(cfg.trust_max);
        }
        if radius < 1e-13 * cfg.trust_max {
            status = SolveStatus::Stagnated;
            break;
        }
    }

    if hess_min.is_nan() || status != SolveStatus::Converged {
        let hform = HessianForm::from_aq(a, &state.q, &state.aq);
        hess_min = match extreme_eigenpair(&hform, Extreme::Smallest, &eig_opts_for(cfg, 0)) {
            Ok(e) => e.value,
            Err(Error::EigenNoConvergence { value, .. }) => value,
            Err(e) => return Err(e),
        };
        if status != SolveStatus::Converged
            && state.grad_residual <= cfg.grad_tol
            && hess_min >= -cfg.hess_tol
        {
            status = SolveStatus::Converged;
        }
    }

    Ok(SolveReport {
        cost: state.cost,
        grad_residual: state.grad_residual,
        hess_min_eig: hess_min,
        outer_iters: outer,
        matvecs: counting.total(),
        status,
        point: state.q,
    })
}

/// Backtracking line search along an (approximate) negative-curvature
/// direction at a first-order critical point. Both signs are tried; accepts
/// a step that realizes at least a quarter of the model increase
/// `|lambda| t^2`, or any strict increase as a last resort.
fn escape_step(
    a: &dyn SymOp,
    state: &CircleState,
    dir: &TangentCoeffs,
    curvature: f64,
    radius: f64,
) -> Result<Option<CircleState>> {
    let t0 = radius.min(1.0);
    let mut fallback: Option<(f64, CirclePoint)> = None;
    for sign in [1.0, -1.0] {
        let mut t = t0;
        while t >= 1e-10 {
            let cand = retract(&state.q, dir, sign * t);
            let c = circle::cost(a, &cand)?;
            if c > state.cost + 0.25 * curvature * t * t {
                return Ok(Some(CircleState::at(a, cand)?));
            }
            if c > state.cost && fallback.as_ref().map_or(true, |(fc, _)| c > *fc) {
                fallback = Some((c, cand));
            }
            t *= 0.5;
        }
    }
    match fallback {
        Some((_, q)) => Ok(Some(CircleState::at(a, q)?)),
        None => Ok(None),
    }
}

struct TcgStep {
    direction: Vec<f64>,
    predicted_increase: f64,
    hit_boundary: bool,
}

/// Steihaug–Toint truncated CG on the tangent coefficients.
///
/// Minimizes the model of `-f`: `m(s) = -<rgrad, s> + s^T H s` (the curvature
/// operator of `-f` is `2H`), stopping at the trust-region boundary, on
/// negative curvature, or at the usual superlinear residual cut.
fn tcg(h: &dyn SymOp, rgrad: &[f64], radius: f64, max_inner: usize) -> TcgStep {
    let n = rgrad.len();
    let g: Vec<f64> = rgrad.iter().map(|x| -x).collect(); // gradient of -f
    let mut s = vec![0.0; n];
    let mut r = g.clone();
    let mut d: Vec<f64> = r.iter().map(|x| -x).collect();
    let r0 = norm(&r);
    let stop = r0 * (0.1_f64).min(r0.sqrt());
    let mut rr = r0 * r0;
    let mut hit_boundary = false;

    if r0 > 0.0 {
        for _ in 0..max_inner {
            let mut bd = h.apply(&d);
            for b in bd.iter_mut() {
                *b *= 2.0; // curvature operator of -f
            }
            let dbd = dot(&d, &bd);
            if dbd <= 0.0 {
                let tau = boundary_tau(&s, &d, radius);
                axpy(&mut s, tau, &d);
                hit_boundary = true;
                break;
            }
            let alpha = rr / dbd;
            let snorm2 = dot(&s, &s);
            let sd = dot(&s, &d);
            let dd = dot(&d, &d);
            if snorm2 + 2.0 * alpha * sd + alpha * alpha * dd >= radius * radius {
                let tau = boundary_tau(&s, &d, radius);
                axpy(&mut s, tau, &d);
                hit_boundary = true;
                break;
            }
            axpy(&mut s, alpha, &d);
            axpy(&mut r, alpha, &bd);
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() <= stop {
                break;
            }
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..n {
                d[i] = -r[i] + beta * d[i];
            }
        }
    }

    // model value of -f at s: <g, s> + s^T H s
    let hs = h.apply(&s);
    let model = dot(&g, &s) + dot(&s, &hs);
    TcgStep {
        direction: s,
        predicted_increase: -model,
        hit_boundary,
    }
}

fn boundary_tau(s: &[f64], d: &[f64], radius: f64) -> f64 {
    let sd = dot(s, d);
    let dd = dot(d, d);
    let ss = dot(s, s);
    if dd == 0.0 {
        return 0.0;
    }
    let disc = (sd * sd + dd * (radius * radius - ss)).max(0.0);
    (-sd + disc.sqrt()) / dd
}

/// Independent trial solves with per-trial seeds `cfg.seed ^ trial`, sorted
/// by cost descending (ties keep the lower trial index first). The result is
/// independent of how many workers execute the trials.
pub fn multistart(a: &dyn SymOp, k: usize, cfg: &SolverConfig) -> Result<Vec<SolveReport>> {
    if k == 0 {
        return Err(Error::InvalidParam("multistart needs k >= 1".into()));
    }
    let mut reports = (0..k)
        .into_par_iter()
        .map(|trial| {
            let trial_cfg = cfg.clone().with_seed(cfg.seed ^ trial as u64);
            solve_rank2(a, &trial_cfg, None)
        })
        .collect::<Result<Vec<_>>>()?;
    // stable sort: equal costs stay in trial order
    reports.sort_by(|a, b| b.cost.partial_cmp(&a.cost).unwrap_or(std::cmp::Ordering::Equal));
    Ok(reports)
}

// ---------------------------------------------------------------------------
// Rank-p path
// ---------------------------------------------------------------------------

/// Tangent-restricted curvature operator at a rank-p point, acting on
/// flattened `n x p` matrices: `U -> P(ddiag(A Q Q^T) U - A U) P` scaled by 2,
/// where `P` projects each row onto the tangent of its sphere. Its negative
/// eigenvalues are exactly the negative curvature directions of the
/// maximization; the normal space contributes zeros only.
pub struct ObliqueHessOp<'a> {
    a: &'a dyn SymOp,
    q: &'a ObliquePoint,
    d: Vec<f64>,
}

impl<'a> ObliqueHessOp<'a> {
    pub fn new(a: &'a dyn SymOp, q: &'a ObliquePoint) -> Result<Self> {
        if a.dim() != q.n() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                got: q.n(),
            });
        }
        let d = alignment(a, q);
        Ok(ObliqueHessOp { a, q, d })
    }
}

fn project_rows(q: &ObliquePoint, u: &mut [f64]) {
    let p = q.p();
    for i in 0..q.n() {
        let row_q = q.row(i);
        let row_u = &mut u[i * p..(i + 1) * p];
        let c: f64 = row_q.iter().zip(row_u.iter()).map(|(a, b)| a * b).sum();
        for (x, qv) in row_u.iter_mut().zip(row_q) {
            *x -= c * qv;
        }
    }
}

/// `diag(A Q Q^T)`: row-wise inner products of `A Q` with `Q`.
fn alignment(a: &dyn SymOp, q: &ObliquePoint) -> Vec<f64> {
    let n = q.n();
    let p = q.p();
    let mut d = vec![0.0; n];
    for k in 0..p {
        let col = q.column(k);
        let acol = a.apply(&col);
        for i in 0..n {
            d[i] += acol[i] * q.row(i)[k];
        }
    }
    d
}

impl SymOp for ObliqueHessOp<'_> {
    fn dim(&self) -> usize {
        self.q.n() * self.q.p()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.q.n();
        let p = self.q.p();
        let mut u = v.to_vec();
        project_rows(self.q, &mut u);
        // columns of A U
        let mut col = vec![0.0; n];
        let mut acol = vec![0.0; n];
        for k in 0..p {
            for i in 0..n {
                col[i] = u[i * p + k];
            }
            self.a.apply_into(&col, &mut acol);
            for i in 0..n {
                out[i * p + k] = 2.0 * (self.d[i] * u[i * p + k] - acol[i]);
            }
        }
        project_rows(self.q, out);
    }

    fn diag(&self) -> Vec<f64> {
        // Only used by generic fallbacks; compute via basis products.
        let dim = self.dim();
        let mut e = vec![0.0; dim];
        let mut col = vec![0.0; dim];
        let mut d = vec![0.0; dim];
        for j in 0..dim {
            e[j] = 1.0;
            self.apply_into(&e, &mut col);
            e[j] = 0.0;
            d[j] = col[j];
        }
        d
    }
}

struct ObliqueState {
    q: ObliquePoint,
    cost: f64,
    grad_residual: f64,
    /// Flattened projected gradient of the maximization, rows tangent.
    grad: Vec<f64>,
}

impl ObliqueState {
    fn at(a: &dyn SymOp, q: ObliquePoint) -> Result<Self> {
        let n = q.n();
        let p = q.p();
        let mut aq = vec![0.0; n * p];
        for k in 0..p {
            let col = q.column(k);
            let acol = a.apply(&col);
            for i in 0..n {
                aq[i * p + k] = acol[i];
            }
        }
        let mut cost = 0.0;
        let mut res2 = 0.0;
        let mut grad = vec![0.0; n * p];
        for i in 0..n {
            let rq = q.row(i);
            let rg = &aq[i * p..(i + 1) * p];
            let d: f64 = rq.iter().zip(rg).map(|(a, b)| a * b).sum();
            cost += d;
            for k in 0..p {
                let e = rg[k] - d * rq[k];
                grad[i * p + k] = 2.0 * e;
                res2 += e * e;
            }
        }
        if !cost.is_finite() {
            return Err(Error::NonFiniteCost);
        }
        Ok(ObliqueState {
            q,
            cost,
            grad_residual: res2.sqrt(),
            grad,
        })
    }
}

fn retract_oblique(q: &ObliquePoint, u: &[f64], t: f64) -> Result<ObliquePoint> {
    let data: Vec<f64> = q
        .data()
        .iter()
        .zip(u)
        .map(|(x, du)| x + t * du)
        .collect();
    ObliquePoint::from_rows(q.n(), q.p(), data)
}

/// Rank-p trust region on the oblique manifold. `p = 2` delegates to
/// [`solve_rank2`] so the two entry points agree exactly.
pub fn solve_rankp(a: &dyn SymOp, p: usize, cfg: &SolverConfig) -> Result<RankpReport> {
    let n = a.dim();
    if p < 2 || p > n.max(2) {
        return Err(Error::InvalidParam(format!(
            "rank p must satisfy 2 <= p <= n, got p = {p}, n = {n}"
        )));
    }
    if p == 2 {
        let r = solve_rank2(a, cfg, None)?;
        return Ok(RankpReport {
            point: r.point.to_oblique(),
            cost: r.cost,
            grad_residual: r.grad_residual,
            hess_min_eig: r.hess_min_eig,
            outer_iters: r.outer_iters,
            matvecs: r.matvecs,
            status: r.status,
        });
    }
    cfg.validate()?;
    let counting = CountingOp::new(a);
    let a: &dyn SymOp = &counting;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let q0 = random_oblique(n, p, &mut rng)?;
    let mut state = ObliqueState::at(a, q0)?;
    let mut radius = cfg.trust_init.min(cfg.trust_max);
    let mut status = SolveStatus::IterationLimit;
    let mut hess_min = f64::NAN;
    let mut outer = 0;

    while outer < cfg.max_outer {
        outer += 1;

        if state.grad_residual <= cfg.grad_tol {
            let hop = ObliqueHessOp::new(a, &state.q)?;
            let eig = extreme_eigenpair(&hop, Extreme::Smallest, &eig_opts_for(cfg, outer as u64))?;
            // operator already carries the factor 2; report in H units
            hess_min = eig.value / 2.0;
            if hess_min >= -cfg.hess_tol {
                status = SolveStatus::Converged;
                break;
            }
            match escape_oblique(a, &state, &eig.vector, -hess_min, radius)? {
                Some(s) => {
                    state = s;
                    continue;
                }
                None => {
                    status = SolveStatus::Stagnated;
                    break;
                }
            }
        }

        let hop = ObliqueHessOp::new(a, &state.q)?;
        // tCG minimizes -f; its gradient is -grad. The curvature operator
        // already includes the factor 2, so halve it for the shared kernel.
        let half = HalfOp(&hop);
        let rgrad_like: Vec<f64> = state.grad.clone();
        let step = tcg(&half, &rgrad_like, radius, cfg.tcg_max);
        if step.predicted_increase <= 0.0 || step.direction.iter().all(|&x| x == 0.0) {
            radius *= 0.25;
            if radius < 1e-13 * cfg.trust_max {
                status = SolveStatus::Stagnated;
                break;
            }
            continue;
        }
        let cand = retract_oblique(&state.q, &step.direction, 1.0)?;
        let cand_state = ObliqueState::at(a, cand)?;
        let reg = 100.0 * f64::EPSILON * state.cost.abs().max(1.0);
        let rho = (cand_state.cost - state.cost + reg) / (step.predicted_increase + reg);
        if rho >= 0.1 {
            state = cand_state;
        }
        if rho < 0.25 {
            radius *= 0.25;
        } else if rho > 0.75 && step.hit_boundary {
            radius = (2.0 * radius).min(cfg.trust_max);
        }
        if radius < 1e-13 * cfg.trust_max {
            status = SolveStatus::Stagnated;
            break;
        }
    }

    if hess_min.is_nan() || status != SolveStatus::Converged {
        let hop = ObliqueHessOp::new(a, &state.q)?;
        hess_min = match extreme_eigenpair(&hop, Extreme::Smallest, &eig_opts_for(cfg, 0)) {
            Ok(e) => e.value / 2.0,
            Err(Error::EigenNoConvergence { value, .. }) => value / 2.0,
            Err(e) => return Err(e),
        };
        if status != SolveStatus::Converged
            && state.grad_residual <= cfg.grad_tol
            && hess_min >= -cfg.hess_tol
        {
            status = SolveStatus::Converged;
        }
    }

    Ok(RankpReport {
        cost: state.cost,
        grad_residual: state.grad_residual,
        hess_min_eig: hess_min,
        outer_iters: outer,
        matvecs: counting.total(),
        status,
        point: state.q,
    })
}

/// `0.5 * A`, to reuse the rank-2 tCG kernel (which doubles its operator).
struct HalfOp<'a>(&'a dyn SymOp);

impl SymOp for HalfOp<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.0.apply_into(v, out);
        for o in out.iter_mut() {
            *o *= 0.5;
        }
    }

    fn diag(&self) -> Vec<f64> {
        self.0.diag().into_iter().map(|d| d * 0.5).collect()
    }
}

fn escape_oblique(
    a: &dyn SymOp,
    state: &ObliqueState,
    dir: &[f64],
    curvature: f64,
    radius: f64,
) -> Result<Option<ObliqueState>> {
    let mut u = dir.to_vec();
    project_rows(&state.q, &mut u);
    let un = norm(&u);
    if un == 0.0 {
        return Ok(None);
    }
    for x in u.iter_mut() {
        *x /= un;
    }
    let t0 = radius.min(1.0);
    let mut fallback: Option<(f64, ObliquePoint)> = None;
    for sign in [1.0, -1.0] {
        let mut t = t0;
        while t >= 1e-10 {
            let cand = retract_oblique(&state.q, &u, sign * t)?;
            let c = circle::cost_oblique(a, &cand)?;
            if c > state.cost + 0.25 * curvature * t * t {
                return Ok(Some(ObliqueState::at(a, cand)?));
            }
            if c > state.cost && fallback.as_ref().map_or(true, |(fc, _)| c > *fc) {
                fallback = Some((c, cand));
            }
            t *= 0.5;
        }
    }
    match fallback {
        Some((_, q)) => Ok(Some(ObliqueState::at(a, q)?)),
        None => Ok(None),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}
