use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::ops::{DenseSym, ScaledOp, SymOp};
use crate::{Error, Result};

/// Which end of the spectrum to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Smallest,
    Largest,
}

/// One converged eigenpair.
#[derive(Debug, Clone)]
pub struct EigResult {
    pub value: f64,
    /// Unit eigenvector.
    pub vector: Vec<f64>,
    /// Explicit `||A v - value * v||_2` at return.
    pub residual: f64,
    /// Matrix–vector products consumed (dense path: Jacobi sweeps).
    pub iterations: usize,
}

/// Eigensolver knobs. `max_iter = 0` picks a dimension-dependent budget.
#[derive(Debug, Clone)]
pub struct EigOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Seed for the start vector; fixed so repeated calls are bit-identical.
    pub seed: u64,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions {
            tol: 1e-10,
            max_iter: 0,
            seed: 0x9e37_79b9_7f4a_7c15,
        }
    }
}

impl EigOptions {
    pub fn with_tol(tol: f64) -> Self {
        EigOptions {
            tol,
            ..Default::default()
        }
    }

    fn budget(&self, n: usize) -> usize {
        if self.max_iter > 0 {
            self.max_iter
        } else {
            (8 * n).clamp(800, 40_000)
        }
    }
}

/// Dimension below which operators are densified and solved directly.
const DENSE_CUTOFF: usize = 64;

/// Extreme eigenpair of a symmetric operator.
///
/// Small problems are densified and solved by cyclic Jacobi; larger ones run
/// restarted Lanczos with full reorthogonalization against the stored basis.
/// On success the returned residual satisfies `residual <= opts.tol`;
/// non-convergence is reported as an error carrying the best estimate.
pub fn extreme_eigenpair(op: &dyn SymOp, which: Extreme, opts: &EigOptions) -> Result<EigResult> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::InvalidParam("operator dimension must be >= 1".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParam("eigensolver tol must be > 0".into()));
    }
    if n == 1 {
        let value = op.apply(&[1.0])[0];
        return Ok(EigResult {
            value,
            vector: vec![1.0],
            residual: 0.0,
            iterations: 1,
        });
    }
    if n <= DENSE_CUTOFF {
        return dense_extreme(op, which, opts);
    }
    match which {
        Extreme::Largest => lanczos_largest(op, opts),
        Extreme::Smallest => {
            let neg = ScaledOp {
                inner: op,
                scale: -1.0,
                offset: 0.0,
            };
            let mut r = lanczos_largest(&neg, opts)?;
            r.value = -r.value;
            Ok(r)
        }
    }
}

/// `max(|lambda_min|, |lambda_max|)` via two extreme eigenpairs.
pub fn spectral_norm(op: &dyn SymOp, tol: f64) -> Result<f64> {
    let opts = EigOptions::with_tol(tol);
    let hi = extreme_eigenpair(op, Extreme::Largest, &opts)?;
    let lo = extreme_eigenpair(op, Extreme::Smallest, &opts)?;
    Ok(hi.value.abs().max(lo.value.abs()))
}

fn dense_extreme(op: &dyn SymOp, which: Extreme, opts: &EigOptions) -> Result<EigResult> {
    let a = op.to_dense();
    let (values, vectors, sweeps) = jacobi(&a);
    let idx = match which {
        Extreme::Smallest => 0,
        Extreme::Largest => values.len() - 1,
    };
    let vector = vectors[idx].clone();
    let value = values[idx];
    let av = op.apply(&vector);
    let residual = av
        .iter()
        .zip(&vector)
        .map(|(x, v)| (x - value * v).powi(2))
        .sum::<f64>()
        .sqrt();
    if residual > opts.tol {
        return Err(Error::EigenNoConvergence {
            value,
            residual,
            iterations: sweeps,
        });
    }
    Ok(EigResult {
        value,
        vector,
        residual,
        iterations: sweeps,
    })
}

/// Full spectrum of a dense symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in ascending order with matching unit eigenvectors.
pub fn dense_eigen_jacobi(a: &DenseSym) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (values, vectors, _) = jacobi(a);
    (values, vectors)
}

fn jacobi(a: &DenseSym) -> (Vec<f64>, Vec<Vec<f64>>, usize) {
    let n = a.dim();
    let mut m: Vec<f64> = (0..n * n).map(|k| a.get(k / n, k % n)).collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let fro2: f64 = m.iter().map(|x| x * x).sum();
    let stop = 1e-30 * fro2.max(f64::MIN_POSITIVE);
    let mut sweeps = 0;
    while sweeps < 60 {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off <= stop {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // rows/cols p and q
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].partial_cmp(&m[j * n + j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&j| (0..n).map(|i| v[i * n + j]).collect())
        .collect();
    (values, vectors, sweeps)
}

/// Lanczos block length before a restart with the best Ritz vector.
const BLOCK: usize = 96;
const CHECK_EVERY: usize = 8;

fn lanczos_largest(op: &dyn SymOp, opts: &EigOptions) -> Result<EigResult> {
    let n = op.dim();
    let budget = opts.budget(n);
    let block = BLOCK.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    normalize(&mut start);

    let mut matvecs = 0usize;
    let mut best: Option<(f64, Vec<f64>, f64)> = None; // (value, vector, residual)

    while matvecs < budget {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(block);
        let mut alphas: Vec<f64> = Vec::with_capacity(block);
        let mut betas: Vec<f64> = Vec::with_capacity(block);

        let mut vcur = start.clone();
        basis.push(vcur.clone());
        let mut w = op.apply(&vcur);
        matvecs += 1;
        let mut alpha = dot(&w, &vcur);
        alphas.push(alpha);
        axpy(&mut w, -alpha, &vcur);

        loop {
            reorthogonalize(&mut w, &basis);
            let beta = norm(&w);
            let k = alphas.len();

            let near_breakdown = beta <= 1e-13 * alpha.abs().max(1.0);
            if k % CHECK_EVERY == 0 || k == block || near_breakdown || matvecs + 2 > budget {
                let (_theta, s) = tridiag_extreme_largest(&alphas, &betas);
                let bound = beta * s[k - 1].abs();
                let mut ritz = combine(&basis, &s);
                normalize(&mut ritz);
                if bound <= 0.5 * opts.tol || near_breakdown || matvecs + 2 > budget || k == block {
                    let av = op.apply(&ritz);
                    matvecs += 1;
                    let rq = dot(&av, &ritz);
                    let residual = av
                        .iter()
                        .zip(&ritz)
                        .map(|(x, v)| (x - rq * v).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    let better = best.as_ref().map_or(true, |(bv, _, br)| {
                        rq > *bv || (residual < *br && rq >= *bv - opts.tol)
                    });
                    if better {
                        best = Some((rq, ritz.clone(), residual));
                    }
                    if residual <= opts.tol {
                        let (value, vector, residual) = best.unwrap();
                        return Ok(EigResult {
                            value,
                            vector,
                            residual,
                            iterations: matvecs,
                        });
                    }
                    if near_breakdown {
                        // Invariant subspace that missed the target: restart fresh.
                        start = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                        normalize(&mut start);
                        break;
                    }
                    if k == block || matvecs + 2 > budget {
                        start = ritz;
                        break;
                    }
                }
            }
            if matvecs >= budget {
                break;
            }

            let vnext: Vec<f64> = w.iter().map(|x| x / beta).collect();
            betas.push(beta);
            basis.push(vnext.clone());
            w = op.apply(&vnext);
            matvecs += 1;
            alpha = dot(&w, &vnext);
            alphas.push(alpha);
            axpy(&mut w, -alpha, &vnext);
            axpy(&mut w, -beta, &vcur);
            vcur = vnext;
        }
    }

    let (value, _, residual) = best.unwrap_or((f64::NAN, Vec::new(), f64::INFINITY));
    Err(Error::EigenNoConvergence {
        value,
        residual,
        iterations: matvecs,
    })
}

/// Largest eigenpair of the symmetric tridiagonal with diagonal `alphas` and
/// off-diagonal `betas`, via Jacobi on the densified (small) matrix.
fn tridiag_extreme_largest(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let k = alphas.len();
    if k == 1 {
        return (alphas[0], vec![1.0]);
    }
    let t = DenseSym::from_fn(k, |i, j| {
        if i == j {
            alphas[i]
        } else if j == i + 1 {
            betas[i]
        } else {
            0.0
        }
    });
    let (values, vectors) = dense_eigen_jacobi(&t);
    (values[k - 1], vectors[k - 1].clone())
}

fn reorthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // Two classical Gram-Schmidt passes.
    for _ in 0..2 {
        for b in basis {
            let c = dot(w, b);
            axpy(w, -c, b);
        }
    }
}

fn combine(basis: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let n = basis[0].len();
    let mut out = vec![0.0; n];
    for (b, &c) in basis.iter().zip(coeffs) {
        axpy(&mut out, c, b);
    }
    out
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

fn normalize(v: &mut [f64]) {
    let nrm = norm(v);
    if nrm > 0.0 {
        for x in v.iter_mut() {
            *x /= nrm;
        }
    }
}
