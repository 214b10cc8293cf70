//! Recovery metrics and estimators: correlation of a feasible point with
//! planted signs, Gaussian rounding to a sign vector, the exact-recovery
//! test, and the top-eigenvector baseline.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::circle::CirclePoint;
use crate::spectral::{extreme_eigenpair, EigOptions, Extreme, SymOp};
use crate::{Error, Result};

/// Per-solution recovery summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    /// `||Q^T z||_2 / n`, in `[0, 1]`.
    pub correlation: f64,
    /// `|<z_hat, z>| / n` for the rounded estimator, in `[0, 1]`.
    pub overlap: f64,
    pub exact: bool,
    /// `||Q Q^T - z z^T||_F`.
    pub frobenius_gap: f64,
}

/// Default exact-recovery tolerance, scale-aware in `n`.
pub fn default_exact_tol(n: usize) -> f64 {
    1e-6 * n as f64
}

fn check_dims(q: &CirclePoint, z: &[i8]) -> Result<()> {
    if q.n() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: q.n(),
            got: z.len(),
        });
    }
    Ok(())
}

/// `||Q^T z||_2 / n`; equals `sqrt(<Q Q^T, z z^T>) / n`.
pub fn correlation(q: &CirclePoint, z: &[i8]) -> Result<f64> {
    check_dims(q, z)?;
    let n = q.n() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for (r, &s) in q.rows().iter().zip(z) {
        sx += s as f64 * r[0];
        sy += s as f64 * r[1];
    }
    let c = sx.hypot(sy) / n;
    debug_assert!(c <= 1.0 + 1e-12, "correlation {c} above 1");
    Ok(c)
}

/// `||Q Q^T - z z^T||_F`, without densifying either product.
///
/// The O(n) route `||Q Q^T||_F^2 - 2 ||Q^T z||^2 + n^2` cancels three
/// `n^2`-sized terms, which floors the computable gap near `n sqrt(3 eps)`
/// — above the tolerances used for exact-recovery decisions. Whenever the
/// fast route lands under `1e-4 n` the gap is recomputed through the
/// cancellation-free pairwise identity
/// `gap^2 = 1/4 sum_{ij} ||z_i Q_i - z_j Q_j||^4` (unit rows).
pub fn frobenius_gap(q: &CirclePoint, z: &[i8]) -> f64 {
    let n = q.n() as f64;
    let g = q.gram();
    let qq_f2 = g[0][0] * g[0][0] + 2.0 * g[0][1] * g[0][1] + g[1][1] * g[1][1];
    let (mut sx, mut sy) = (0.0, 0.0);
    for (r, &s) in q.rows().iter().zip(z) {
        sx += s as f64 * r[0];
        sy += s as f64 * r[1];
    }
    let qtz2 = sx * sx + sy * sy;
    let rough = (qq_f2 - 2.0 * qtz2 + n * n).max(0.0).sqrt();
    if rough > 1e-4 * n {
        return rough;
    }
    let rows: Vec<[f64; 2]> = q
        .rows()
        .iter()
        .zip(z)
        .map(|(r, &s)| [s as f64 * r[0], s as f64 * r[1]])
        .collect();
    let mut gap2 = 0.0;
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            let d0 = rows[i][0] - rows[j][0];
            let d1 = rows[i][1] - rows[j][1];
            let d2 = d0 * d0 + d1 * d1;
            gap2 += 2.0 * 0.25 * d2 * d2;
        }
    }
    gap2.sqrt()
}

/// True iff `||Q Q^T - z z^T||_F <= tol`.
pub fn exact_recovery(q: &CirclePoint, z: &[i8], tol: f64) -> Result<bool> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParam("exact-recovery tol must be > 0".into()));
    }
    check_dims(q, z)?;
    Ok(frobenius_gap(q, z) <= tol)
}

/// Round to signs along a random in-plane direction: `z_hat = sign(Q g)`
/// with `g` standard bivariate normal. Exact zeros resolve to `+1`.
pub fn round_gaussian(q: &CirclePoint, rng: &mut impl Rng) -> Vec<i8> {
    let g: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
    q.rows()
        .iter()
        .map(|r| {
            let v = r[0] * g[0] + r[1] * g[1];
            if v < 0.0 {
                -1
            } else {
                1
            }
        })
        .collect()
}

/// `|<a, b>| / n` for two sign vectors.
pub fn sign_overlap(a: &[i8], b: &[i8]) -> f64 {
    let s: i64 = a.iter().zip(b).map(|(&x, &y)| (x as i64) * (y as i64)).sum();
    (s.abs() as f64) / a.len() as f64
}

/// All metrics at once; rounding consumes two normals from `rng`.
pub fn metrics(q: &CirclePoint, z: &[i8], tol: f64, rng: &mut impl Rng) -> Result<RecoveryMetrics> {
    let correlation = correlation(q, z)?;
    let gap = frobenius_gap(q, z);
    let zhat = round_gaussian(q, rng);
    Ok(RecoveryMetrics {
        correlation,
        overlap: sign_overlap(&zhat, z),
        exact: gap <= tol,
        frobenius_gap: gap,
    })
}

/// Drops the diagonal of an operator: `v -> A v - diag(A) o v`.
struct DiagDropped<'a> {
    inner: &'a dyn SymOp,
    diag: Vec<f64>,
}

impl SymOp for DiagDropped<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.inner.apply_into(v, out);
        for (o, (d, x)) in out.iter_mut().zip(self.diag.iter().zip(v)) {
            *o -= d * x;
        }
    }

    fn diag(&self) -> Vec<f64> {
        vec![0.0; self.inner.dim()]
    }
}

/// Signs of the top eigenvector of `Y` with its diagonal zeroed out.
pub fn spectral_baseline(y: &dyn SymOp) -> Result<Vec<i8>> {
    let dropped = DiagDropped {
        inner: y,
        diag: y.diag(),
    };
    let n = y.dim();
    let opts = EigOptions::with_tol(1e-6 * (n as f64).sqrt().max(1.0));
    let top = extreme_eigenpair(&dropped, Extreme::Largest, &opts)?;
    Ok(top
        .vector
        .iter()
        .map(|&v| if v < 0.0 { -1 } else { 1 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::random_point_seeded;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn signs(n: usize, seed: u64) -> Vec<i8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()
    }

    #[test]
    fn correlation_aligned_point() {
        let z = signs(15, 1);
        let q = CirclePoint::from_signs(&z);
        assert!((correlation(&q, &z).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn correlation_two_orthogonal_rows() {
        let q = CirclePoint::new(vec![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let z = vec![1, 1];
        let c = correlation(&q, &z).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn correlation_equals_gram_identity() {
        let q = random_point_seeded(30, 3);
        let z = signs(30, 4);
        let c = correlation(&q, &z).unwrap();
        // <Q Q^T, z z^T> computed densely
        let mut inner = 0.0;
        for i in 0..30 {
            for j in 0..30 {
                let qq = q.rows()[i][0] * q.rows()[j][0] + q.rows()[i][1] * q.rows()[j][1];
                inner += qq * (z[i] * z[j]) as f64;
            }
        }
        assert!((c - inner.max(0.0).sqrt() / 30.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_invariance() {
        let q = random_point_seeded(20, 5);
        let z = signs(20, 6);
        let theta = 0.7f64;
        let r = [[theta.cos(), -theta.sin()], [theta.sin(), theta.cos()]];
        let qr = q.rotate(r);
        assert!((correlation(&q, &z).unwrap() - correlation(&qr, &z).unwrap()).abs() < 1e-12);
        assert!((frobenius_gap(&q, &z) - frobenius_gap(&qr, &z)).abs() < 1e-10);
    }

    #[test]
    fn sign_flip_invariance() {
        let q = random_point_seeded(20, 7);
        let z = signs(20, 8);
        let neg: Vec<i8> = z.iter().map(|&s| -s).collect();
        assert_eq!(
            correlation(&q, &z).unwrap().to_bits(),
            correlation(&q, &neg).unwrap().to_bits()
        );
        assert!((frobenius_gap(&q, &z) - frobenius_gap(&q, &neg)).abs() == 0.0);
    }

    #[test]
    fn exact_recovery_rotated_plant() {
        let z = signs(25, 9);
        let q = CirclePoint::from_signs(&z);
        let theta = 1.234f64;
        let r = [[theta.cos(), -theta.sin()], [theta.sin(), theta.cos()]];
        assert!(exact_recovery(&q.rotate(r), &z, default_exact_tol(25)).unwrap());
    }

    #[test]
    fn one_flipped_row_gap() {
        let n = 12;
        let z = signs(n, 10);
        let mut x = z.clone();
        x[4] = -x[4];
        let q = CirclePoint::from_signs(&x);
        let gap = frobenius_gap(&q, &z);
        let want = (8.0 * (n as f64 - 1.0)).sqrt();
        assert!((gap - want).abs() < 1e-10, "gap {gap} want {want}");
        assert!(!exact_recovery(&q, &z, 1.0).unwrap());
    }

    #[test]
    fn random_point_not_exact() {
        let z = signs(200, 11);
        let q = random_point_seeded(200, 12);
        assert!(!exact_recovery(&q, &z, default_exact_tol(200)).unwrap());
    }

    #[test]
    fn rounding_recovers_aligned_plant() {
        let z = signs(40, 13);
        let q = CirclePoint::from_signs(&z);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let zh = round_gaussian(&q, &mut rng);
            assert!((sign_overlap(&zh, &z) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rounding_moments() {
        // E||Qg||^2 = n and E<z, Qg>^2 = ||Q^T z||^2, within Monte-Carlo slack
        let n = 50;
        let q = random_point_seeded(n, 15);
        let z = signs(n, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let trials = 40_000;
        let (mut m_qg, mut m_zqg) = (0.0, 0.0);
        for _ in 0..trials {
            let g: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
            let mut qg_sq = 0.0;
            let mut zqg = 0.0;
            for (r, &s) in q.rows().iter().zip(&z) {
                let v = r[0] * g[0] + r[1] * g[1];
                qg_sq += v * v;
                zqg += s as f64 * v;
            }
            m_qg += qg_sq / trials as f64;
            m_zqg += zqg * zqg / trials as f64;
        }
        assert!((m_qg - n as f64).abs() / (n as f64) < 0.05, "E||Qg||^2 = {m_qg}");
        let qtz2 = (correlation(&q, &z).unwrap() * n as f64).powi(2);
        assert!((m_zqg - qtz2).abs() / qtz2.max(1.0) < 0.05, "{m_zqg} vs {qtz2}");
    }

    #[test]
    fn baseline_noiseless() {
        use crate::spectral::{DenseSym, NoiseMatrix, SpikeNoise};
        let z = signs(60, 18);
        let zf: Vec<f64> = z.iter().map(|&s| s as f64).collect();
        let y = SpikeNoise::new(zf, 0.0, NoiseMatrix::Dense(DenseSym::zeros(60))).unwrap();
        let zh = spectral_baseline(&y).unwrap();
        assert!((sign_overlap(&zh, &z) - 1.0).abs() < 1e-15);
    }
}
