//! Geometry and calculus of the feasible set of the rank-2 program: `n x 2`
//! matrices with unit rows, i.e. a product of `n` circles.
//!
//! Tangent vectors at `Q` are parametrized by one coefficient per row:
//! direction `alpha` stands for the ambient matrix with rows
//! `alpha_i * J Q_i`, where `J` rotates the plane by 90 degrees. With this
//! parametrization the Euclidean inner product on coefficient vectors is the
//! Riemannian metric, the retraction is an exact per-row rotation, and the
//! second derivative of the cost along any such curve is the quadratic form
//! `-2 alpha^T H(Q) alpha` with `H(Q) = ddiag(A Q Q^T) - A o (Q Q^T)` — the
//! same `n x n` matrix whose positive semidefiniteness is the second-order
//! optimality condition for the maximization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectral::{DenseSym, SymOp};
use crate::{Error, Result};

/// Feasible point of the rank-2 program: `n` unit rows in the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct CirclePoint {
    rows: Vec<[f64; 2]>,
}

/// Row-norm slack tolerated by [`CirclePoint::new`].
pub const FEASIBILITY_TOL: f64 = 1e-12;

impl CirclePoint {
    /// Wrap rows that are already unit within [`FEASIBILITY_TOL`].
    pub fn new(rows: Vec<[f64; 2]>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            let nrm2 = r[0] * r[0] + r[1] * r[1];
            if (nrm2 - 1.0).abs() > 2.0 * FEASIBILITY_TOL {
                return Err(Error::InvalidParam(format!(
                    "row {i} has norm {} (must be 1)",
                    nrm2.sqrt()
                )));
            }
        }
        Ok(CirclePoint { rows })
    }

    /// Normalize each row onto its circle. Zero rows are rejected.
    pub fn project(rows: Vec<[f64; 2]>) -> Result<Self> {
        let mut out = Vec::with_capacity(rows.len());
        for (i, r) in rows.into_iter().enumerate() {
            let nrm = (r[0] * r[0] + r[1] * r[1]).sqrt();
            if nrm == 0.0 || !nrm.is_finite() {
                return Err(Error::InvalidParam(format!("row {i} cannot be normalized")));
            }
            out.push([r[0] / nrm, r[1] / nrm]);
        }
        Ok(CirclePoint { rows: out })
    }

    /// Rank-1 point `[x 0]` from a sign vector.
    pub fn from_signs(x: &[i8]) -> Self {
        CirclePoint {
            rows: x.iter().map(|&s| [s as f64, 0.0]).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.rows
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[k]).collect()
    }

    /// The 2x2 Gram matrix `Q^T Q` as `[[xx, xy], [xy, yy]]`.
    pub fn gram(&self) -> [[f64; 2]; 2] {
        let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
        for r in &self.rows {
            xx += r[0] * r[0];
            xy += r[0] * r[1];
            yy += r[1] * r[1];
        }
        [[xx, xy], [xy, yy]]
    }

    /// Singular values of `Q`, largest first.
    ///
    /// The small one is recomputed as `||Q u||` along the Gram matrix's
    /// minor eigenvector: extracting it from the 2x2 eigenvalues directly
    /// cancels two `n`-sized terms and floors the result near
    /// `sqrt(eps n)`, far above the rank-deficiency threshold.
    pub fn singular_values(&self) -> [f64; 2] {
        let g = self.gram();
        let tr = g[0][0] + g[1][1];
        let det = g[0][0] * g[1][1] - g[0][1] * g[0][1];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let l1 = (tr / 2.0 + disc).max(0.0);
        // dominant eigenvector of the 2x2 Gram matrix
        let v1 = if g[0][1].abs() > 1e-300 {
            let mut v = [g[0][1], l1 - g[0][0]];
            let alt = [l1 - g[1][1], g[0][1]];
            if alt[0] * alt[0] + alt[1] * alt[1] > v[0] * v[0] + v[1] * v[1] {
                v = alt;
            }
            let nrm = (v[0] * v[0] + v[1] * v[1]).sqrt();
            [v[0] / nrm, v[1] / nrm]
        } else if g[0][0] >= g[1][1] {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        };
        let u = [-v1[1], v1[0]];
        let (mut s1_sq, mut s2_sq) = (0.0, 0.0);
        for r in &self.rows {
            let p = r[0] * v1[0] + r[1] * v1[1];
            let q = r[0] * u[0] + r[1] * u[1];
            s1_sq += p * p;
            s2_sq += q * q;
        }
        let hi = s1_sq.max(s2_sq).sqrt();
        let lo = s1_sq.min(s2_sq).sqrt();
        [hi, lo]
    }

    /// Apply a 2x2 orthogonal matrix on the right: rows become `Q_i R`.
    pub fn rotate(&self, r: [[f64; 2]; 2]) -> CirclePoint {
        CirclePoint {
            rows: self
                .rows
                .iter()
                .map(|q| {
                    [
                        q[0] * r[0][0] + q[1] * r[1][0],
                        q[0] * r[0][1] + q[1] * r[1][1],
                    ]
                })
                .collect(),
        }
    }

    pub fn to_oblique(&self) -> ObliquePoint {
        ObliquePoint {
            n: self.n(),
            p: 2,
            data: self.rows.iter().flat_map(|r| [r[0], r[1]]).collect(),
        }
    }

    /// Worst deviation of a row norm from 1.
    pub fn feasibility_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| ((r[0] * r[0] + r[1] * r[1]).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Tangent direction at a [`CirclePoint`], one rotation coefficient per row.
#[derive(Debug, Clone)]
pub struct TangentCoeffs(pub Vec<f64>);

impl TangentCoeffs {
    pub fn zeros(n: usize) -> Self {
        TangentCoeffs(vec![0.0; n])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &TangentCoeffs) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

/// Point with `p >= 2` unit rows per node, row-major storage. Only the
/// pieces the rank-p solver needs live here: cost, projected gradient and
/// Hessian products, and the row-normalizing retraction.
#[derive(Debug, Clone)]
pub struct ObliquePoint {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl ObliquePoint {
    pub fn from_rows(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if p < 2 || data.len() != n * p {
            return Err(Error::InvalidParam(format!(
                "oblique point needs n*p = {} values with p >= 2, got {}",
                n * p,
                data.len()
            )));
        }
        let mut point = ObliquePoint { n, p, data };
        point.normalize_rows()?;
        Ok(point)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * self.p + k]).collect()
    }

    fn normalize_rows(&mut self) -> Result<()> {
        for i in 0..self.n {
            let row = &mut self.data[i * self.p..(i + 1) * self.p];
            let nrm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm == 0.0 || !nrm.is_finite() {
                return Err(Error::InvalidParam(format!("row {i} cannot be normalized")));
            }
            for x in row {
                *x /= nrm;
            }
        }
        Ok(())
    }

    /// Gram matrix `Q^T Q` (p x p, row-major).
    pub fn gram(&self) -> Vec<f64> {
        let p = self.p;
        let mut g = vec![0.0; p * p];
        for i in 0..self.n {
            let r = self.row(i);
            for a in 0..p {
                for b in 0..p {
                    g[a * p + b] += r[a] * r[b];
                }
            }
        }
        g
    }

    /// Singular values of `Q` (descending). Directions come from the p x p
    /// Gram spectrum; each value is then recomputed as `||Q u||` so small
    /// ones are not lost to cancellation in the Gram eigenvalues.
    pub fn singular_values(&self) -> Vec<f64> {
        let g = DenseSym::from_full(self.p, self.gram()).expect("square gram");
        let (_, vecs) = crate::spectral::dense_eigen_jacobi(&g);
        let mut values: Vec<f64> = vecs
            .iter()
            .map(|u| {
                let mut s = 0.0;
                for i in 0..self.n {
                    let proj: f64 = self.row(i).iter().zip(u).map(|(x, c)| x * c).sum();
                    s += proj * proj;
                }
                s.sqrt()
            })
            .collect();
        values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        values
    }

    /// Interpret a rank-deficient point as a sign vector: the sign of each
    /// row's component along the dominant row direction.
    pub fn dominant_signs(&self) -> Vec<i8> {
        let g = DenseSym::from_full(self.p, self.gram()).expect("square gram");
        let (_, vecs) = crate::spectral::dense_eigen_jacobi(&g);
        let top = &vecs[self.p - 1];
        (0..self.n)
            .map(|i| {
                let c: f64 = self.row(i).iter().zip(top). map(|(x, u)| x * u).sum();
                if c >= 0.0 {
                    1
                } else {
                    -1
                }
            })
            .collect()
    }
}

/// Uniform random point: each row drawn independently and uniformly on the
/// circle, deterministic per seed.
pub fn random_point(n: usize, rng: &mut impl Rng) -> CirclePoint {
    let rows = (0..n)
        .map(|_| {
            let theta: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            [theta.cos(), theta.sin()]
        })
        .collect();
    CirclePoint { rows }
}

pub fn random_point_seeded(n: usize, seed: u64) -> CirclePoint {
    random_point(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Random point with unit rows in `p` dimensions (Gaussian rows, normalized).
pub fn random_oblique(n: usize, p: usize, rng: &mut impl Rng) -> Result<ObliquePoint> {
    use rand_distr::StandardNormal;
    let data: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    ObliquePoint::from_rows(n, p, data)
}

/// Exact exponential map: rotate row `i` by the angle `t * alpha_i`.
pub fn retract(q: &CirclePoint, alpha: &TangentCoeffs, t: f64) -> CirclePoint {
    let rows = q
        .rows
        .iter()
        .zip(&alpha.0)
        .map(|(r, &a)| {
            let (s, c) = (t * a).sin_cos();
            [c * r[0] - s * r[1], s * r[0] + c * r[1]]
        })
        .collect();
    CirclePoint { rows }
}

/// Text serialization: one `x y` line per row, 17 significant digits.
pub fn point_to_string(q: &CirclePoint) -> String {
    let mut s = String::with_capacity(q.n() * 48);
    for r in q.rows() {
        s.push_str(&format!("{:.16e} {:.16e}\n", r[0], r[1]));
    }
    s
}

pub fn write_point_file(path: &std::path::Path, q: &CirclePoint) -> Result<()> {
    std::fs::write(path, point_to_string(q)).map_err(|e| Error::io(path, e))
}

/// Parse rows back. Rows are re-normalized; a row whose norm deviates from 1
/// by more than 1e-6 is rejected.
pub fn point_from_str(s: &str) -> Result<CirclePoint> {
    let mut rows = Vec::new();
    for (ln, line) in s.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut parts = t.split_whitespace();
        let mut next = || {
            parts
                .next()
                .ok_or_else(|| Error::InvalidParam(format!("point line {}: missing value", ln + 1)))
        };
        let x: f64 = next()?
            .parse()
            .map_err(|e| Error::InvalidParam(format!("point line {}: {e}", ln + 1)))?;
        let y: f64 = next()?
            .parse()
            .map_err(|e| Error::InvalidParam(format!("point line {}: {e}", ln + 1)))?;
        let nrm = x.hypot(y);
        if (nrm - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParam(format!(
                "point line {}: row norm {nrm} deviates from 1 by more than 1e-6",
                ln + 1
            )));
        }
        rows.push([x / nrm, y / nrm]);
    }
    if rows.is_empty() {
        return Err(Error::InvalidParam("point file has no rows".into()));
    }
    Ok(CirclePoint { rows })
}

pub fn read_point_file(path: &std::path::Path) -> Result<CirclePoint> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    point_from_str(&s)
}

fn check_dim(a: &dyn SymOp, n: usize) -> Result<()> {
    if a.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: n,
        });
    }
    Ok(())
}

/// `Tr(Q^T A Q)`, two matvecs.
pub fn cost(a: &dyn SymOp, q: &CirclePoint) -> Result<f64> {
    check_dim(a, q.n())?;
    let x = q.column(0);
    let y = q.column(1);
    let ax = a.apply(&x);
    let ay = a.apply(&y);
    let val = dot(&x, &ax) + dot(&y, &ay);
    if !val.is_finite() {
        return Err(Error::NonFiniteCost);
    }
    Ok(val)
}

/// `Tr(Q^T A Q)` on a rank-p point, `p` matvecs.
pub fn cost_oblique(a: &dyn SymOp, q: &ObliquePoint) -> Result<f64> {
    check_dim(a, q.n())?;
    let mut val = 0.0;
    for k in 0..q.p() {
        let col = q.column(k);
        val += dot(&col, &a.apply(&col));
    }
    if !val.is_finite() {
        return Err(Error::NonFiniteCost);
    }
    Ok(val)
}

/// Product `A Q`, rows paired with `Q`'s rows.
pub(crate) fn apply_to_point(a: &dyn SymOp, q: &CirclePoint) -> Vec<[f64; 2]> {
    let ax = a.apply(&q.column(0));
    let ay = a.apply(&q.column(1));
    ax.into_iter().zip(ay).map(|(x, y)| [x, y]).collect()
}

/// Riemannian gradient of `Tr(Q^T A Q)` in row coefficients:
/// `alpha_i = 2 <(A Q)_i, J Q_i>`. It vanishes exactly when
/// `(ddiag(A Q Q^T) - A) Q = 0`.
pub fn rgrad(a: &dyn SymOp, q: &CirclePoint) -> Result<TangentCoeffs> {
    check_dim(a, q.n())?;
    let aq = apply_to_point(a, q);
    Ok(rgrad_from_aq(q, &aq))
}

pub(crate) fn rgrad_from_aq(q: &CirclePoint, aq: &[[f64; 2]]) -> TangentCoeffs {
    TangentCoeffs(
        q.rows
            .iter()
            .zip(aq)
            .map(|(r, g)| 2.0 * (g[1] * r[0] - g[0] * r[1]))
            .collect(),
    )
}

/// The second-order-condition matrix `H(Q) = ddiag(A Q Q^T) - A o (Q Q^T)`
/// as a matrix-free symmetric operator:
/// `(H v)_i = d_i v_i - x_i (A (x o v))_i - y_i (A (y o v))_i`
/// with `d = diag(A Q Q^T)` and `x`, `y` the columns of `Q`.
pub struct HessianForm<'a> {
    a: &'a dyn SymOp,
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl<'a> HessianForm<'a> {
    pub fn new(a: &'a dyn SymOp, q: &CirclePoint) -> Result<Self> {
        check_dim(a, q.n())?;
        let aq = apply_to_point(a, q);
        Ok(Self::from_aq(a, q, &aq))
    }

    pub(crate) fn from_aq(a: &'a dyn SymOp, q: &CirclePoint, aq: &[[f64; 2]]) -> Self {
        let x = q.column(0);
        let y = q.column(1);
        let d = q
            .rows()
            .iter()
            .zip(aq)
            .map(|(r, g)| r[0] * g[0] + r[1] * g[1])
            .collect();
        HessianForm { a, x, y, d }
    }

    /// `diag(A Q Q^T)`, the row-wise alignment of `A Q` with `Q`.
    pub fn alignment(&self) -> &[f64] {
        &self.d
    }
}

impl SymOp for HessianForm<'_> {
    fn dim(&self) -> usize {
        self.d.len()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.d.len();
        let mut tmp: Vec<f64> = (0..n).map(|i| self.x[i] * v[i]).collect();
        let atx = self.a.apply(&tmp);
        for i in 0..n {
            tmp[i] = self.y[i] * v[i];
        }
        let aty = self.a.apply(&tmp);
        for i in 0..n {
            out[i] = self.d[i] * v[i] - self.x[i] * atx[i] - self.y[i] * aty[i];
        }
    }

    fn diag(&self) -> Vec<f64> {
        let ad = self.a.diag();
        // H_ii = d_i - A_ii * <Q_i, Q_i> = d_i - A_ii
        self.d.iter().zip(ad).map(|(d, a)| d - a).collect()
    }
}

/// Construct `H(Q)` after checking dimensions; convenience alias for
/// `HessianForm::new`.
pub fn hess_matrix<'a>(a: &'a dyn SymOp, q: &CirclePoint) -> Result<HessianForm<'a>> {
    HessianForm::new(a, q)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
