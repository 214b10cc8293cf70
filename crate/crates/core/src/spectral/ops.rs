use crate::{Error, Result};

/// A symmetric linear operator of dimension `n`, exposed through
/// matrix–vector products.
///
/// Implementations must be exactly symmetric: the represented matrix `A`
/// satisfies `A[i][j] == A[j][i]` bit-for-bit, which every structured form
/// below guarantees by construction. Operators are immutable after
/// construction and safe to share across threads; `apply_into` is reentrant.
pub trait SymOp: Send + Sync {
    fn dim(&self) -> usize;

    /// `out = A v`. Both slices must have length `dim()`.
    fn apply_into(&self, v: &[f64], out: &mut [f64]);

    /// Diagonal entries of the represented matrix.
    fn diag(&self) -> Vec<f64>;

    /// Allocating convenience wrapper around `apply_into`.
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(v, &mut out);
        out
    }

    /// Materialize as a dense matrix via `n` basis products.
    fn to_dense(&self) -> DenseSym {
        let n = self.dim();
        let mut data = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply_into(&e, &mut col);
            e[j] = 0.0;
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
        DenseSym { n, data }
    }
}

/// Dimension-checked matrix–vector product.
pub fn matvec(op: &dyn SymOp, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: v.len(),
        });
    }
    Ok(op.apply(v))
}

/// Dense symmetric matrix, full row-major storage.
#[derive(Debug, Clone)]
pub struct DenseSym {
    n: usize,
    data: Vec<f64>,
}

impl DenseSym {
    /// Build from full row-major data. The strict upper triangle is mirrored
    /// onto the lower one so the result is exactly symmetric; the diagonal is
    /// kept as given.
    pub fn from_full(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidParam(format!(
                "dense storage needs {} values, got {}",
                n * n,
                data.len()
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                data[j * n + i] = data[i * n + j];
            }
        }
        Ok(DenseSym { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        DenseSym { n, data }
    }

    pub fn zeros(n: usize) -> Self {
        DenseSym {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Set `A[i][j]` and `A[j][i]`.
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl SymOp for DenseSym {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            *o = row.iter().zip(v).map(|(a, x)| a * x).sum();
        }
    }

    fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * self.n + i]).collect()
    }

    fn to_dense(&self) -> DenseSym {
        self.clone()
    }
}

/// Sparse symmetric matrix stored as upper-triangle triplets (`i <= j`).
#[derive(Debug, Clone)]
pub struct SparseSym {
    n: usize,
    entries: Vec<(u32, u32, f64)>,
}

impl SparseSym {
    /// Build from triplets with `i <= j < n`. Entries on the lower triangle
    /// or out of range are rejected.
    pub fn from_upper_triplets(n: usize, entries: Vec<(u32, u32, f64)>) -> Result<Self> {
        for &(i, j, _) in &entries {
            if i > j || (j as usize) >= n {
                return Err(Error::InvalidParam(format!(
                    "triplet ({i}, {j}) outside the upper triangle of size {n}"
                )));
            }
        }
        Ok(SparseSym { n, entries })
    }

    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Copy with all diagonal entries removed.
    pub fn strip_diagonal(&self) -> SparseSym {
        SparseSym {
            n: self.n,
            entries: self
                .entries
                .iter()
                .copied()
                .filter(|&(i, j, _)| i != j)
                .collect(),
        }
    }
}

impl SymOp for SparseSym {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        out.fill(0.0);
        for &(i, j, a) in &self.entries {
            let (i, j) = (i as usize, j as usize);
            out[i] += a * v[j];
            if i != j {
                out[j] += a * v[i];
            }
        }
    }

    fn diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for &(i, j, a) in &self.entries {
            if i == j {
                d[i as usize] += a;
            }
        }
        d
    }
}

/// Noise term of a [`SpikeNoise`] operator.
#[derive(Debug, Clone)]
pub enum NoiseMatrix {
    Dense(DenseSym),
    Sparse(SparseSym),
}

impl NoiseMatrix {
    pub fn as_op(&self) -> &dyn SymOp {
        match self {
            NoiseMatrix::Dense(d) => d,
            NoiseMatrix::Sparse(s) => s,
        }
    }
}

/// Rank-1 spike plus scaled noise: `A = z z^T + sigma * Delta`, applied as
/// `A v = z (z^T v) + sigma (Delta v)` without materializing `z z^T`.
#[derive(Debug, Clone)]
pub struct SpikeNoise {
    z: Vec<f64>,
    sigma: f64,
    noise: NoiseMatrix,
}

impl SpikeNoise {
    pub fn new(z: Vec<f64>, sigma: f64, noise: NoiseMatrix) -> Result<Self> {
        if sigma < 0.0 {
            return Err(Error::InvalidParam("sigma must be >= 0".into()));
        }
        if z.len() != noise.as_op().dim() {
            return Err(Error::DimensionMismatch {
                expected: noise.as_op().dim(),
                got: z.len(),
            });
        }
        Ok(SpikeNoise { z, sigma, noise })
    }

    pub fn spike(&self) -> &[f64] {
        &self.z
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn noise(&self) -> &NoiseMatrix {
        &self.noise
    }
}

impl SymOp for SpikeNoise {
    fn dim(&self) -> usize {
        self.z.len()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.noise.as_op().apply_into(v, out);
        let zv: f64 = self.z.iter().zip(v).map(|(z, x)| z * x).sum();
        for (o, z) in out.iter_mut().zip(&self.z) {
            *o = z * zv + self.sigma * *o;
        }
    }

    fn diag(&self) -> Vec<f64> {
        let nd = self.noise.as_op().diag();
        self.z
            .iter()
            .zip(nd)
            .map(|(z, d)| z * z + self.sigma * d)
            .collect()
    }
}

/// Adjacency matrix with a uniform rank-1 shift subtracted:
/// `A v - shift * (1^T v) 1`, evaluated without densifying.
#[derive(Debug, Clone)]
pub struct CenteredAdjacency {
    adj: SparseSym,
    shift: f64,
}

impl CenteredAdjacency {
    pub fn new(adj: SparseSym, shift: f64) -> Self {
        CenteredAdjacency { adj, shift }
    }

    pub fn adjacency(&self) -> &SparseSym {
        &self.adj
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }
}

impl SymOp for CenteredAdjacency {
    fn dim(&self) -> usize {
        self.adj.dim()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.adj.apply_into(v, out);
        let s = self.shift * v.iter().sum::<f64>();
        for o in out.iter_mut() {
            *o -= s;
        }
    }

    fn diag(&self) -> Vec<f64> {
        self.adj.diag().into_iter().map(|d| d - self.shift).collect()
    }
}

/// `scale * A + offset * I` over a borrowed operator. Used by the
/// eigensolver to reduce "smallest" problems to "largest" ones.
pub struct ScaledOp<'a> {
    pub inner: &'a dyn SymOp,
    pub scale: f64,
    pub offset: f64,
}

impl SymOp for ScaledOp<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.inner.apply_into(v, out);
        for (o, x) in out.iter_mut().zip(v) {
            *o = self.scale * *o + self.offset * x;
        }
    }

    fn diag(&self) -> Vec<f64> {
        self.inner
            .diag()
            .into_iter()
            .map(|d| self.scale * d + self.offset)
            .collect()
    }
}
