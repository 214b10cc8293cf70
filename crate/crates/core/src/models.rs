//! Seeded random-instance generators for the two observation models, their
//! noise decompositions, and empirical tail diagnostics.
//!
//! The spiked Gaussian model observes `Y = z z^T + sigma W` with `W`
//! symmetric, zero diagonal, i.i.d. standard normal above it; the
//! signal-to-noise ratio is `lambda = sqrt(n) / sigma`. The two-community
//! graph model draws within-community edges with probability `p` and
//! across-community edges with probability `q < p` (self-loops sampled with
//! probability `p`, ignored by everything downstream); centering the
//! adjacency by `(p+q)/2` turns it into a spike-plus-noise matrix with
//! signal strength `lambda(a, b) = (a-b)/sqrt(2(a+b))` at `p = a/n`,
//! `q = b/n`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::certify;
use crate::solver::SolverConfig;
use crate::spectral::{
    spectral_norm, write_coord_file, write_coord_sparse_file, CenteredAdjacency, DenseSym,
    NoiseMatrix, SparseSym, SpikeNoise, SymOp,
};
use crate::{Error, Result};

/// Signal-to-noise specification for the spiked Gaussian model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum Snr {
    Sigma(f64),
    Lambda(f64),
}

/// `sigma = sqrt(n) / lambda`.
pub fn sigma_from_lambda(n: usize, lambda: f64) -> f64 {
    (n as f64).sqrt() / lambda
}

/// `lambda = sqrt(n) / sigma`, infinite in the noiseless case.
pub fn lambda_from_sigma(n: usize, sigma: f64) -> f64 {
    if sigma == 0.0 {
        f64::INFINITY
    } else {
        (n as f64).sqrt() / sigma
    }
}

/// One spiked Gaussian instance.
#[derive(Debug, Clone)]
pub struct Z2Instance {
    pub z: Vec<i8>,
    pub y: SpikeNoise,
    pub sigma: f64,
    /// `sqrt(n) / sigma`; `inf` when `sigma = 0`.
    pub lambda: f64,
    pub seed: u64,
}

impl Z2Instance {
    pub fn n(&self) -> usize {
        self.z.len()
    }
}

/// Sample `z` uniform over sign vectors and `Y = z z^T + sigma W`;
/// bit-reproducible from `(n, snr, seed)`.
pub fn gen_z2(n: usize, snr: Snr, seed: u64) -> Result<Z2Instance> {
    if n == 0 {
        return Err(Error::InvalidParam("n must be >= 1".into()));
    }
    let sigma = match snr {
        Snr::Sigma(s) if s >= 0.0 => s,
        Snr::Lambda(l) if l > 0.0 => sigma_from_lambda(n, l),
        Snr::Sigma(s) => return Err(Error::InvalidParam(format!("sigma must be >= 0, got {s}"))),
        Snr::Lambda(l) => return Err(Error::InvalidParam(format!("lambda must be > 0, got {l}"))),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    let mut w = DenseSym::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            w.set_sym(i, j, rng.sample(StandardNormal));
        }
    }
    let zf: Vec<f64> = z.iter().map(|&s| s as f64).collect();
    let y = SpikeNoise::new(zf, sigma, NoiseMatrix::Dense(w))?;
    Ok(Z2Instance {
        z,
        y,
        sigma,
        lambda: lambda_from_sigma(n, sigma),
        seed,
    })
}

/// Edge-probability specification for the two-community graph model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum SbmParams {
    /// Degree form: `p = a/n`, `q = b/n`.
    Ab { a: f64, b: f64 },
    /// Probability form.
    Pq { p: f64, q: f64 },
}

/// One two-community graph instance.
#[derive(Debug, Clone)]
pub struct SbmInstance {
    /// Balanced labels, exactly `n/2` of each sign.
    pub g: Vec<i8>,
    /// Raw adjacency, diagonal included as sampled.
    pub a: SparseSym,
    /// Centered operator actually optimized: diagonal-stripped adjacency
    /// with the `(p+q)/2` rank-1 shift.
    pub anat: CenteredAdjacency,
    pub p: f64,
    pub q: f64,
    /// `p * n` and `q * n`.
    pub a_param: f64,
    pub b_param: f64,
    pub lambda_ab: f64,
    pub seed: u64,
}

impl SbmInstance {
    pub fn n(&self) -> usize {
        self.g.len()
    }
}

/// `(lambda(a, b), lambda~(p, q))` for `a = p n`, `b = q n`. The two agree
/// identically; they are evaluated through their separate formulas.
pub fn lambda_params(p: f64, q: f64, n: usize) -> (f64, f64) {
    let (a, b) = (p * n as f64, q * n as f64);
    let lambda_ab = (a - b) / (2.0 * (a + b)).sqrt();
    let lambda_tilde = (p - q) / (2.0 * (p + q)).sqrt() * (n as f64).sqrt();
    (lambda_ab, lambda_tilde)
}

/// Sample a balanced instance; `n` must be even and `p > q`.
pub fn gen_sbm(n: usize, params: SbmParams, seed: u64) -> Result<SbmInstance> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::InvalidParam(format!("n must be even and positive, got {n}")));
    }
    let (p, q) = match params {
        SbmParams::Pq { p, q } => (p, q),
        SbmParams::Ab { a, b } => (a / n as f64, b / n as f64),
    };
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParam(format!(
            "edge probabilities must lie in [0, 1], got p = {p}, q = {q}"
        )));
    }
    if p <= q {
        return Err(Error::InvalidParam(format!("need p > q, got p = {p}, q = {q}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // uniformly random balanced assignment
    let mut g: Vec<i8> = (0..n).map(|i| if i < n / 2 { 1 } else { -1 }).collect();
    g.shuffle(&mut rng);

    let mut entries = Vec::new();
    for i in 0..n {
        for j in i..n {
            let prob = if g[i] * g[j] == 1 { p } else { q };
            if rng.random::<f64>() < prob {
                entries.push((i as u32, j as u32, 1.0));
            }
        }
    }
    let a = SparseSym::from_upper_triplets(n, entries)?;
    let anat = CenteredAdjacency::new(a.strip_diagonal(), (p + q) / 2.0);
    let (lambda_ab, _) = lambda_params(p, q, n);
    Ok(SbmInstance {
        g,
        a,
        anat,
        p,
        q,
        a_param: p * n as f64,
        b_param: q * n as f64,
        lambda_ab,
        seed,
    })
}

/// Centered, normalized adjacency fluctuation: zero diagonal, entries
/// `(A_ij - p) / sqrt((p+q) n / 2)` within communities and
/// `(A_ij - q) / sqrt((p+q) n / 2)` across. Applied matrix-free as
/// `scale * (A0 v - c1 (1^T v . 1 - v) - c2 (g g^T v - v))`.
pub struct SbmNoiseOp {
    adj0: SparseSym,
    g: Vec<f64>,
    c1: f64,
    c2: f64,
    scale: f64,
}

impl SymOp for SbmNoiseOp {
    fn dim(&self) -> usize {
        self.g.len()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.adj0.apply_into(v, out);
        let sv: f64 = v.iter().sum();
        let gv: f64 = self.g.iter().zip(v).map(|(g, x)| g * x).sum();
        for i in 0..v.len() {
            let mean = self.c1 * (sv - v[i]) + self.c2 * (self.g[i] * gv - v[i]);
            out[i] = self.scale * (out[i] - mean);
        }
    }

    fn diag(&self) -> Vec<f64> {
        vec![0.0; self.g.len()]
    }
}

/// Decompose the centered operator into spike, noise, and a diagonal
/// remainder: `scale * anat - D = (lambda~ / n) g g^T + E`, returning
/// `(E, D's diagonal, scale)` with `scale = sqrt(2 / ((p+q) n))`.
pub fn noise_decomposition(inst: &SbmInstance) -> (SbmNoiseOp, Vec<f64>, f64) {
    let n = inst.n();
    let scale = (2.0 / ((inst.p + inst.q) * n as f64)).sqrt();
    let (_, lambda_tilde) = lambda_params(inst.p, inst.q, n);
    let e = SbmNoiseOp {
        adj0: inst.a.strip_diagonal(),
        g: inst.g.iter().map(|&s| s as f64).collect(),
        c1: (inst.p + inst.q) / 2.0,
        c2: (inst.p - inst.q) / 2.0,
        scale,
    };
    // anat has constant diagonal -(p+q)/2; the spike contributes
    // lambda~/n on the diagonal and E contributes nothing.
    let d_value = -(scale * (inst.p + inst.q) / 2.0 + lambda_tilde / n as f64);
    (e, vec![d_value; n], scale)
}

/// Noise magnitudes of one instance, in the normalization where the spike
/// has unit strength per entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSummary {
    /// `||Delta||` (or `||E||`).
    pub spec_norm: f64,
    /// `||Delta z||_inf` (or `||E g||_inf`).
    pub inf_norm_signal: f64,
    /// `SDP(E) / n`, when estimated.
    pub sdp_over_n: Option<f64>,
    /// `max(spec_norm / sqrt(n), inf_norm_signal / sqrt(n ln n))`.
    pub gamma_hat: f64,
    /// `sigma / sqrt(n)`.
    pub c: f64,
}

pub fn gamma_hat(n: usize, spec_norm: f64, inf_norm_signal: f64) -> f64 {
    let nf = n as f64;
    (spec_norm / nf.sqrt()).max(inf_norm_signal / (nf * nf.ln()).sqrt())
}

/// Measure `(||Delta||, ||Delta z||_inf, gamma_hat, c)` for a spiked
/// Gaussian instance.
pub fn noise_summary_z2(inst: &Z2Instance) -> Result<NoiseSummary> {
    let n = inst.n();
    let w = inst.y.noise().as_op();
    let spec = spectral_norm(w, (1e-7 * n as f64).max(1e-9))?;
    let zf: Vec<f64> = inst.z.iter().map(|&s| s as f64).collect();
    let wz = w.apply(&zf);
    let inf = wz.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(NoiseSummary {
        spec_norm: spec,
        inf_norm_signal: inf,
        sdp_over_n: None,
        gamma_hat: gamma_hat(n, spec, inf),
        c: inst.sigma / (n as f64).sqrt(),
    })
}

/// One row of the Gaussian tail table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WignerTailRow {
    pub t: f64,
    /// `exp(-t^2 / 4)`.
    pub bound_spec: f64,
    /// Empirical frequency of `||W|| >= 2 sqrt(n) + t`.
    pub freq_spec: f64,
    /// `exp(-t / 2)`.
    pub bound_inf: f64,
    /// Empirical frequency of `||W z||_inf >= sqrt(2 ln n + t)`, i.e. the
    /// threshold exactly as printed. The entries of `W z` have variance
    /// `n - 1`, so this frequency saturates at 1 — the table keeps the raw
    /// column so the mismatch stays visible.
    pub freq_inf: f64,
    /// Frequency of `||W z||_inf / sqrt(n - 1) >= sqrt(2 ln n + t)`, the
    /// variance-normalized pairing under which the bound is meaningful.
    pub freq_inf_normalized: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WignerTailReport {
    pub n: usize,
    pub trials: usize,
    pub rows: Vec<WignerTailRow>,
}

/// Monte-Carlo exceedance frequencies for the zero-diagonal Gaussian matrix,
/// against the analytic tail bounds evaluated per threshold.
pub fn tail_check_wigner(
    n: usize,
    trials: usize,
    t_values: &[f64],
    seed: u64,
) -> Result<WignerTailReport> {
    if trials == 0 {
        return Err(Error::InvalidParam("trials must be >= 1".into()));
    }
    let mut spec_norms = Vec::with_capacity(trials);
    let mut inf_norms = Vec::with_capacity(trials);
    for trial in 0..trials {
        let inst = gen_z2(n, Snr::Sigma(1.0), seed ^ (trial as u64).wrapping_mul(0x9e37_79b9))?;
        let w = inst.y.noise().as_op();
        spec_norms.push(spectral_norm(w, (1e-6 * n as f64).max(1e-9))?);
        let ones = vec![1.0; n];
        let w1 = w.apply(&ones);
        inf_norms.push(w1.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    }
    let nf = n as f64;
    let unit_scale = (nf - 1.0).max(1.0).sqrt();
    let rows = t_values
        .iter()
        .map(|&t| {
            let spec_thresh = 2.0 * nf.sqrt() + t;
            let inf_thresh = (2.0 * nf.ln() + t).sqrt();
            WignerTailRow {
                t,
                bound_spec: (-t * t / 4.0).exp(),
                freq_spec: spec_norms.iter().filter(|&&v| v >= spec_thresh).count() as f64
                    / trials as f64,
                bound_inf: (-t / 2.0).exp(),
                freq_inf: inf_norms.iter().filter(|&&v| v >= inf_thresh).count() as f64
                    / trials as f64,
                freq_inf_normalized: inf_norms
                    .iter()
                    .filter(|&&v| v / unit_scale >= inf_thresh)
                    .count() as f64
                    / trials as f64,
            }
        })
        .collect();
    Ok(WignerTailReport { n, trials, rows })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SbmTailReport {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    /// Average degree parameter `d = (a + b) / 2`.
    pub d: f64,
    pub rows: Vec<NoiseSummary>,
    pub median_spec_norm: f64,
    pub median_inf_norm: f64,
    pub median_sdp_over_n: Option<f64>,
    /// Median of `(||E|| - 3) / sqrt(ln n / d)`, floored at 0. Reported,
    /// not asserted: the matching bound holds up to an unspecified constant.
    pub fitted_c_spec: f64,
    /// Median of `||E g||_inf / (sqrt(ln n) + ln n / sqrt(d))`.
    pub fitted_c_inf: f64,
    /// Median of `(SDP(E)/n - 2) / (ln d * d^{-1/10})`, floored at 0.
    pub fitted_c_sdp: Option<f64>,
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = xs.len();
    if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        xs[m / 2]
    } else {
        0.5 * (xs[m / 2 - 1] + xs[m / 2])
    }
}

/// Per-trial noise magnitudes of the centered graph fluctuation, with
/// bound-shaped fitted constants. `with_sdp` additionally brackets
/// `SDP(E)/n` per trial (markedly slower).
pub fn tail_check_sbm(
    n: usize,
    a: f64,
    b: f64,
    trials: usize,
    seed: u64,
    with_sdp: bool,
) -> Result<SbmTailReport> {
    if trials == 0 {
        return Err(Error::InvalidParam("trials must be >= 1".into()));
    }
    let mut rows = Vec::with_capacity(trials);
    for trial in 0..trials {
        let inst = gen_sbm(
            n,
            SbmParams::Ab { a, b },
            seed ^ (trial as u64).wrapping_mul(0xd131_0ba6),
        )?;
        let (e, _, _) = noise_decomposition(&inst);
        let spec = spectral_norm(&e, (1e-6 * n as f64).max(1e-9))?;
        let gf: Vec<f64> = inst.g.iter().map(|&s| s as f64).collect();
        let eg = e.apply(&gf);
        let inf = eg.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let sdp_over_n = if with_sdp {
            let cfg = SolverConfig::for_dim(n).with_seed(inst.seed ^ 0xabcd);
            let (lo, hi) = certify::sdp_value_estimate(&e, &cfg)?;
            Some(0.5 * (lo + hi) / n as f64)
        } else {
            None
        };
        rows.push(NoiseSummary {
            spec_norm: spec,
            inf_norm_signal: inf,
            sdp_over_n,
            gamma_hat: gamma_hat(n, spec, inf),
            c: 0.0,
        });
    }
    let d = (a + b) / 2.0;
    let nf = n as f64;
    let mut specs: Vec<f64> = rows.iter().map(|r| r.spec_norm).collect();
    let mut infs: Vec<f64> = rows.iter().map(|r| r.inf_norm_signal).collect();
    let mut c_spec: Vec<f64> = rows
        .iter()
        .map(|r| ((r.spec_norm - 3.0) / (nf.ln() / d).sqrt()).max(0.0))
        .collect();
    let mut c_inf: Vec<f64> = rows
        .iter()
        .map(|r| r.inf_norm_signal / (nf.ln().sqrt() + nf.ln() / d.sqrt()))
        .collect();
    let (median_sdp, fitted_sdp) = if with_sdp {
        let mut sdps: Vec<f64> = rows.iter().filter_map(|r| r.sdp_over_n).collect();
        let mut fits: Vec<f64> = sdps
            .iter()
            .map(|&s| ((s - 2.0) / (d.ln() * d.powf(-0.1))).max(0.0))
            .collect();
        (Some(median(&mut sdps)), Some(median(&mut fits)))
    } else {
        (None, None)
    };
    Ok(SbmTailReport {
        n,
        a,
        b,
        d,
        median_spec_norm: median(&mut specs),
        median_inf_norm: median(&mut infs),
        median_sdp_over_n: median_sdp,
        fitted_c_spec: median(&mut c_spec),
        fitted_c_inf: median(&mut c_inf),
        fitted_c_sdp: fitted_sdp,
        rows,
    })
}

/// JSON sidecar stored next to a matrix file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSidecar {
    pub model: String,
    pub n: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Omitted (rather than null) in the noiseless case where it is infinite.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_ab: Option<f64>,
    pub labels: Vec<i8>,
}

fn write_sidecar(path: &Path, sidecar: &InstanceSidecar) -> Result<()> {
    let s = serde_json::to_string_pretty(sidecar)
        .map_err(|e| Error::Config(format!("sidecar encode: {e}")))?;
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_sidecar(path: &Path) -> Result<InstanceSidecar> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::Config(format!("sidecar decode: {e}")))
}

/// Write `<prefix>.coord` (densified observation) and `<prefix>.json`.
pub fn save_z2(inst: &Z2Instance, prefix: &Path) -> Result<()> {
    let coord = prefix.with_extension("coord");
    write_coord_file(&coord, &inst.y.to_dense())?;
    let sidecar = InstanceSidecar {
        model: "z2".into(),
        n: inst.n(),
        seed: inst.seed,
        sigma: Some(inst.sigma),
        lambda: inst.lambda.is_finite().then_some(inst.lambda),
        p: None,
        q: None,
        a: None,
        b: None,
        lambda_ab: None,
        labels: inst.z.clone(),
    };
    write_sidecar(&prefix.with_extension("json"), &sidecar)
}

/// Write `<prefix>.coord` (raw adjacency triplets) and `<prefix>.json`.
pub fn save_sbm(inst: &SbmInstance, prefix: &Path) -> Result<()> {
    let coord = prefix.with_extension("coord");
    write_coord_sparse_file(&coord, &inst.a)?;
    let sidecar = InstanceSidecar {
        model: "sbm".into(),
        n: inst.n(),
        seed: inst.seed,
        sigma: None,
        lambda: None,
        p: Some(inst.p),
        q: Some(inst.q),
        a: Some(inst.a_param),
        b: Some(inst.b_param),
        lambda_ab: Some(inst.lambda_ab),
        labels: inst.g.clone(),
    };
    write_sidecar(&prefix.with_extension("json"), &sidecar)
}
