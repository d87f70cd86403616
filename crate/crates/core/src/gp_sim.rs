//! Stationary centered unit-variance Gaussian sequences.
//!
//! Paths are drawn exactly by circulant embedding of the Toeplitz covariance;
//! small joint vectors (used by the limit functionals) are drawn from a
//! factor of their covariance matrix.

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex64, Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Autocovariance family of the latent Gaussian driver. All families have
/// `γ₀ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum AcfModel {
    /// `γₙ = φⁿ`.
    Ar1 { phi: f64 },
    /// Fractional Gaussian noise increments,
    /// `γₙ = ½(|n+1|^{2H} − 2|n|^{2H} + |n−1|^{2H}) ~ H(2H−1) n^{2H−2}`.
    Fgn { hurst: f64 },
    WhiteNoise,
    /// Explicit `γ₀..γ_{max_lag}`; lags past the table are zero when
    /// simulating.
    Custom { gamma: Vec<f64> },
}

impl AcfModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            AcfModel::Ar1 { phi } if !(phi.abs() < 1.0) => {
                Err(Error::Config(format!("AR(1) coefficient must satisfy |phi| < 1, got {phi}")))
            }
            AcfModel::Fgn { hurst } if !(*hurst > 0.0 && *hurst < 1.0) => {
                Err(Error::Config(format!("Hurst index must lie in (0, 1), got {hurst}")))
            }
            AcfModel::Custom { gamma } => {
                if gamma.is_empty() || (gamma[0] - 1.0).abs() > 1e-12 {
                    return Err(Error::Config("custom autocovariance must start with gamma_0 = 1".into()));
                }
                if gamma.iter().any(|g| !g.is_finite()) {
                    return Err(Error::Config("custom autocovariance has non-finite entries".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Largest stored lag for `Custom`; other families are unbounded.
    pub fn max_lag(&self) -> Option<usize> {
        match self {
            AcfModel::Custom { gamma } => Some(gamma.len() - 1),
            _ => None,
        }
    }

    /// Autocovariance at `lag`. `Custom` beyond its table is a range error.
    pub fn acf_eval(&self, lag: usize) -> Result<f64> {
        if let Some(max_lag) = self.max_lag() {
            if lag > max_lag {
                return Err(Error::LagOutOfRange { lag, max_lag });
            }
        }
        Ok(self.gamma(lag))
    }

    /// Autocovariance with `Custom` truncated to zero past its table.
    pub fn gamma(&self, lag: usize) -> f64 {
        if lag == 0 {
            return 1.0;
        }
        match self {
            AcfModel::Ar1 { phi } => phi.powi(lag as i32),
            AcfModel::Fgn { hurst } => {
                let two_h = 2.0 * hurst;
                let n = lag as f64;
                0.5 * ((n + 1.0).powf(two_h) - 2.0 * n.powf(two_h) + (n - 1.0).powf(two_h))
            }
            AcfModel::WhiteNoise => 0.0,
            AcfModel::Custom { gamma } => gamma.get(lag).copied().unwrap_or(0.0),
        }
    }
}

/// A simulated realization of the latent process.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPath {
    pub values: Vec<f64>,
    pub seed: u64,
    pub acf: AcfModel,
}

/// Precomputed circulant embedding for paths of a fixed length.
pub struct CirculantSampler {
    acf: AcfModel,
    n: usize,
    sqrt_eigen: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    clipped: usize,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("acf", &self.acf)
            .field("n", &self.n)
            .field("embedding", &self.sqrt_eigen.len())
            .field("clipped", &self.clipped)
            .finish()
    }
}

const EIGEN_TOL: f64 = 1e-10;
const MAX_DOUBLINGS: u32 = 4;

fn circulant_eigenvalues(acf: &AcfModel, half: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let size = 2 * half;
    let mut row: Vec<Complex64> = (0..size)
        .map(|k| {
            let lag = if k <= half { k } else { size - k };
            Complex64::new(acf.gamma(lag), 0.0)
        })
        .collect();
    planner.plan_fft_forward(size).process(&mut row);
    row.into_iter().map(|c| c.re).collect()
}

impl CirculantSampler {
    /// Builds the embedding, doubling its size a few times if the minimal
    /// one has eigenvalues below `−1e−10·λ_max`. Eigenvalues inside the
    /// tolerance band are clipped to zero.
    pub fn new(acf: &AcfModel, n: usize) -> Result<Self> {
        acf.validate()?;
        if n == 0 {
            return Err(Error::Config("path length must be positive".into()));
        }
        let mut planner = FftPlanner::new();
        let mut half = n.next_power_of_two().max(2);
        let mut last_failure = None;
        for _ in 0..=MAX_DOUBLINGS {
            let eig = circulant_eigenvalues(acf, half, &mut planner);
            let lmax = eig.iter().cloned().fold(f64::MIN, f64::max);
            let tol = EIGEN_TOL * lmax.abs();
            let (worst_idx, worst) = eig
                .iter()
                .copied()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if worst >= -tol {
                let size = eig.len();
                let clipped = eig.iter().filter(|&&l| l < 0.0).count();
                let sqrt_eigen = eig.iter().map(|&l| (l.max(0.0) / size as f64).sqrt()).collect();
                return Ok(CirculantSampler {
                    acf: acf.clone(),
                    n,
                    sqrt_eigen,
                    fft: planner.plan_fft_forward(size),
                    clipped,
                });
            }
            last_failure = Some(Error::Spectral { index: worst_idx, value: worst, tolerance: tol });
            half *= 2;
        }
        Err(last_failure.unwrap())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of slightly negative eigenvalues clipped to zero.
    pub fn clipped_eigenvalues(&self) -> usize {
        self.clipped
    }

    pub fn embedding_size(&self) -> usize {
        self.sqrt_eigen.len()
    }

    pub fn sample(&self, seed: u64) -> GaussianPath {
        let mut values = vec![0.0; self.n];
        self.sample_into(seed, &mut values);
        GaussianPath { values, seed, acf: self.acf.clone() }
    }

    pub fn sample_into(&self, seed: u64, out: &mut [f64]) {
        let mut rng = rng_from_seed(seed);
        if matches!(self.acf, AcfModel::WhiteNoise) {
            for v in out.iter_mut().take(self.n) {
                *v = rng.sample(StandardNormal);
            }
            return;
        }
        let mut buf: Vec<Complex64> = self
            .sqrt_eigen
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut buf);
        for (o, c) in out.iter_mut().zip(buf.iter()).take(self.n) {
            *o = c.re;
        }
    }
}

/// Draws a length-`n` path of the stationary Gaussian process with the given
/// autocovariance; deterministic in `(acf, n, seed)`.
pub fn simulate_path(acf: &AcfModel, n: usize, seed: u64) -> Result<GaussianPath> {
    Ok(CirculantSampler::new(acf, n)?.sample(seed))
}

/// Covariance matrix of `(X_{i₁}, …, X_{i_d})`.
pub fn joint_cov_matrix(acf: &AcfModel, indices: &[usize]) -> Result<DMatrix<f64>> {
    acf.validate()?;
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config(format!("indices must be distinct: {indices:?}")));
    }
    let d = indices.len();
    let m = DMatrix::from_fn(d, d, |a, b| acf.gamma(indices[a].abs_diff(indices[b])));
    let eig = SymmetricEigen::new(m.clone());
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if lmin < -EIGEN_TOL * lmax.max(1.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: lmin });
    }
    Ok(m)
}

/// Sampler for a small Gaussian vector with a given covariance, via
/// Cholesky (or a symmetric square root when the matrix is singular).
#[derive(Debug, Clone)]
pub struct JointGaussian {
    factor: DMatrix<f64>,
}

impl JointGaussian {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let factor = match cov.clone().cholesky() {
            Some(ch) => ch.l(),
            None => {
                let eig = SymmetricEigen::new(cov.clone());
                let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
                if lmin < -1e-10 {
                    return Err(Error::NotPositiveDefinite { min_eigenvalue: lmin });
                }
                let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
                &eig.eigenvectors * DMatrix::from_diagonal(&sqrt)
            }
        };
        Ok(JointGaussian { factor })
    }

    pub fn from_indices(acf: &AcfModel, indices: &[usize]) -> Result<Self> {
        Self::new(&joint_cov_matrix(acf, indices)?)
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `out = L·w` for a vector `w` of independent standard normals.
    pub fn transform(&self, white: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let mut s = 0.0;
            for j in 0..d {
                s += self.factor[(i, j)] * white[j];
            }
            out[i] = s;
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, white: &mut [f64], out: &mut [f64]) {
        for w in white.iter_mut() {
            *w = rng.sample(StandardNormal);
        }
        self.transform(white, out);
    }
}
