//! Hermite expansions of functions of Gaussian vectors, Hermite ranks of the
//! limit integrands, and an empirical check of the variance inequality for
//! partial sums of subordinated long-memory sequences.

use crate::error::{Error, Result};
use crate::gp_sim::{joint_cov_matrix, AcfModel, CirculantSampler};
use crate::limits::{LimitQuery, Target};
use crate::quadrature::GaussHermite;
use crate::rng::derive_path;
use crate::stats::{linear_fit, variance};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

pub const DEFAULT_RANK_TOL: f64 = 1e-7;
const MAX_DIM: usize = 3;
const MAX_ORDER: usize = 6;

/// Probabilists' Hermite polynomial `H_q(x)`.
pub fn hermite_poly(q: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for j in 0..q {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `H_0(x), …, H_q(x)`.
fn hermite_table(q: usize, x: f64) -> Vec<f64> {
    let mut h = vec![1.0; q + 1];
    if q >= 1 {
        h[1] = x;
    }
    for j in 1..q {
        h[j + 1] = x * h[j] - j as f64 * h[j - 1];
    }
    h
}

fn factorial(q: usize) -> f64 {
    (1..=q).map(|v| v as f64).product()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermiteExpansion1d {
    /// `J(q) = E[f(X) H_q(X)]`.
    pub coeffs: Vec<f64>,
    /// `E[f(X)²]`.
    pub second_moment: f64,
    /// Smallest `q ≥ 1` whose orthonormal coefficient `J(q)/√q!` exceeds
    /// `rank_tol·√E[f²]`; `None` when `f` is numerically constant.
    pub rank: Option<usize>,
    pub rank_tol: f64,
}

impl HermiteExpansion1d {
    /// Coefficient of `H_q` in the expansion, `J(q)/q!`.
    pub fn normalized(&self, q: usize) -> f64 {
        self.coeffs[q] / factorial(q)
    }
}

/// Coefficients against `H_0..H_{q_max}` by 128-node Gauss–Hermite
/// quadrature.
pub fn hermite_coeffs_1d<F: Fn(f64) -> f64>(f: F, q_max: usize, rank_tol: f64) -> Result<HermiteExpansion1d> {
    let gh = GaussHermite::new(128);
    let mut coeffs = vec![0.0; q_max + 1];
    let mut second = 0.0;
    for (&x, &w) in gh.nodes().iter().zip(gh.weights()) {
        let v = f(x);
        second += w * v * v;
        for (q, hq) in hermite_table(q_max, x).into_iter().enumerate() {
            coeffs[q] += w * v * hq;
        }
    }
    if !second.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric("Hermite quadrature overflowed; f is not square integrable on the nodes".into()));
    }
    let floor = rank_tol * second.sqrt();
    let rank = (1..=q_max).find(|&q| coeffs[q].abs() / factorial(q).sqrt() > floor);
    Ok(HermiteExpansion1d { coeffs, second_moment: second, rank, rank_tol })
}

/// Expansion of `f(X)` for a Gaussian vector `X` with unit variances,
/// computed in whitened coordinates `X = L·W`; Hermite ranks are invariant
/// under this change of basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermiteExpansion {
    pub dim: usize,
    /// `E[f(LW) ∏ H_{q_i}(W_i)]` keyed by the multi-index `q`.
    pub coeffs: BTreeMap<Vec<usize>, f64>,
    pub second_moment: f64,
    pub rank: Option<usize>,
    pub rank_tol: f64,
}

fn multi_indices(dim: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; dim];
    fn rec(d: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if d == cur.len() {
            out.push(cur.clone());
            return;
        }
        for q in 0..=left {
            cur[d] = q;
            rec(d + 1, left - q, cur, out);
        }
        cur[d] = 0;
    }
    rec(0, max_order, &mut cur, &mut out);
    out
}

/// Multivariate expansion up to total order `q_max ≤ 6`, `dim ≤ 3`.
pub fn hermite_coeffs<F: Fn(&[f64]) -> f64>(
    f: F,
    cov: &nalgebra::DMatrix<f64>,
    q_max: usize,
    rank_tol: f64,
) -> Result<HermiteExpansion> {
    let dim = cov.nrows();
    if dim == 0 || dim > MAX_DIM || q_max > MAX_ORDER {
        return Err(Error::Unimplemented(format!(
            "tensor quadrature is capped at dimension {MAX_DIM} and order {MAX_ORDER} (got {dim}, {q_max})"
        )));
    }
    let chol = crate::gp_sim::JointGaussian::new(cov)?;
    let nodes = if dim == 3 { 64 } else { 128 };
    let gh = GaussHermite::new(nodes);
    let tables: Vec<Vec<f64>> = gh.nodes().iter().map(|&x| hermite_table(q_max, x)).collect();
    let qs = multi_indices(dim, q_max);
    let mut sums = vec![0.0; qs.len()];
    let mut second = 0.0;
    let (mut w, mut x) = (vec![0.0; dim], vec![0.0; dim]);
    let mut idx = vec![0usize; dim];
    loop {
        let mut wt = 1.0;
        for d in 0..dim {
            w[d] = gh.nodes()[idx[d]];
            wt *= gh.weights()[idx[d]];
        }
        chol.transform(&w, &mut x);
        let v = f(&x);
        second += wt * v * v;
        for (s, q) in sums.iter_mut().zip(&qs) {
            let mut p = wt * v;
            for d in 0..dim {
                p *= tables[idx[d]][q[d]];
            }
            *s += p;
        }
        let mut d = 0;
        while d < dim {
            idx[d] += 1;
            if idx[d] < nodes {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == dim {
            break;
        }
    }
    if !second.is_finite() || sums.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric("Hermite quadrature overflowed".into()));
    }
    let floor = rank_tol * second.sqrt();
    let mut rank: Option<usize> = None;
    let mut coeffs = BTreeMap::new();
    for (q, s) in qs.into_iter().zip(sums) {
        let order: usize = q.iter().sum();
        let norm: f64 = q.iter().map(|&qi| factorial(qi)).product::<f64>().sqrt();
        if order >= 1 && s.abs() / norm > floor {
            rank = Some(rank.map_or(order, |r| r.min(order)));
        }
        coeffs.insert(q, s);
    }
    Ok(HermiteExpansion { dim, coeffs, second_moment: second, rank, rank_tol })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    /// `τ(A, B)` per target point.
    pub tau_ab: Vec<Option<usize>>,
    /// `τ(A) = τ(A, ℝ^{h'+1})`.
    pub tau_a: Option<usize>,
    /// Minimum of `τ(A, (−∞, y])` over the grid.
    pub tau_star: Option<usize>,
    /// No nonzero coefficient below `q_max`, e.g. for constant volatility.
    pub degenerate: bool,
}

/// Hermite ranks of `G(A, B, x, x') = ν(σ(x)^{−1}·A)/(E[σ^α])^β ·
/// P(σ(x')·Z ∈ B)` with respect to `(X_{1,h}, X_{m,m+h'})`.
pub fn rank_of_g(q: &LimitQuery, q_max: usize, rank_tol: f64) -> Result<RankReport> {
    q.validate()?;
    let cfg = &q.cfg;
    let (h, hp, m) = (cfg.h, cfg.h_prime, cfg.m);
    if h + hp + 1 > MAX_DIM {
        return Err(Error::Unimplemented(format!("h + h' + 1 = {} exceeds the quadrature cap {MAX_DIM}", h + hp + 1)));
    }
    let mut indices: Vec<usize> = (0..h).collect();
    indices.extend(m - 1..m + hp);
    let cov = joint_cov_matrix(&cfg.acf, &indices)?;
    let alpha = cfg.alpha();
    let norm = cfg.vol.moment(alpha).powi(q.set.beta() as i32);
    let weight = |x: &[f64]| {
        let ua: Vec<f64> = x[..h].iter().map(|&v| cfg.vol.eval_pow(v, alpha)).collect();
        q.set.nu_pow(&ua) / norm
    };
    let points: Vec<Box<dyn Fn(&[f64]) -> f64 + '_>> = match &q.target {
        Target::CdfCurve { grid } => grid
            .iter()
            .map(|&y| -> Box<dyn Fn(&[f64]) -> f64 + '_> {
                Box::new(move |x: &[f64]| x[h..].iter().map(|&v| cfg.tail.cdf(y / cfg.vol.eval(v))).product())
            })
            .collect(),
        Target::EventProb { intervals } => vec![Box::new(move |x: &[f64]| {
            x[h..]
                .iter()
                .zip(intervals)
                .map(|(&v, &(lo, hi))| {
                    let s = cfg.vol.eval(v);
                    let up = if hi == f64::INFINITY { 1.0 } else { cfg.tail.cdf(hi / s) };
                    let dn = if lo == f64::NEG_INFINITY { 0.0 } else { cfg.tail.cdf(lo / s) };
                    up - dn
                })
                .product()
        })],
        Target::SumCdf { .. } => {
            return Err(Error::Unimplemented("Hermite ranks for the sum-of-future target".into()));
        }
    };
    let mut tau_ab = Vec::with_capacity(points.len());
    for p in &points {
        let e = hermite_coeffs(|x| weight(x) * p(x), &cov, q_max, rank_tol)?;
        tau_ab.push(e.rank);
    }
    let tau_a = hermite_coeffs(weight, &cov, q_max, rank_tol)?.rank;
    let tau_star = match q.target {
        Target::CdfCurve { .. } => tau_ab.iter().flatten().min().copied(),
        _ => None,
    };
    let degenerate = tau_a.is_none() && tau_ab.iter().all(Option::is_none);
    Ok(RankReport { tau_ab, tau_a, tau_star, degenerate })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceRateRow {
    pub n: usize,
    /// Variance of `n^{−1} Σ f(X_j)` across replicates.
    pub variance: f64,
    /// `n^{2q(H−1)} ∨ n^{−1}` (or `n^{−1}` under weak dependence).
    pub rate: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceRateReport {
    pub rank: usize,
    pub rows: Vec<VarianceRateRow>,
    /// Least-squares slope of `log variance` on `log n`.
    pub slope: f64,
    /// Predicted slope of the dominant rate.
    pub expected_slope: f64,
    /// Smallest `C` with `variance ≤ C·rate` on every row.
    pub fitted_c: f64,
    /// Slope of `log ratio` on `log n`; nonpositive up to noise when the
    /// bound holds with a single constant.
    pub ratio_slope: f64,
    pub bound_holds: bool,
}

/// Dominant variance rate exponent of a rank-`q` functional.
pub fn variance_rate_exponent(acf: &AcfModel, rank: usize) -> f64 {
    match acf {
        AcfModel::Fgn { hurst } => (2.0 * rank as f64 * (hurst - 1.0)).max(-1.0),
        _ => -1.0,
    }
}

/// Empirical variance of `n^{−1}Σ_{j≤n} f(X_j)` over `replicates` paths at
/// each `n`, checked against `C·(n^{2q(H−1)} ∨ n^{−1})`.
pub fn variance_rate_check<F: Fn(f64) -> f64 + Sync>(
    f: F,
    rank: usize,
    acf: &AcfModel,
    n_list: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<VarianceRateReport> {
    acf.validate()?;
    if !matches!(acf, AcfModel::Ar1 { .. } | AcfModel::Fgn { .. }) {
        return Err(Error::Config("variance check supports AR(1) and fractional Gaussian noise".into()));
    }
    if rank == 0 || replicates < 3 || n_list.len() < 2 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("need rank >= 1, >= 3 replicates and an increasing n list".into()));
    }
    let exponent = variance_rate_exponent(acf, rank);
    let mut rows = Vec::with_capacity(n_list.len());
    for (i, &n) in n_list.iter().enumerate() {
        let sampler = CirculantSampler::new(acf, n)?;
        let means: Vec<f64> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let path = sampler.sample(derive_path(seed, &[i as u64, r as u64]));
                path.values.iter().map(|&x| f(x)).sum::<f64>() / n as f64
            })
            .collect();
        let v = variance(&means);
        let rate = (n as f64).powf(exponent);
        rows.push(VarianceRateRow { n, variance: v, rate, ratio: v / rate });
    }
    let ln_n: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let slope = linear_fit(&ln_n, &rows.iter().map(|r| r.variance.ln()).collect::<Vec<_>>()).slope;
    let ratio_slope = linear_fit(&ln_n, &rows.iter().map(|r| r.ratio.ln()).collect::<Vec<_>>()).slope;
    let fitted_c = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(VarianceRateReport {
        rank,
        rows,
        slope,
        expected_slope: exponent,
        fitted_c,
        ratio_slope,
        bound_holds: ratio_slope <= 0.1,
    })
}
