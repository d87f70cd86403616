//! Limit functionals of the conditional extremogram.
//!
//! Every quantity is a ratio of expectations over the latent Gaussian vector,
//! with the weight `ν(σ(X_{1,h})^{−1}·A)` in both numerator and denominator.
//! Expectations are estimated by Monte Carlo over chunks of draws; chunk `c`
//! uses the stream `derive_seed(seed, c)` and chunk sums are merged in chunk
//! order, so results do not depend on the number of worker threads. All
//! targets of one query share the same latent draws. For exponential
//! volatility the latent vector is drawn from an exponentially tilted law
//! that makes the weight constant.

use crate::cones::ExtremeSet;
use crate::error::{Error, Result};
use crate::gp_sim::{AcfModel, JointGaussian};
use crate::quadrature::{integrate, normal_expect_adaptive};
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats::isotonic_nondecreasing;
use crate::sv_model::{sigma_alpha_moment, SvConfig, VolatilityFn};
use crate::tails::{convolution_excess, TailModel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const CHUNK: usize = 4096;

/// Default dilation grid for [`bias_rate_vn`].
pub const DEFAULT_S_GRID: [f64; 6] = [1.0, 1.25, 1.5, 2.0, 3.0, 5.0];

/// Target event for the future window `Y_{m, m+h'}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Target {
    /// `B = (−∞, y]^{h'+1}` for each `y` of the grid.
    CdfCurve { grid: Vec<f64> },
    /// `B = ∏ (lo_i, hi_i]`.
    EventProb { intervals: Vec<(f64, f64)> },
    /// `{Y_m + Y_{m+1} ≤ y}` for each `y`; needs `h' = 1`.
    SumCdf { grid: Vec<f64> },
}

impl Target {
    fn len(&self) -> usize {
        match self {
            Target::CdfCurve { grid } | Target::SumCdf { grid } => grid.len(),
            Target::EventProb { .. } => 1,
        }
    }

    /// Abscissa reported for point `i`.
    fn label(&self, i: usize) -> f64 {
        match self {
            Target::CdfCurve { grid } | Target::SumCdf { grid } => grid[i],
            Target::EventProb { .. } => f64::NAN,
        }
    }

    fn is_curve(&self) -> bool {
        !matches!(self, Target::EventProb { .. })
    }

    /// Per-coordinate intervals of point `i` for product events.
    fn intervals(&self, i: usize, width: usize) -> Option<Vec<(f64, f64)>> {
        match self {
            Target::CdfCurve { grid } => Some(vec![(f64::NEG_INFINITY, grid[i]); width]),
            Target::EventProb { intervals } => Some(intervals.clone()),
            Target::SumCdf { .. } => None,
        }
    }

    fn validate(&self, h_prime: usize) -> Result<()> {
        match self {
            Target::CdfCurve { grid } | Target::SumCdf { grid } => {
                if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config("y grid must be nonempty and strictly increasing".into()));
                }
                if matches!(self, Target::SumCdf { .. }) && h_prime != 1 {
                    return Err(Error::Config("sum target needs h' = 1".into()));
                }
            }
            Target::EventProb { intervals } => {
                if intervals.len() != h_prime + 1 {
                    return Err(Error::Shape { expected: h_prime + 1, got: intervals.len() });
                }
                if intervals.iter().any(|&(lo, hi)| !(lo <= hi)) {
                    return Err(Error::Config("event intervals need lo <= hi".into()));
                }
            }
        }
        Ok(())
    }
}

/// Model, conditioning set, target, and Monte Carlo budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitQuery {
    pub cfg: SvConfig,
    pub set: ExtremeSet,
    pub target: Target,
    pub n_mc: usize,
    pub seed: u64,
}

impl LimitQuery {
    pub fn validate(&self) -> Result<()> {
        self.cfg.acf.validate()?;
        self.cfg.vol.validate()?;
        self.cfg.tail.validate()?;
        self.set.validate()?;
        if self.cfg.h != self.set.dim() {
            return Err(Error::Config(format!(
                "window h = {} does not match the set dimension {}",
                self.cfg.h,
                self.set.dim()
            )));
        }
        if self.cfg.m <= self.cfg.h {
            return Err(Error::Config(format!("lead m = {} must exceed h = {}", self.cfg.m, self.cfg.h)));
        }
        if self.n_mc < 2 {
            return Err(Error::Config("n_mc must be at least 2".into()));
        }
        let moment = sigma_alpha_moment(&self.cfg.vol, self.cfg.alpha(), 2)?;
        if moment.divergent {
            return Err(Error::Config("E[σ^{2α}(X)] is infinite".into()));
        }
        self.target.validate(self.cfg.h_prime)
    }
}

/// A Monte Carlo ratio estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitValue {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub y: f64,
    /// After isotonic correction.
    pub value: f64,
    /// Plain ratio of Monte Carlo means.
    pub raw: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCurve {
    pub points: Vec<CurvePoint>,
    /// Monte Carlo mean of the conditioning weight `E[ν(σ(X)^{−1}·A)]`.
    pub weight_mean: f64,
    pub n_mc: usize,
}

/// Sums of `f_k`, `f_k²` and `f_k·f_0` over draws.
#[derive(Debug, Clone, PartialEq)]
struct Sums {
    count: usize,
    sum: Vec<f64>,
    sq: Vec<f64>,
    cross: Vec<f64>,
}

impl Sums {
    fn new(k: usize) -> Self {
        Sums { count: 0, sum: vec![0.0; k], sq: vec![0.0; k], cross: vec![0.0; k] }
    }

    fn push(&mut self, f: &[f64]) {
        self.count += 1;
        for (k, &v) in f.iter().enumerate() {
            self.sum[k] += v;
            self.sq[k] += v * v;
            self.cross[k] += v * f[0];
        }
    }

    fn merge(&mut self, other: &Sums) {
        self.count += other.count;
        for k in 0..self.sum.len() {
            self.sum[k] += other.sum[k];
            self.sq[k] += other.sq[k];
            self.cross[k] += other.cross[k];
        }
    }

    fn mean(&self, k: usize) -> f64 {
        self.sum[k] / self.count as f64
    }

    /// `f_k / f_0` as a ratio of means with its delta-method standard error.
    fn ratio(&self, k: usize) -> LimitValue {
        let n = self.count as f64;
        let d = self.sum[0];
        let r = self.sum[k] / d;
        // var(f_k − r f_0) / (n E[f_0]²)
        let v = (self.sq[k] - 2.0 * r * self.cross[k] + r * r * self.sq[0]) / n;
        let dm = d / n;
        LimitValue { value: r, stderr: (v.max(0.0) / (n - 1.0)).sqrt() / dm }
    }

    fn mean_stderr(&self, k: usize) -> LimitValue {
        let n = self.count as f64;
        let m = self.sum[k] / n;
        let v = (self.sq[k] / n - m * m).max(0.0);
        LimitValue { value: m, stderr: (v / (n - 1.0)).sqrt() }
    }
}

/// Runs `eval(x, rng, out)` on `n_mc` draws of the Gaussian vector with the
/// covariance of `acf` at `indices`.
fn mc_sums<F>(acf: &AcfModel, indices: &[usize], n_outputs: usize, n_mc: usize, seed: u64, eval: F) -> Result<Sums>
where
    F: Fn(&[f64], &mut ChaCha8Rng, &mut [f64]) + Sync,
{
    mc_sums_tilted(acf, indices, n_outputs, n_mc, seed, None, eval)
}

/// Mixture of mean shifts of the latent vector under which the conditioning
/// weight `ν(σ(x)^{−1}·A)` becomes the constant `weight` for `σ = c·e^x`.
/// Component `S` of `ν = Σ_S ∏_{i∈S} σ^α(x_i)` shifts the mean by
/// `α·Σ·1_S` and is picked with probability proportional to
/// `E[∏_{i∈S} σ^α(X_i)]`.
struct Tilt {
    cumulative: Vec<f64>,
    shifts: Vec<Vec<f64>>,
    weight: f64,
}

impl Tilt {
    fn for_query(set: &ExtremeSet, vol: &VolatilityFn, acf: &AcfModel, alpha: f64, indices: &[usize]) -> Option<Tilt> {
        let factor = match vol {
            VolatilityFn::Exp => 1.0,
            VolatilityFn::Scaled { factor, inner } if **inner == VolatilityFn::Exp => *factor,
            _ => return None,
        };
        let monomials = nu_monomials(set);
        let mut masses = Vec::with_capacity(monomials.len());
        let mut shifts = Vec::with_capacity(monomials.len());
        let mut weight = 0.0;
        for s in &monomials {
            let mass = lognormal_product_moment(&VolatilityFn::Exp, acf, alpha, &s.iter().map(|&i| indices[i]).collect::<Vec<_>>())?;
            weight += factor.powf(alpha * s.len() as f64) * mass;
            masses.push(mass);
            shifts.push(
                indices
                    .iter()
                    .map(|&a| alpha * s.iter().map(|&i| acf.gamma(a.abs_diff(indices[i]))).sum::<f64>())
                    .collect(),
            );
        }
        let total: f64 = masses.iter().sum();
        let mut acc = 0.0;
        let cumulative = masses
            .iter()
            .map(|m| {
                acc += m / total;
                acc
            })
            .collect();
        Some(Tilt { cumulative, shifts, weight })
    }

    fn shift<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut [f64]) {
        let c = if self.shifts.len() == 1 {
            0
        } else {
            let u: f64 = rng.random();
            self.cumulative.partition_point(|&p| p < u).min(self.shifts.len() - 1)
        };
        for (v, s) in x.iter_mut().zip(&self.shifts[c]) {
            *v += s;
        }
    }
}

fn mc_sums_tilted<F>(
    acf: &AcfModel,
    indices: &[usize],
    n_outputs: usize,
    n_mc: usize,
    seed: u64,
    tilt: Option<&Tilt>,
    eval: F,
) -> Result<Sums>
where
    F: Fn(&[f64], &mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let gauss = JointGaussian::from_indices(acf, indices)?;
    let dim = gauss.dim();
    let chunks = n_mc.div_ceil(CHUNK);
    let parts: Vec<Sums> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_from_seed(derive_seed(seed, c as u64));
            let size = CHUNK.min(n_mc - c * CHUNK);
            let mut white = vec![0.0; dim];
            let mut x = vec![0.0; dim];
            let mut out = vec![0.0; n_outputs];
            let mut sums = Sums::new(n_outputs);
            for _ in 0..size {
                gauss.sample(&mut rng, &mut white, &mut x);
                if let Some(t) = tilt {
                    t.shift(&mut rng, &mut x);
                }
                eval(&x, &mut rng, &mut out);
                sums.push(&out);
            }
            sums
        })
        .collect();
    let mut total = Sums::new(n_outputs);
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

/// `P(σ·Z ∈ ∏(lo_i, hi_i])` for independent coordinates.
fn box_probability(tail: &TailModel, sigmas: &[f64], intervals: &[(f64, f64)]) -> f64 {
    sigmas
        .iter()
        .zip(intervals)
        .map(|(&s, &(lo, hi))| {
            let upper = if hi == f64::INFINITY { 1.0 } else { tail.cdf(hi / s) };
            let lower = if lo == f64::NEG_INFINITY { 0.0 } else { tail.cdf(lo / s) };
            (upper - lower).max(0.0)
        })
        .product()
}

fn powers(vol: &VolatilityFn, x: &[f64], alpha: f64) -> Vec<f64> {
    x.iter().map(|&v| vol.eval_pow(v, alpha)).collect()
}

/// Unnormalized limit ratios for every target point, sharing latent draws.
fn ratio_values(q: &LimitQuery) -> Result<(Vec<LimitValue>, f64)> {
    q.validate()?;
    let cfg = &q.cfg;
    let (h, hp, m) = (cfg.h, cfg.h_prime, cfg.m);
    let alpha = cfg.alpha();
    let mut indices: Vec<usize> = (0..h).collect();
    indices.extend(m - 1..m + hp);
    let npts = q.target.len();
    let boxes: Option<Vec<Vec<(f64, f64)>>> =
        (0..npts).map(|i| q.target.intervals(i, hp + 1)).collect();
    let tilt = Tilt::for_query(&q.set, &cfg.vol, &cfg.acf, alpha, &indices);
    let sums = mc_sums_tilted(&cfg.acf, &indices, npts + 1, q.n_mc, q.seed, tilt.as_ref(), |x, rng, out| {
        let w = match &tilt {
            Some(t) => t.weight,
            None => q.set.nu_pow(&powers(&cfg.vol, &x[..h], alpha)),
        };
        out[0] = w;
        let sig: Vec<f64> = x[h..].iter().map(|&v| cfg.vol.eval(v)).collect();
        match (&boxes, &q.target) {
            (Some(b), _) => {
                for (i, iv) in b.iter().enumerate() {
                    out[i + 1] = w * box_probability(&cfg.tail, &sig, iv);
                }
            }
            (None, Target::SumCdf { grid }) => {
                // conditional Monte Carlo: P(σ₁Z₁ + σ₂Z₂ ≤ y | Z₁) = F((y − σ₁Z₁)/σ₂)
                let z = cfg.tail.draw(rng);
                for (i, &y) in grid.iter().enumerate() {
                    out[i + 1] = w * cfg.tail.cdf((y - sig[0] * z) / sig[1]);
                }
            }
            (None, _) => unreachable!("only the sum target lacks a product form"),
        }
    })?;
    let weight_mean = sums.mean(0);
    if !(weight_mean > 0.0) {
        return Err(Error::DegenerateSet(weight_mean));
    }
    Ok(((1..=npts).map(|k| sums.ratio(k)).collect(), weight_mean))
}

/// `ρ(A, B, m)` for a single product event `B`.
pub fn mc_rho_limit(q: &LimitQuery) -> Result<LimitValue> {
    if q.target.len() != 1 {
        return Err(Error::Config("ρ needs a single target event; use mc_psi_limit for curves".into()));
    }
    Ok(ratio_values(q)?.0[0])
}

/// `ρ(A, B, m)` for every target point without monotone correction.
pub fn mc_rho_values(q: &LimitQuery) -> Result<Vec<LimitValue>> {
    Ok(ratio_values(q)?.0)
}

/// Limiting conditional distribution curve `y ↦ Ψ(y)`.
pub fn mc_psi_limit(q: &LimitQuery) -> Result<LimitCurve> {
    if !q.target.is_curve() {
        return Err(Error::Config("Ψ needs a curve target".into()));
    }
    let (values, weight_mean) = ratio_values(q)?;
    let raw: Vec<f64> = values.iter().map(|v| v.value).collect();
    let corrected = isotonic_nondecreasing(&raw);
    let points = values
        .iter()
        .enumerate()
        .map(|(i, v)| CurvePoint {
            y: q.target.label(i),
            value: corrected[i].clamp(0.0, 1.0),
            raw: v.value,
            stderr: v.stderr,
        })
        .collect();
    Ok(LimitCurve { points, weight_mean, n_mc: q.n_mc })
}

/// Index subsets `S` with `ν(u^{−1}·A) = Σ_S ∏_{i∈S} u_i^α`.
fn nu_monomials(set: &ExtremeSet) -> Vec<Vec<usize>> {
    match *set {
        ExtremeSet::Box { h } => vec![(0..h).collect()],
        ExtremeSet::Sum { h } => (0..h).map(|i| vec![i]).collect(),
        ExtremeSet::Combined => vec![vec![0, 2], vec![1, 2]],
    }
}

/// `E[∏_{i∈S} σ^α(X_{idx_i})]` in closed form for log-normal and constant
/// volatilities.
fn lognormal_product_moment(vol: &VolatilityFn, acf: &AcfModel, alpha: f64, idx: &[usize]) -> Option<f64> {
    match vol {
        VolatilityFn::Exp => {
            let mut var = 0.0;
            for &a in idx {
                for &b in idx {
                    var += acf.gamma(a.abs_diff(b));
                }
            }
            Some((0.5 * alpha * alpha * var).exp())
        }
        VolatilityFn::Const { value } => Some(value.powf(alpha * idx.len() as f64)),
        VolatilityFn::Scaled { factor, inner } => {
            lognormal_product_moment(inner, acf, alpha, idx).map(|v| v * factor.powf(alpha * idx.len() as f64))
        }
        VolatilityFn::AbsPower { .. } => None,
    }
}

/// `μ_C(A)` in closed form when `σ` is exponential or constant.
pub fn mu_c_exact(set: &ExtremeSet, vol: &VolatilityFn, acf: &AcfModel, alpha: f64) -> Option<f64> {
    let num: Option<f64> = nu_monomials(set)
        .iter()
        .map(|s| lognormal_product_moment(vol, acf, alpha, s))
        .sum();
    Some(num? / vol.moment(alpha).powi(set.beta() as i32))
}

/// `μ_C(A) = E[ν(σ(X_{1,h})^{−1}·A)] / (E[σ^α(X)])^β` by Monte Carlo over the
/// numerator.
pub fn mu_c(
    set: &ExtremeSet,
    vol: &VolatilityFn,
    acf: &AcfModel,
    alpha: f64,
    n_mc: usize,
    seed: u64,
) -> Result<LimitValue> {
    set.validate()?;
    let m2 = sigma_alpha_moment(vol, alpha, 2)?;
    if m2.divergent {
        return Err(Error::Config("E[σ^{2α}(X)] is infinite".into()));
    }
    if n_mc < 2 {
        return Err(Error::Config("n_mc must be at least 2".into()));
    }
    let h = set.dim();
    let idx: Vec<usize> = (0..h).collect();
    let sums = mc_sums(acf, &idx, 1, n_mc, seed, |x, _, out| {
        out[0] = set.nu_pow(&powers(vol, x, alpha));
    })?;
    let denom = vol.moment(alpha).powi(set.beta() as i32);
    let v = sums.mean_stderr(0);
    Ok(LimitValue { value: v.value / denom, stderr: v.stderr / denom })
}

/// `E[σ^α(X_0)σ^α(X_m)] / (E[σ^α(X)])²`; exact for exponential and constant
/// volatility, otherwise Monte Carlo over the numerator.
pub fn tail_dep_constant(
    vol: &VolatilityFn,
    acf: &AcfModel,
    alpha: f64,
    m: usize,
    n_mc: usize,
    seed: u64,
) -> Result<LimitValue> {
    vol.validate()?;
    acf.validate()?;
    if m == 0 {
        return Err(Error::Config("lag m must be positive".into()));
    }
    let denom = vol.moment(alpha).powi(2);
    if let Some(num) = lognormal_product_moment(vol, acf, alpha, &[0, m]) {
        return Ok(LimitValue { value: num / denom, stderr: 0.0 });
    }
    if n_mc < 2 {
        return Err(Error::Config("n_mc must be at least 2".into()));
    }
    let sums = mc_sums(acf, &[0, m], 1, n_mc, seed, |x, _, out| {
        out[0] = vol.eval_pow(x[0], alpha) * vol.eval_pow(x[1], alpha);
    })?;
    let v = sums.mean_stderr(0);
    Ok(LimitValue { value: v.value / denom, stderr: v.stderr / denom })
}

/// Limit of `P(u·Z_{1,h} ∈ tA, v·Z_{j,j+h−1} ∈ tA) / g(F̄(t))` for the sum
/// set: both sums exceed `t` through one large innovation in the overlap, so
/// the limit is `Σ_k min(u_k, v_{k−j+1})^α` over the shared coordinates.
fn overlap_weight(set: &ExtremeSet, u_pow: &[f64], v_pow: &[f64], lag: usize) -> f64 {
    match set {
        ExtremeSet::Sum { h } => (lag - 1..*h).map(|k| u_pow[k].min(v_pow[k + 1 - lag])).sum(),
        _ => 0.0,
    }
}

/// Cross-lag contribution `R_j(A,B) − 2ρR_j(A,B,ℝ) + ρ²R_j(A,ℝ)` split
/// into its three `R_j` values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossTerm {
    pub lag: usize,
    pub r_bb: f64,
    pub r_b_full: f64,
    pub r_full: f64,
}

impl CrossTerm {
    pub fn contribution(&self, rho: f64) -> f64 {
        self.r_bb - 2.0 * rho * self.r_b_full + rho * rho * self.r_full
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    pub set: ExtremeSet,
    pub y: f64,
    pub rho: f64,
    pub rho_stderr: f64,
    pub sigma2: f64,
    pub mu_c: f64,
    pub cross_terms: Vec<CrossTerm>,
}

impl VarianceReport {
    /// Limiting variance re-evaluated at another value of `ρ`, e.g. a
    /// plug-in estimate.
    pub fn sigma2_at(&self, rho: f64) -> f64 {
        let base = rho * (1.0 - rho);
        (base + self.cross_terms.iter().map(|c| c.contribution(rho)).sum::<f64>()).max(0.0)
    }

    /// `√(n·g(k/n)·μ_C(A))`.
    pub fn norming(&self, n: usize, k: usize) -> f64 {
        (n as f64 * self.set.g_scale(k as f64 / n as f64) * self.mu_c).sqrt()
    }
}

/// Limiting variance of `ρ̂` for every target point. Box and combined sets
/// have no cross-lag terms; the sum set adds lags `2..=h ∧ (m−h)`.
pub fn asymptotic_variance(q: &LimitQuery) -> Result<Vec<VarianceReport>> {
    q.validate()?;
    let cfg = &q.cfg;
    let alpha = cfg.alpha();
    let (values, _) = ratio_values(q)?;
    let mu = match mu_c_exact(&q.set, &cfg.vol, &cfg.acf, alpha) {
        Some(v) => v,
        None => mu_c(&q.set, &cfg.vol, &cfg.acf, alpha, q.n_mc, derive_seed(q.seed, u64::MAX))?.value,
    };
    let npts = q.target.len();
    let mut cross: Vec<Vec<CrossTerm>> = vec![Vec::new(); npts];
    if let ExtremeSet::Sum { h } = q.set {
        let max_lag = h.min(cfg.m - h);
        for lag in 2..=max_lag {
            let terms = cross_terms(q, lag)?;
            for (i, t) in terms.into_iter().enumerate() {
                cross[i].push(t);
            }
        }
    }
    Ok(values
        .iter()
        .zip(cross)
        .enumerate()
        .map(|(i, (v, cross_terms))| {
            let mut report = VarianceReport {
                set: q.set,
                y: q.target.label(i),
                rho: v.value,
                rho_stderr: v.stderr,
                sigma2: 0.0,
                mu_c: mu,
                cross_terms,
            };
            report.sigma2 = report.sigma2_at(v.value);
            report
        })
        .collect())
}

fn cross_terms(q: &LimitQuery, lag: usize) -> Result<Vec<CrossTerm>> {
    let cfg = &q.cfg;
    let (h, hp, m) = (cfg.h, cfg.h_prime, cfg.m);
    let alpha = cfg.alpha();
    let npts = q.target.len();
    let boxes: Vec<Vec<(f64, f64)>> = (0..npts)
        .map(|i| q.target.intervals(i, hp + 1))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Unimplemented("cross-lag terms for the sum-of-future target".into()))?;
    // latent layout: conditioning block 1..h+lag−1, then target block
    // m..m+lag−1+h'
    let cond_len = h + lag - 1;
    let target_len = hp + lag;
    let mut indices: Vec<usize> = (0..cond_len).collect();
    indices.extend(m - 1..m - 1 + target_len);
    let full = (f64::NEG_INFINITY, f64::INFINITY);
    // outputs: ν, then per point: L·P(B, B), L·P(B, ℝ), L·P(ℝ, B); last: L
    let n_out = 2 + 3 * npts;
    let sums = mc_sums(&cfg.acf, &indices, n_out, q.n_mc, derive_seed(q.seed, lag as u64 + 1), |x, _, out| {
        let ua = powers(&cfg.vol, &x[..cond_len], alpha);
        out[0] = q.set.nu_pow(&ua[..h]);
        let l = overlap_weight(&q.set, &ua[..h], &ua[lag - 1..lag - 1 + h], lag);
        let sig: Vec<f64> = x[cond_len..].iter().map(|&v| cfg.vol.eval(v)).collect();
        for (i, b) in boxes.iter().enumerate() {
            let mut both = vec![full; target_len];
            let mut first = vec![full; target_len];
            let mut second = vec![full; target_len];
            for k in 0..=hp {
                both[k] = intersect(both[k], b[k]);
                first[k] = b[k];
                both[k + lag - 1] = intersect(both[k + lag - 1], b[k]);
                second[k + lag - 1] = b[k];
            }
            out[1 + 3 * i] = l * box_probability(&cfg.tail, &sig, &both);
            out[2 + 3 * i] = l * box_probability(&cfg.tail, &sig, &first);
            out[3 + 3 * i] = l * box_probability(&cfg.tail, &sig, &second);
        }
        out[n_out - 1] = l;
    })?;
    let e_nu = sums.mean(0);
    if !(e_nu > 0.0) {
        return Err(Error::DegenerateSet(e_nu));
    }
    let r_full = 2.0 * sums.mean(n_out - 1) / e_nu;
    Ok((0..npts)
        .map(|i| CrossTerm {
            lag,
            r_bb: 2.0 * sums.mean(1 + 3 * i) / e_nu,
            r_b_full: (sums.mean(2 + 3 * i) + sums.mean(3 + 3 * i)) / e_nu,
            r_full,
        })
        .collect())
}

fn intersect(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let lo = a.0.max(b.0);
    (lo, a.1.min(b.1).max(lo))
}

/// `F̄_Y(u) = E[F̄_Z(u/σ(X))]`.
pub fn marginal_survival(vol: &VolatilityFn, tail: &TailModel, u: f64) -> Result<f64> {
    if vol.is_constant() {
        return Ok(tail.survival(u / vol.eval(0.0)));
    }
    let scale = tail.survival(u).max(1e-300);
    let kinks = if matches!(vol, VolatilityFn::AbsPower { .. }) { vec![0.0] } else { Vec::new() };
    normal_expect_adaptive(|x| tail.survival(u / vol.eval(x)), &kinks, scale * 1e-10)
}

/// `u_n = (1/F̄_Y)^←(n/k)`, i.e. `F̄_Y(u_n) = k/n`, by bisection in `log u`.
pub fn threshold_un(vol: &VolatilityFn, tail: &TailModel, k: usize, n: usize) -> Result<f64> {
    if !(k >= 1 && k < n) {
        return Err(Error::Config(format!("need 1 <= k < n, got k = {k}, n = {n}")));
    }
    let p = k as f64 / n as f64;
    let (mut lo, mut hi) = (-60.0f64, 60.0f64);
    let f = |lu: f64| marginal_survival(vol, tail, lu.exp()).map(|s| s - p);
    if f(lo)? < 0.0 || f(hi)? > 0.0 {
        return Err(Error::Numeric(format!("could not bracket u_n for k/n = {p}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// `P(σ·Z_{1,h} ∈ tA)` for fixed volatilities.
pub fn conditional_set_probability(set: &ExtremeSet, tail: &TailModel, sigmas: &[f64], t: f64) -> Result<f64> {
    match *set {
        ExtremeSet::Box { .. } => Ok(sigmas.iter().map(|&s| tail.survival(t / s)).product()),
        ExtremeSet::Sum { h: 1 } => Ok(tail.survival(t / sigmas[0])),
        ExtremeSet::Sum { h: 2 } => pair_sum_survival(tail, sigmas[0], sigmas[1], t),
        ExtremeSet::Combined => Ok(pair_sum_survival(tail, sigmas[0], sigmas[1], t)? * tail.survival(t / sigmas[2])),
        ExtremeSet::Sum { .. } => Err(Error::Unimplemented("sum sets with h > 2 need a multi-fold convolution".into())),
    }
}

/// `P(u₁Z₁ + u₂Z₂ > t)`.
fn pair_sum_survival(tail: &TailModel, u1: f64, u2: f64, t: f64) -> Result<f64> {
    if tail.survival(0.0) >= 1.0 {
        return Ok(tail.survival(t / u1) + tail.survival(t / u2) + convolution_excess(tail, u1, u2, t)?);
    }
    // two-sided law: integrate over the survival level of Z₁
    let g = |q: f64| {
        let z = tail.inverse_survival(q.clamp(1e-300, 1.0 - 1e-16));
        tail.survival((t - u1 * z) / u2)
    };
    let scale = tail.survival(t / u1.max(u2)).max(1e-300);
    Ok(integrate(g, 0.0, 1.0, scale * 1e-8, 1e-8)?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub n: usize,
    pub k: usize,
    pub u_n: f64,
    pub v_n: f64,
    pub stderr: f64,
}

/// `v_n(A) = E[sup_s |P(Y_{1,h} ∈ u_n sA | 𝒳)/g(k/n) − T(s)·L(X)|]` with
/// `L(x) = ν(σ(x)^{−1}·A)/(E[σ^α])^β` and the supremum taken over `s_grid`,
/// so the result is a lower bound of the supremum over `s ≥ 1`.
pub fn bias_rate_vn(q: &LimitQuery, k: usize, n: usize, s_grid: &[f64]) -> Result<RateReport> {
    q.validate()?;
    if s_grid.is_empty() || s_grid.iter().any(|&s| !(s >= 1.0)) {
        return Err(Error::Config("s grid must be nonempty with every s >= 1".into()));
    }
    let cfg = &q.cfg;
    let alpha = cfg.alpha();
    let h = cfg.h;
    let u_n = threshold_un(&cfg.vol, &cfg.tail, k, n)?;
    let g = q.set.g_scale(k as f64 / n as f64);
    let norm = cfg.vol.moment(alpha).powi(q.set.beta() as i32);
    let idx: Vec<usize> = (0..h).collect();
    let failed = std::sync::atomic::AtomicBool::new(false);
    let sums = mc_sums(&cfg.acf, &idx, 1, q.n_mc, q.seed, |x, _, out| {
        let sig: Vec<f64> = x.iter().map(|&v| cfg.vol.eval(v)).collect();
        let l = q.set.nu_pow(&powers(&cfg.vol, x, alpha)) / norm;
        let mut worst = 0.0f64;
        for &s in s_grid {
            match conditional_set_probability(&q.set, &cfg.tail, &sig, u_n * s) {
                Ok(p) => worst = worst.max((p / g - q.set.homogeneity_t(alpha, s) * l).abs()),
                Err(_) => failed.store(true, std::sync::atomic::Ordering::Relaxed),
            }
        }
        out[0] = worst;
    })?;
    if failed.into_inner() {
        return Err(Error::Numeric("conditional set probability failed for some draws".into()));
    }
    let v = sums.mean_stderr(0);
    Ok(RateReport { n, k, u_n, v_n: v.value, stderr: v.stderr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn query(vol: VolatilityFn, acf: AcfModel, set: ExtremeSet, m: usize, target: Target) -> LimitQuery {
        LimitQuery {
            cfg: SvConfig { acf, vol, tail: TailModel::pareto(2.0), n: 1000, h: set.dim(), m, h_prime: 0 },
            set,
            target,
            n_mc: 20_000,
            seed: 11,
        }
    }

    #[test]
    fn constant_volatility_gives_innovation_cdf() {
        let grid = vec![0.5, 1.0, 2.0, 5.0];
        let q = query(
            VolatilityFn::Const { value: 1.0 },
            AcfModel::Ar1 { phi: 0.5 },
            ExtremeSet::Box { h: 2 },
            3,
            Target::CdfCurve { grid: grid.clone() },
        );
        let c = mc_psi_limit(&q).unwrap();
        for (p, y) in c.points.iter().zip(&grid) {
            assert_relative_eq!(p.value, TailModel::pareto(2.0).cdf(*y), epsilon = 1e-12);
        }
    }

    #[test]
    fn tilted_box_matches_closed_form() {
        // Given Y_1 extreme, X_2 ~ N(αγ_1, 1) and Ψ(y) = E[F_Z(y e^{−X_2})].
        let (alpha, g1) = (2.0, 0.5);
        let mu = alpha * g1;
        let exact = |y: f64| {
            let c = y.ln() - mu;
            crate::stats::normal_cdf(c) - y.powf(-alpha) * (alpha * mu + 0.5 * alpha * alpha).exp() * crate::stats::normal_cdf(c - alpha)
        };
        let grid = vec![2.0, 5.0, 12.0];
        let q = query(VolatilityFn::Exp, AcfModel::Ar1 { phi: g1 }, ExtremeSet::Box { h: 1 }, 2, Target::CdfCurve { grid: grid.clone() });
        let curve = mc_psi_limit(&q).unwrap();
        assert_relative_eq!(curve.weight_mean, (0.5 * alpha * alpha).exp(), max_relative = 1e-12);
        for (p, &y) in curve.points.iter().zip(&grid) {
            assert!((p.raw - exact(y)).abs() < 4.0 * p.stderr, "y={y}: {} vs {}", p.raw, exact(y));
        }
    }

    #[test]
    fn full_space_is_exactly_one() {
        let q = query(
            VolatilityFn::Exp,
            AcfModel::Fgn { hurst: 0.75 },
            ExtremeSet::Sum { h: 2 },
            3,
            Target::EventProb { intervals: vec![(f64::NEG_INFINITY, f64::INFINITY)] },
        );
        assert_eq!(mc_rho_limit(&q).unwrap().value, 1.0);
    }

    #[test]
    fn mu_c_examples() {
        let acf = AcfModel::Ar1 { phi: 0.5 };
        let b2 = ExtremeSet::Box { h: 2 };
        let c = VolatilityFn::Const { value: 3.0 };
        assert_relative_eq!(mu_c(&b2, &c, &acf, 1.5, 100, 1).unwrap().value, 1.0, epsilon = 1e-12);
        let v = mu_c(&b2, &VolatilityFn::Exp, &acf, 1.0, 200_000, 2).unwrap();
        assert!((v.value - 0.5f64.exp()).abs() < 3.0 * v.stderr, "{v:?}");
        assert_relative_eq!(mu_c_exact(&b2, &VolatilityFn::Exp, &acf, 1.0).unwrap(), 0.5f64.exp(), epsilon = 1e-14);
    }

    #[test]
    fn tail_dependence_constant_examples() {
        let acf = AcfModel::Ar1 { phi: 0.5 };
        let c = tail_dep_constant(&VolatilityFn::Exp, &acf, 1.0, 1, 0, 0).unwrap();
        assert_relative_eq!(c.value, 0.5f64.exp(), epsilon = 1e-14);
        let c = tail_dep_constant(&VolatilityFn::Const { value: 2.0 }, &acf, 1.0, 1, 0, 0).unwrap();
        assert_relative_eq!(c.value, 1.0, epsilon = 1e-14);
        let far = tail_dep_constant(&VolatilityFn::Exp, &acf, 1.0, 60, 0, 0).unwrap();
        assert_relative_eq!(far.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn box_variance_is_bernoulli() {
        let q = query(
            VolatilityFn::Exp,
            AcfModel::Ar1 { phi: 0.5 },
            ExtremeSet::Box { h: 2 },
            4,
            Target::CdfCurve { grid: vec![1.5, 3.0] },
        );
        for r in asymptotic_variance(&q).unwrap() {
            assert!(r.cross_terms.is_empty());
            assert_relative_eq!(r.sigma2, r.rho * (1.0 - r.rho));
        }
    }

    #[test]
    fn sum_cross_terms_cancel_for_full_space() {
        let q = query(
            VolatilityFn::Exp,
            AcfModel::Ar1 { phi: 0.5 },
            ExtremeSet::Sum { h: 2 },
            4,
            Target::EventProb { intervals: vec![(f64::NEG_INFINITY, f64::INFINITY)] },
        );
        let r = &asymptotic_variance(&q).unwrap()[0];
        assert_eq!(r.cross_terms.len(), 1);
        assert!(r.cross_terms[0].contribution(1.0).abs() < 1e-12);
        assert!(r.sigma2.abs() < 1e-12);
    }

    #[test]
    fn vn_vanishes_for_exact_pareto() {
        let q = query(
            VolatilityFn::Const { value: 1.0 },
            AcfModel::WhiteNoise,
            ExtremeSet::Box { h: 1 },
            2,
            Target::CdfCurve { grid: vec![1.0] },
        );
        let r = bias_rate_vn(&LimitQuery { n_mc: 100, ..q }, 10, 1000, &DEFAULT_S_GRID).unwrap();
        assert!(r.v_n < 1e-9, "{r:?}");
    }

    #[test]
    fn threshold_matches_pareto_quantile() {
        let u = threshold_un(&VolatilityFn::Const { value: 1.0 }, &TailModel::pareto(2.0), 10, 1000).unwrap();
        assert_relative_eq!(u, 10.0, epsilon = 1e-9);
        // Breiman-scale check for σ = exp
        let u = threshold_un(&VolatilityFn::Exp, &TailModel::pareto(2.0), 1, 100_000).unwrap();
        let s = marginal_survival(&VolatilityFn::Exp, &TailModel::pareto(2.0), u).unwrap();
        assert_relative_eq!(s, 1e-5, max_relative = 1e-8);
    }

    #[test]
    fn chunked_sums_do_not_depend_on_pool_size() {
        let q = query(
            VolatilityFn::Exp,
            AcfModel::Fgn { hurst: 0.8 },
            ExtremeSet::Combined,
            5,
            Target::CdfCurve { grid: vec![0.5, 2.0] },
        );
        let q = LimitQuery { n_mc: 30_000, ..q };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| mc_psi_limit(&q).unwrap());
        let b = four.install(|| mc_psi_limit(&q).unwrap());
        assert_eq!(a, b);
    }
}
