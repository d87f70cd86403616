//! Heavy-tailed innovation laws with regularly varying right tails.

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_with_breaks};
use crate::rng::rng_from_seed;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, inv_beta_reg, ln_beta};
use std::fmt;
use std::sync::Arc;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied law given by its survival function and its inverse.
#[derive(Clone)]
pub struct CustomTail {
    pub survival: ScalarFn,
    /// Inverse survival: `z` with `P(Z > z) = q`.
    pub inverse_survival: ScalarFn,
    pub alpha: f64,
}

impl fmt::Debug for CustomTail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomTail").field("alpha", &self.alpha).finish_non_exhaustive()
    }
}

impl PartialEq for CustomTail {
    fn eq(&self, other: &Self) -> bool {
        self.alpha == other.alpha
            && Arc::ptr_eq(&self.survival, &other.survival)
            && Arc::ptr_eq(&self.inverse_survival, &other.inverse_survival)
    }
}

/// Innovation law `F_Z` with right tail index `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailModel {
    /// `P(Z > z) = z^{−α}` for `z ≥ 1`.
    Pareto { alpha: f64 },
    /// Student t with `dof` degrees of freedom; tail index `α = dof`.
    StudentT { dof: f64 },
    #[serde(skip)]
    Custom(CustomTail),
}

impl TailModel {
    pub fn pareto(alpha: f64) -> Self {
        TailModel::Pareto { alpha }
    }

    pub fn student_t(dof: f64) -> Self {
        TailModel::StudentT { dof }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.alpha();
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Config(format!("tail index must be positive, got {a}")));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        match self {
            TailModel::Pareto { alpha } => *alpha,
            TailModel::StudentT { dof } => *dof,
            TailModel::Custom(c) => c.alpha,
        }
    }

    /// `P(Z > z)`.
    pub fn survival(&self, z: f64) -> f64 {
        match self {
            TailModel::Pareto { alpha } => {
                if z <= 1.0 {
                    1.0
                } else {
                    z.powf(-alpha)
                }
            }
            TailModel::StudentT { dof } => {
                if z.is_infinite() {
                    return if z > 0.0 { 0.0 } else { 1.0 };
                }
                let upper = 0.5 * beta_reg(0.5 * dof, 0.5, dof / (dof + z * z));
                if z >= 0.0 {
                    upper
                } else {
                    1.0 - upper
                }
            }
            TailModel::Custom(c) => (c.survival)(z),
        }
    }

    /// `P(Z ≤ z)`, computed without cancellation in the left tail.
    pub fn cdf(&self, z: f64) -> f64 {
        match self {
            TailModel::StudentT { dof } if z < 0.0 => {
                if z.is_infinite() {
                    return 0.0;
                }
                0.5 * beta_reg(0.5 * dof, 0.5, dof / (dof + z * z))
            }
            _ => 1.0 - self.survival(z),
        }
    }

    pub fn pdf(&self, z: f64) -> Option<f64> {
        match self {
            TailModel::Pareto { alpha } => Some(if z < 1.0 { 0.0 } else { alpha * z.powf(-alpha - 1.0) }),
            TailModel::StudentT { dof } => {
                let ln = -0.5 * dof.ln() - ln_beta(0.5 * dof, 0.5)
                    - 0.5 * (dof + 1.0) * (1.0 + z * z / dof).ln();
                Some(ln.exp())
            }
            TailModel::Custom(_) => None,
        }
    }

    /// Inverse survival: the `z` with `P(Z > z) = q`, `q ∈ (0, 1)`.
    pub fn inverse_survival(&self, q: f64) -> f64 {
        match self {
            TailModel::Pareto { alpha } => q.powf(-1.0 / alpha),
            TailModel::StudentT { dof } => {
                if q == 0.5 {
                    return 0.0;
                }
                let (qq, sign) = if q < 0.5 { (q, 1.0) } else { (1.0 - q, -1.0) };
                let x = inv_beta_reg(0.5 * dof, 0.5, 2.0 * qq);
                let mut z = (dof * (1.0 - x) / x).sqrt();
                // polish in the upper tail
                for _ in 0..3 {
                    let pdf = self.pdf(z).unwrap_or(0.0);
                    if pdf <= 0.0 || !z.is_finite() {
                        break;
                    }
                    let step = (self.survival(z) - qq) / pdf;
                    z += step;
                    if step.abs() <= 1e-15 * z.abs() {
                        break;
                    }
                }
                sign * z
            }
            TailModel::Custom(c) => (c.inverse_survival)(q),
        }
    }

    /// Left-continuous inverse `F_Z^←(p)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {p}")));
        }
        Ok(self.inverse_survival(1.0 - p))
    }

    /// `a(t) = F_Z^←(1 − 1/t)`.
    pub fn scale_a(&self, t: f64) -> Result<f64> {
        if t <= 1.0 {
            return Err(Error::Domain(format!("a(t) needs t > 1, got {t}")));
        }
        Ok(self.inverse_survival(1.0 / t))
    }

    /// `n` i.i.d. draws by inverse-CDF sampling.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..n).map(|_| self.draw(&mut rng)).collect()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // U ∈ (0, 1]; P(Z > z) = U
        let u = 1.0 - rng.random::<f64>();
        match self {
            TailModel::Pareto { alpha } => u.powf(-1.0 / alpha),
            _ => self.inverse_survival(u.min(1.0 - 1e-16)),
        }
    }

    /// One draw from the law of `Z` given `Z > c`.
    pub fn draw_exceeding<R: Rng + ?Sized>(&self, c: f64, rng: &mut R) -> f64 {
        let u = 1.0 - rng.random::<f64>();
        let q = u * self.survival(c);
        self.inverse_survival(q).max(c)
    }

    /// Local tail-index deviation `η(z) = α − z f(z)/F̄(z)` of the
    /// representation `F̄(z) = c z^{−α} exp(∫₁^z η(s)/s ds)`.
    pub fn eta(&self, z: f64) -> Option<f64> {
        match self {
            TailModel::Pareto { .. } => Some(0.0),
            TailModel::StudentT { dof } => {
                let sf = self.survival(z);
                Some(dof - z * self.pdf(z)? / sf)
            }
            TailModel::Custom(_) => None,
        }
    }

    /// Constant `C` of the second-order envelope `η*(t) = C·(1 ∨ t)^{−2}`,
    /// fitted as the largest `|η(z)|·z²` on a log grid over `[1, 10⁴]`.
    /// Zero for exact Pareto tails.
    pub fn eta_star_constant(&self) -> Option<f64> {
        match self {
            TailModel::Pareto { .. } => Some(0.0),
            TailModel::StudentT { .. } => {
                let c = (0..=160)
                    .map(|i| 10f64.powf(i as f64 / 40.0))
                    .map(|z| self.eta(z).unwrap().abs() * z * z)
                    .fold(0.0, f64::max);
                Some(c)
            }
            TailModel::Custom(_) => None,
        }
    }

    /// Bounded nonincreasing second-order envelope `η*`.
    pub fn eta_star(&self, t: f64) -> Option<f64> {
        let c = self.eta_star_constant()?;
        Some(c * t.max(1.0).powi(-2))
    }

    fn is_nonnegative(&self) -> bool {
        self.survival(0.0) >= 1.0
    }
}

/// `P(u₁Z₁ + u₂Z₂ > t) − F̄(t/u₁) − F̄(t/u₂)` for i.i.d. nonnegative
/// `Z₁, Z₂`, evaluated term by term so the small difference is not lost to
/// cancellation:
///
/// `−F̄(t/u₁)F̄(t/u₂) + P(t/2 < u₁Z₁ ≤ t)P(t/2 < u₂Z₂ ≤ t) + I₁ + I₂`
///
/// with `I₁ = P(u₁Z₁ ≤ t/2, u₂Z₂ ≤ t, u₁Z₁ + u₂Z₂ > t)` and `I₂` symmetric.
pub fn convolution_excess(model: &TailModel, u1: f64, u2: f64, t: f64) -> Result<f64> {
    if !model.is_nonnegative() {
        return Err(Error::Config("convolution bound requires a nonnegative law".into()));
    }
    if !(u1 > 0.0 && u2 > 0.0 && t > 0.0) {
        return Err(Error::Domain(format!("need u1, u2, t > 0 (got {u1}, {u2}, {t})")));
    }
    let sf = |z: f64| model.survival(z);
    let s1 = sf(t / u1);
    let s2 = sf(t / u2);
    let band1 = sf(t / (2.0 * u1)) - s1;
    let band2 = sf(t / (2.0 * u2)) - s2;
    let i1 = half_band_integral(model, u1, u2, t)?;
    let i2 = half_band_integral(model, u2, u1, t)?;
    Ok(-s1 * s2 + band1 * band2 + i1 + i2)
}

/// `P(ua·Za ≤ t/2, ub·Zb ≤ t, ua·Za + ub·Zb > t)
///   = E[{F̄((t − ua·Za)/ub) − F̄(t/ub)} 1{ua·Za ≤ t/2}]`,
/// integrated over the survival level `q = F̄(Za)`.
fn half_band_integral(model: &TailModel, ua: f64, ub: f64, t: f64) -> Result<f64> {
    let q_lo = model.survival(t / (2.0 * ua));
    if q_lo >= 1.0 {
        return Ok(0.0);
    }
    let base = model.survival(t / ub);
    let g = |q: f64| {
        let z = model.inverse_survival(q.clamp(1e-300, 1.0 - 1e-16));
        (model.survival((t - ua * z) / ub) - base).max(0.0)
    };
    // The integrand is smooth in q except where (t − ua·z)/ub meets the lower
    // support point; adaptive bisection resolves it.
    let scale = base.max(f64::MIN_POSITIVE);
    Ok(integrate(g, q_lo, 1.0, scale * 1e-14, 1e-10)?.value)
}

/// One row of [`convolution_tail_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvolutionRow {
    pub t: f64,
    pub lhs: f64,
    pub envelope: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvolutionReport {
    pub alpha: f64,
    pub u1: f64,
    pub u2: f64,
    pub epsilon: f64,
    pub rows: Vec<ConvolutionRow>,
    /// Smallest constant making the envelope dominate on the grid.
    pub c_hat: f64,
    pub first_decade_max: f64,
    pub last_decade_max: f64,
    /// `last_decade_max / first_decade_max ≤ 2`.
    pub bounded: bool,
}

/// `∫₀^t F̄(s) ds`.
pub fn integrated_survival(model: &TailModel, t: f64) -> Result<f64> {
    let mut breaks = vec![0.0];
    if t > 1.0 {
        breaks.push(1.0);
    }
    breaks.push(t);
    Ok(integrate_with_breaks(|s| model.survival(s), &breaks, 1e-14, 1e-11)?.value)
}

/// Second-order convolution bound check: for each `t`, the deviation
/// `|P(u₁Z₁+u₂Z₂>t) − F̄(t/u₁) − F̄(t/u₂)|` against the envelope
/// `u₁^{α+ε} u₂^{α+ε} t^{−1} F̄(t) ∫₀^t F̄(s) ds`.
pub fn convolution_tail_check(
    model: &TailModel,
    u1: f64,
    u2: f64,
    t_grid: &[f64],
    epsilon: f64,
) -> Result<ConvolutionReport> {
    model.validate()?;
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid[0] <= 0.0 {
        return Err(Error::Config("t grid must be positive and strictly increasing".into()));
    }
    let alpha = model.alpha();
    let weight = (u1 * u2).powf(alpha + epsilon);
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let lhs = convolution_excess(model, u1, u2, t)?.abs();
        let envelope = weight * model.survival(t) * integrated_survival(model, t)? / t;
        if !(envelope > 0.0 && lhs.is_finite()) {
            return Err(Error::Numeric(format!("degenerate envelope {envelope:e} or lhs {lhs:e} at t = {t}")));
        }
        rows.push(ConvolutionRow { t, lhs, envelope, ratio: lhs / envelope });
    }
    let c_hat = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let t0 = t_grid[0];
    let t1 = *t_grid.last().unwrap();
    let first_decade_max = rows
        .iter()
        .filter(|r| r.t <= 10.0 * t0)
        .map(|r| r.ratio)
        .fold(0.0, f64::max);
    let last_decade_max = rows
        .iter()
        .filter(|r| r.t >= t1 / 10.0)
        .map(|r| r.ratio)
        .fold(0.0, f64::max);
    Ok(ConvolutionReport {
        alpha,
        u1,
        u2,
        epsilon,
        rows,
        c_hat,
        first_decade_max,
        last_decade_max,
        bounded: c_hat.is_finite() && last_decade_max <= 2.0 * first_decade_max,
    })
}

/// `t·(P(Z₁+Z₂>t)/F̄(t) − 2)`, which tends to `E[Z₁]` for `α > 1`.
pub fn sum_tail_second_order(model: &TailModel, t: f64) -> Result<f64> {
    let excess = convolution_excess(model, 1.0, 1.0, t)?;
    Ok(t * excess / model.survival(t))
}

/// Log-spaced grid of `count` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1).max(1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn survival_examples() {
        assert_eq!(TailModel::pareto(2.0).survival(2.0), 0.25);
        assert_eq!(TailModel::pareto(1.0).survival(1.0), 1.0);
        assert_relative_eq!(TailModel::student_t(3.0).survival(0.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn quantile_examples() {
        assert_relative_eq!(TailModel::pareto(2.0).quantile(0.99).unwrap(), 10.0, epsilon = 1e-12);
        assert_relative_eq!(TailModel::pareto(1.0).quantile(0.5).unwrap(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(TailModel::student_t(1.0).quantile(0.75).unwrap(), 1.0, epsilon = 1e-10);
        assert!(matches!(TailModel::pareto(1.0).quantile(1.0), Err(Error::Domain(_))));
        assert!(TailModel::pareto(1.0).quantile(0.0).is_err());
    }

    #[test]
    fn cauchy_quartile_by_bisection() {
        // oracle: bisection on the t(1) CDF
        let m = TailModel::student_t(1.0);
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if m.cdf(mid) < 0.75 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert_relative_eq!(0.5 * (lo + hi), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn quantile_survival_roundtrip() {
        for m in [TailModel::pareto(1.5), TailModel::student_t(3.0), TailModel::student_t(2.0)] {
            for &p in &[1e-6, 0.01, 0.3, 0.5, 0.77, 0.99, 0.999_999] {
                let z = m.quantile(p).unwrap();
                if m.survival(z) < 1.0 {
                    assert!((m.survival(z) - (1.0 - p)).abs() < 1e-10, "{m:?} p={p}");
                }
            }
        }
    }

    #[test]
    fn regular_variation_ratio() {
        let p = TailModel::pareto(2.0);
        let t3 = TailModel::student_t(3.0);
        let c = t3.eta_star_constant().unwrap();
        for &t in &[1e2, 1e3, 1e4] {
            for &y in &[0.5, 2.0, 10.0] {
                let target = f64::powf(y, -2.0);
                assert_relative_eq!(p.survival(t * y) / p.survival(t), target, epsilon = 1e-12);
                // |log ratio − log y^{−α}| ≤ ∫ |η(s)|/s ds ≤ C·|t^{-2} − (ty)^{-2}|/2
                let ratio = t3.survival(t * y) / t3.survival(t);
                let bound = 0.5 * c * (t.min(t * y).powi(-2));
                assert!((ratio / y.powf(-3.0)).ln().abs() <= bound * 1.01 + 1e-12);
            }
        }
    }

    #[test]
    fn sampling_examples() {
        let n = 100_000;
        let xs = TailModel::pareto(2.0).sample(n, 9);
        let frac = xs.iter().filter(|&&x| x > 2.0).count() as f64 / n as f64;
        assert!((frac - 0.25).abs() < 0.005);
        assert!(TailModel::pareto(1.0).sample(10_000, 3).iter().all(|&x| x >= 1.0));
        let mut ts = TailModel::student_t(3.0).sample(n, 4);
        ts.sort_by(f64::total_cmp);
        assert!(ts[n / 2].abs() < 0.02);
        assert_eq!(TailModel::pareto(2.0).sample(5, 1), TailModel::pareto(2.0).sample(5, 1));
    }

    #[test]
    fn conditional_draws_exceed() {
        let mut rng = rng_from_seed(1);
        let m = TailModel::student_t(3.0);
        for _ in 0..1000 {
            assert!(m.draw_exceeding(20.0, &mut rng) >= 20.0);
        }
    }

    #[test]
    fn eta_for_pareto_vanishes() {
        assert_eq!(TailModel::pareto(2.0).eta_star(10.0), Some(0.0));
        let t = TailModel::student_t(3.0);
        let e1 = t.eta_star(10.0).unwrap();
        let e2 = t.eta_star(100.0).unwrap();
        assert!(e1 > e2 && e2 > 0.0);
    }

    #[test]
    fn convolution_excess_matches_direct_integral() {
        // direct route: P(Z1+Z2>t) = F̄(t−1)·… by integrating the density of
        // Z1 against F̄(t − z); fine at moderate t where cancellation is mild
        let m = TailModel::pareto(2.0);
        let t = 20.0;
        let direct = integrate(|z| 2.0 * z.powi(-3) * m.survival(t - z), 1.0, t - 1.0, 1e-15, 1e-13)
            .unwrap()
            .value
            + m.survival(t - 1.0);
        let excess = convolution_excess(&m, 1.0, 1.0, t).unwrap();
        assert_relative_eq!(direct - 2.0 * m.survival(t), excess, epsilon = 1e-11);
    }

    #[test]
    fn convolution_lhs_nonnegative_and_fixture() {
        let m = TailModel::pareto(1.5);
        let r = convolution_tail_check(&m, 2.0, 3.0, &[50.0, 100.0, 400.0], 0.05).unwrap();
        assert!(r.rows.iter().all(|row| row.lhs >= 0.0));
        let row = r.rows[1];
        let rel = row.lhs / (m.survival(50.0) + m.survival(100.0 / 3.0));
        assert!(rel <= 0.2, "relative excess {rel}");
    }

    #[test]
    fn convolution_check_rejects_two_sided_law() {
        assert!(convolution_tail_check(&TailModel::student_t(3.0), 1.0, 1.0, &[10.0], 0.05).is_err());
    }
}
