//! Empirical conditional extremograms.
//!
//! Indexing follows the limit functionals: window `j` (1-based) conditions on
//! `Y_j, …, Y_{j+h−1}` and targets `Y_{j+m−1}, …, Y_{j+m−1+h'}`, so a lead
//! `m > h` keeps the two windows disjoint. With `n` windows the series must
//! hold at least `n + m − 1 + h'` observations; the threshold is the order
//! statistic `Y_{(n:n−k)}` of `Y_1, …, Y_n`.

use crate::cones::ExtremeSet;
use crate::error::{Error, Result};
use crate::limits::VarianceReport;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub set: ExtremeSet,
    pub m: usize,
    #[serde(default)]
    pub h_prime: usize,
    /// Fixed number of upper order statistics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// `k = ⌈n^c⌉`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_exponent: Option<f64>,
    #[serde(default)]
    pub thinned: bool,
}

impl EstimatorConfig {
    pub fn new(set: ExtremeSet, m: usize, k: usize) -> Self {
        EstimatorConfig { set, m, h_prime: 0, k: Some(k), k_exponent: None, thinned: false }
    }

    pub fn with_exponent(set: ExtremeSet, m: usize, c: f64) -> Self {
        EstimatorConfig { set, m, h_prime: 0, k: None, k_exponent: Some(c), thinned: false }
    }

    pub fn h(&self) -> usize {
        self.set.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.set.validate()?;
        if self.m <= self.h() {
            return Err(Error::Config(format!("lead m = {} must exceed h = {}", self.m, self.h())));
        }
        match (self.k, self.k_exponent) {
            (Some(_), None) => {}
            (None, Some(c)) if c > 0.0 && c < 1.0 => {}
            (None, Some(c)) => return Err(Error::Config(format!("k exponent must lie in (0, 1), got {c}"))),
            _ => return Err(Error::Config("give exactly one of k and k_exponent".into())),
        }
        Ok(())
    }

    /// Number of order statistics for `n` windows.
    pub fn resolve_k(&self, n: usize) -> Result<usize> {
        let k = match (self.k, self.k_exponent) {
            (Some(k), _) => k,
            (None, Some(c)) => (n as f64).powf(c).ceil() as usize,
            (None, None) => return Err(Error::Config("missing k".into())),
        };
        if k < 1 || k >= n {
            return Err(Error::Config(format!("need 1 <= k < n, got k = {k}, n = {n}")));
        }
        Ok(k)
    }

    /// Number of windows available in a series of length `len`.
    pub fn windows(&self, len: usize) -> Result<usize> {
        let tail = self.m + self.h_prime;
        let n = if self.thinned {
            if len < tail {
                0
            } else {
                (len - tail) / self.h() + 1
            }
        } else {
            (len + 1).saturating_sub(tail)
        };
        if n < 2 {
            return Err(Error::Config(format!("series of length {len} is too short for m = {}, h' = {}", self.m, self.h_prime)));
        }
        Ok(n)
    }
}

/// How the limiting variance is obtained.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum VarianceMode {
    /// `ρ(1 − ρ)`, exact when cross-lag terms vanish.
    Bernoulli,
    /// Cross-lag products of the centered window indicators for lags that
    /// share conditioning observations.
    #[default]
    Empirical,
    /// Limit cross terms from a known model, one report per target point,
    /// evaluated at the plug-in estimate.
    Model(Vec<VarianceReport>),
}

/// How `n·g(k/n)·μ_C(A)` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Norming {
    /// The observed number of conditioning exceedances.
    #[default]
    Observed,
    /// Known `μ_C(A)` of the generating model.
    Known { mu_c: f64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StderrOptions {
    /// `None` picks `Bernoulli` for sets without cross-lag terms and
    /// `Empirical` otherwise.
    pub variance: Option<VarianceMode>,
    pub norming: Norming,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub k: usize,
    pub n: usize,
    pub u_hat: f64,
    pub numerator: usize,
    pub denominator: usize,
    pub sigma2: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
}

/// `(n − k)`-th smallest of `y`.
pub fn order_statistic_threshold(y: &[f64], k: usize) -> Result<f64> {
    let n = y.len();
    if k < 1 || k >= n {
        return Err(Error::Config(format!("need 1 <= k < n, got k = {k}, n = {n}")));
    }
    if y.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("series contains NaN".into()));
    }
    let mut v = y.to_vec();
    let (_, nth, _) = v.select_nth_unstable_by(n - k - 1, f64::total_cmp);
    Ok(*nth)
}

/// Windows selected by the conditioning event, with their start offsets.
struct Selection {
    n: usize,
    k: usize,
    u_hat: f64,
    starts: Vec<usize>,
    /// Window positions (0-based window index) of selected windows.
    positions: Vec<usize>,
    stride: usize,
}

fn select(y: &[f64], cfg: &EstimatorConfig) -> Result<Selection> {
    cfg.validate()?;
    let n = cfg.windows(y.len())?;
    let k = cfg.resolve_k(n)?;
    let u_hat = order_statistic_threshold(&y[..n], k)?;
    let h = cfg.h();
    let stride = if cfg.thinned { h } else { 1 };
    let mut starts = Vec::new();
    let mut positions = Vec::new();
    for w in 0..n {
        let s = w * stride;
        if cfg.set.contains(u_hat, &y[s..s + h]) {
            starts.push(s);
            positions.push(w);
        }
    }
    Ok(Selection { n, k, u_hat, starts, positions, stride })
}

fn in_box(v: &[f64], b: &[(f64, f64)]) -> bool {
    v.iter().zip(b).all(|(&x, &(lo, hi))| x > lo && x <= hi)
}

/// Lags at which distinct windows share conditioning observations and
/// contribute cross terms: `1..h ∧ (m − h)` in units of windows.
fn cross_lags(cfg: &EstimatorConfig, stride: usize) -> usize {
    if stride > 1 {
        return 0;
    }
    let h = cfg.h();
    match cfg.set {
        ExtremeSet::Sum { .. } => h.min(cfg.m - h).saturating_sub(1),
        _ => 0,
    }
}

/// `Σ_j e_j² + 2 Σ_ℓ Σ_j e_j e_{j+ℓ}` with `e_j = I_j (J_j − ρ)`, over the
/// selected windows, divided by their number.
fn empirical_sigma2(sel: &Selection, hits: &[bool], rho: f64, lags: usize) -> f64 {
    let d = sel.positions.len();
    let e: Vec<f64> = hits.iter().map(|&h| if h { 1.0 - rho } else { -rho }).collect();
    let mut total: f64 = e.iter().map(|v| v * v).sum();
    for lag in 1..=lags {
        let mut b = 0;
        for a in 0..d {
            let target = sel.positions[a] + lag;
            while b < d && sel.positions[b] < target {
                b += 1;
            }
            if b < d && sel.positions[b] == target {
                total += 2.0 * e[a] * e[b];
            }
        }
    }
    (total / d as f64).max(0.0)
}

fn finish(
    sel: &Selection,
    cfg: &EstimatorConfig,
    hits: &[bool],
    opts: &StderrOptions,
    point: usize,
) -> Result<Estimate> {
    let den = sel.starts.len();
    if den == 0 {
        return Err(Error::InsufficientExceedances { numerator: 0, denominator: 0 });
    }
    let num = hits.iter().filter(|&&h| h).count();
    let value = num as f64 / den as f64;
    let lags = cross_lags(cfg, sel.stride);
    let mode = match &opts.variance {
        Some(m) => m.clone(),
        None if lags == 0 => VarianceMode::Bernoulli,
        None => VarianceMode::Empirical,
    };
    let sigma2 = match &mode {
        VarianceMode::Bernoulli => value * (1.0 - value),
        VarianceMode::Empirical => empirical_sigma2(sel, hits, value, lags),
        VarianceMode::Model(reports) => {
            let r = reports
                .get(point)
                .ok_or_else(|| Error::Shape { expected: point + 1, got: reports.len() })?;
            if sel.stride > 1 {
                value * (1.0 - value)
            } else {
                r.sigma2_at(value)
            }
        }
    };
    let scale = match opts.norming {
        Norming::Observed => den as f64,
        Norming::Known { mu_c } => sel.n as f64 * cfg.set.g_scale(sel.k as f64 / sel.n as f64) * mu_c,
    };
    let stderr = (sigma2 / scale).sqrt();
    let ci95 = ((value - 1.96 * stderr).max(0.0), (value + 1.96 * stderr).min(1.0));
    Ok(Estimate {
        value,
        k: sel.k,
        n: sel.n,
        u_hat: sel.u_hat,
        numerator: num,
        denominator: den,
        sigma2,
        stderr,
        ci95,
    })
}

fn target_offset(cfg: &EstimatorConfig) -> usize {
    cfg.m - 1
}

/// `ρ̂_n(A, B, m)` with `B = ∏ (lo_i, hi_i]`.
pub fn rho_hat(y: &[f64], cfg: &EstimatorConfig, b: &[(f64, f64)]) -> Result<Estimate> {
    rho_hat_with(y, cfg, b, &StderrOptions::default())
}

pub fn rho_hat_with(y: &[f64], cfg: &EstimatorConfig, b: &[(f64, f64)], opts: &StderrOptions) -> Result<Estimate> {
    if b.len() != cfg.h_prime + 1 {
        return Err(Error::Shape { expected: cfg.h_prime + 1, got: b.len() });
    }
    let sel = select(y, cfg)?;
    let off = target_offset(cfg);
    let hits: Vec<bool> = sel
        .starts
        .iter()
        .map(|&s| in_box(&y[s + off..s + off + cfg.h_prime + 1], b))
        .collect();
    finish(&sel, cfg, &hits, opts, 0)
}

/// Thinned estimator: windows start every `h` observations.
pub fn rho_tilde(y: &[f64], cfg: &EstimatorConfig, b: &[(f64, f64)]) -> Result<Estimate> {
    let cfg = EstimatorConfig { thinned: true, ..cfg.clone() };
    rho_hat_with(y, &cfg, b, &StderrOptions { variance: Some(VarianceMode::Bernoulli), ..Default::default() })
}

/// `Ψ̂(y)` for each `y` of the grid: the target window is counted when all
/// of its coordinates are `≤ y`.
pub fn psi_hat_curve(y: &[f64], cfg: &EstimatorConfig, grid: &[f64]) -> Result<Vec<Estimate>> {
    psi_hat_curve_with(y, cfg, grid, &StderrOptions::default())
}

pub fn psi_hat_curve_with(
    y: &[f64],
    cfg: &EstimatorConfig,
    grid: &[f64],
    opts: &StderrOptions,
) -> Result<Vec<Estimate>> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("y grid must be strictly increasing".into()));
    }
    let sel = select(y, cfg)?;
    let off = target_offset(cfg);
    let maxima: Vec<f64> = sel
        .starts
        .iter()
        .map(|&s| y[s + off..s + off + cfg.h_prime + 1].iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    grid.iter()
        .enumerate()
        .map(|(i, &g)| {
            let hits: Vec<bool> = maxima.iter().map(|&v| v <= g).collect();
            finish(&sel, cfg, &hits, opts, i)
        })
        .collect()
}

/// Thinned `Ψ̂` curve.
pub fn psi_tilde_curve(y: &[f64], cfg: &EstimatorConfig, grid: &[f64]) -> Result<Vec<Estimate>> {
    let cfg = EstimatorConfig { thinned: true, ..cfg.clone() };
    psi_hat_curve_with(y, &cfg, grid, &StderrOptions { variance: Some(VarianceMode::Bernoulli), ..Default::default() })
}

/// `Λ̂_n(y)`: conditional distribution of `Y_{j+m−1}` given
/// `Y_j + Y_{j+1} > Y_{(n:n−k)}`.
pub fn lambda_hat(y: &[f64], k: usize, m: usize, grid: &[f64]) -> Result<Vec<Estimate>> {
    let cfg = EstimatorConfig::new(ExtremeSet::Sum { h: 2 }, m, k);
    psi_hat_curve(y, &cfg, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_statistic_examples() {
        assert_eq!(order_statistic_threshold(&[1.0, 5.0, 2.0, 7.0], 1).unwrap(), 5.0);
        assert_eq!(order_statistic_threshold(&[3.0, 3.0, 3.0], 1).unwrap(), 3.0);
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(order_statistic_threshold(&s, 10).unwrap(), 90.0);
        assert!(matches!(order_statistic_threshold(&s, 100), Err(Error::Config(_))));
        assert!(order_statistic_threshold(&s, 0).is_err());
    }

    #[test]
    fn rho_hat_hand_trace() {
        let y = [1.0, 5.0, 2.0, 7.0, 3.0];
        let cfg = EstimatorConfig::new(ExtremeSet::Box { h: 1 }, 2, 1);
        let e = rho_hat(&y, &cfg, &[(f64::NEG_INFINITY, 4.0)]).unwrap();
        assert_eq!(e.u_hat, 5.0);
        assert_eq!(e.n, 4);
        assert_eq!((e.numerator, e.denominator), (1, 1));
        assert_eq!(e.value, 1.0);
    }

    #[test]
    fn zero_denominator_is_an_error() {
        let y = [1.0, 1.0, 1.0, 1.0, 1.0];
        let cfg = EstimatorConfig::new(ExtremeSet::Box { h: 1 }, 2, 1);
        assert!(matches!(
            rho_hat(&y, &cfg, &[(f64::NEG_INFINITY, 4.0)]),
            Err(Error::InsufficientExceedances { .. })
        ));
    }

    #[test]
    fn thinned_windows_hand_trace() {
        // n = 4 windows of h = 2 starting at 1, 3, 5, 7; targets Y_3, Y_5, Y_7, Y_9
        let y = [9.0, 9.0, 0.5, 0.0, 2.0, 2.0, 8.0, 8.0, 6.0];
        let cfg = EstimatorConfig::new(ExtremeSet::Box { h: 2 }, 3, 2);
        let cfg = EstimatorConfig { thinned: true, ..cfg };
        assert_eq!(cfg.windows(9).unwrap(), 4);
        // threshold from Y_1..Y_4 = (9, 9, 0.5, 0): 2nd smallest = 0.5
        let e = rho_tilde(&y, &cfg, &[(f64::NEG_INFINITY, 1.0)]).unwrap();
        assert_eq!(e.u_hat, 0.5);
        // windows (9,9), (2,2), (8,8) exceed; (0.5,0) does not
        assert_eq!(e.denominator, 3);
        // targets 0.5, 8, 6 → one at or below 1
        assert_eq!(e.numerator, 1);
    }

    #[test]
    fn thinning_with_h_one_is_plain() {
        let y: Vec<f64> = (0..50).map(|i| ((i * 37) % 17) as f64).collect();
        let cfg = EstimatorConfig::new(ExtremeSet::Box { h: 1 }, 3, 10);
        let a = rho_hat(&y, &cfg, &[(f64::NEG_INFINITY, 8.0)]).unwrap();
        let b = rho_tilde(&y, &cfg, &[(f64::NEG_INFINITY, 8.0)]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lambda_hand_trace() {
        // windows j = 1..3 with m = 3: sums (6, 7, 9), targets Y_3, Y_4, Y_5
        let y = [1.0, 5.0, 2.0, 7.0, 3.0];
        let e = lambda_hat(&y, 1, 3, &[2.5, 10.0]).unwrap();
        // threshold = 2nd smallest of (1, 5, 2) = 2; every sum exceeds it
        assert_eq!(e[0].u_hat, 2.0);
        assert_eq!(e[0].denominator, 3);
        // targets 2, 7, 3 → one at or below 2.5
        assert_eq!(e[0].numerator, 1);
        assert_eq!(e[1].value, 1.0);
        let cfg = EstimatorConfig::new(ExtremeSet::Sum { h: 2 }, 3, 1);
        assert_eq!(psi_hat_curve(&y, &cfg, &[2.5, 10.0]).unwrap(), e);
    }

    #[test]
    fn scale_invariance_is_exact() {
        let y: Vec<f64> = (0..200).map(|i| (((i * 7919) % 211) as f64).sqrt()).collect();
        let cfg = EstimatorConfig::new(ExtremeSet::Sum { h: 2 }, 4, 20);
        let a = psi_hat_curve(&y, &cfg, &[3.0, 8.0]).unwrap();
        let c = 4.0;
        let yc: Vec<f64> = y.iter().map(|v| v * c).collect();
        let b = psi_hat_curve(&yc, &cfg, &[3.0 * c, 8.0 * c]).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.value, q.value);
            assert_eq!(p.denominator, q.denominator);
        }
    }
}
