//! Cones `C_j`, their limit measures `ν_j`, and the three extreme-set
//! families used by the estimators.

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::tails::TailModel;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Indicator vector `j`: coordinate `i` must be large on its own when
/// `j_i = 1`; among the `j_i = 0` coordinates at least one must be large.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConeIndex {
    bits: Vec<bool>,
}

impl ConeIndex {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::Config("cone index needs at least one coordinate".into()));
        }
        Ok(ConeIndex { bits })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Scaling order `β = |j| + 1` when some coordinate is unflagged, `h`
    /// for the full box `j = 1…1`.
    pub fn beta(&self) -> usize {
        if self.ones() == self.dim() {
            self.dim()
        } else {
            self.ones() + 1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ExtremeSet {
    /// `{z : z_1 > 1, …, z_h > 1}` on the cone `j = 1…1`.
    Box { h: usize },
    /// `{z : z_1 + … + z_h > 1}` on the cone `j = 0…0`.
    Sum { h: usize },
    /// `{z : z_1 + z_2 > 1, z_3 > 1}` on the cone `j = (0, 0, 1)`.
    Combined,
}

impl ExtremeSet {
    pub fn dim(&self) -> usize {
        match *self {
            ExtremeSet::Box { h } | ExtremeSet::Sum { h } => h,
            ExtremeSet::Combined => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::Config("extreme set needs h >= 1".into()));
        }
        Ok(())
    }

    pub fn cone(&self) -> ConeIndex {
        let bits = match *self {
            ExtremeSet::Box { h } => vec![true; h],
            ExtremeSet::Sum { h } => vec![false; h],
            ExtremeSet::Combined => vec![false, false, true],
        };
        ConeIndex { bits }
    }

    pub fn beta(&self) -> usize {
        match *self {
            ExtremeSet::Box { h } => h,
            ExtremeSet::Sum { .. } => 1,
            ExtremeSet::Combined => 2,
        }
    }

    /// `y ∈ tA`, strict inequalities.
    pub fn member(&self, t: f64, y: &[f64]) -> Result<bool> {
        if y.len() != self.dim() {
            return Err(Error::Shape { expected: self.dim(), got: y.len() });
        }
        if !(t > 0.0) {
            return Err(Error::Domain(format!("scale must be positive, got {t}")));
        }
        Ok(self.contains(t, y))
    }

    /// Unchecked membership for hot loops; `y.len()` must equal `dim()`.
    #[inline]
    pub fn contains(&self, t: f64, y: &[f64]) -> bool {
        match self {
            ExtremeSet::Box { .. } => y.iter().all(|&v| v > t),
            ExtremeSet::Sum { .. } => y.iter().sum::<f64>() > t,
            ExtremeSet::Combined => y[0] + y[1] > t && y[2] > t,
        }
    }

    /// `ν(u^{−1}·A)` in closed form.
    pub fn nu_eval(&self, alpha: f64, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::Shape { expected: self.dim(), got: u.len() });
        }
        if u.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain("scales u must be positive".into()));
        }
        Ok(self.nu_pow(&u.iter().map(|&v| v.powf(alpha)).collect::<Vec<_>>()))
    }

    /// `ν(u^{−1}·A)` from the powers `u_i^α`.
    #[inline]
    pub fn nu_pow(&self, ua: &[f64]) -> f64 {
        match self {
            ExtremeSet::Box { .. } => ua.iter().product(),
            ExtremeSet::Sum { .. } => ua.iter().sum(),
            ExtremeSet::Combined => (ua[0] + ua[1]) * ua[2],
        }
    }

    /// `g(t) = t^β`.
    pub fn g_scale(&self, t: f64) -> f64 {
        t.powi(self.beta() as i32)
    }

    /// `T(s) = s^{−αβ}`.
    pub fn homogeneity_t(&self, alpha: f64, s: f64) -> f64 {
        s.powf(-alpha * self.beta() as f64)
    }

    /// Bound `[Σ_{j_i=0} (u_i ∨ 1)^{α+ε}] ∏_{j_i=1} (u_i ∨ 1)^{α+ε}` (the
    /// sum is 1 when every coordinate is flagged).
    pub fn moment_envelope(&self, alpha: f64, epsilon: f64, u: &[f64]) -> f64 {
        let cone = self.cone();
        let p = alpha + epsilon;
        let mut sum = 0.0;
        let mut prod = 1.0;
        for (&b, &v) in cone.bits().iter().zip(u) {
            let w = v.max(1.0).powf(p);
            if b {
                prod *= w;
            } else {
                sum += w;
            }
        }
        if cone.ones() == cone.dim() {
            prod
        } else {
            sum * prod
        }
    }
}

impl fmt::Display for ExtremeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtremeSet::Box { h } => write!(f, "box:{h}"),
            ExtremeSet::Sum { h } => write!(f, "sum:{h}"),
            ExtremeSet::Combined => write!(f, "combined"),
        }
    }
}

impl FromStr for ExtremeSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "combined" {
            return Ok(ExtremeSet::Combined);
        }
        let (family, h) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("unknown set '{s}' (expected box:h, sum:h or combined)")))?;
        let h: usize = h
            .parse()
            .map_err(|_| Error::Config(format!("bad window length in set '{s}'")))?;
        let set = match family {
            "box" => ExtremeSet::Box { h },
            "sum" => ExtremeSet::Sum { h },
            _ => return Err(Error::Config(format!("unknown set family '{family}'"))),
        };
        set.validate()?;
        Ok(set)
    }
}

impl TryFrom<String> for ExtremeSet {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ExtremeSet> for String {
    fn from(s: ExtremeSet) -> String {
        s.to_string()
    }
}

/// Importance-sampling estimate of `P(u·Z ∈ tA) / g(F̄(t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRatio {
    pub estimate: f64,
    pub stderr: f64,
    pub effective_sample_size: f64,
    /// Set when the effective sample size falls below 100.
    pub low_precision: bool,
}

/// Proposal: flagged coordinates are drawn from `Z | Z > t/u_i`; for the
/// unflagged group one coordinate `i` (chosen with probability proportional
/// to `F̄(c_i)`, `c_i = t/(|group|·u_i)`) is drawn from `Z | Z > c_i` and the
/// others from `F`. Every point of `tA` lies in the proposal support since a
/// sum exceeding `t` has a term exceeding `t/|group|`.
pub fn mc_tail_ratio(
    set: &ExtremeSet,
    tail: &TailModel,
    u: &[f64],
    t: f64,
    n_mc: usize,
    seed: u64,
) -> Result<TailRatio> {
    let h = set.dim();
    if u.len() != h {
        return Err(Error::Shape { expected: h, got: u.len() });
    }
    if u.iter().any(|&v| !(v > 0.0)) || !(t > 0.0) || n_mc < 2 {
        return Err(Error::Domain("need positive scales, t > 0 and n_mc >= 2".into()));
    }
    let tail_t = tail.survival(t);
    if !(tail_t > 0.0 && tail_t < 0.1) {
        return Err(Error::Domain(format!("threshold {t} not in the tail: F̄(t) = {tail_t}")));
    }
    let bits = set.cone().bits().to_vec();
    let flagged: Vec<usize> = (0..h).filter(|&i| bits[i]).collect();
    let group: Vec<usize> = (0..h).filter(|&i| !bits[i]).collect();
    let flagged_weight: f64 = flagged.iter().map(|&i| tail.survival(t / u[i])).product();
    let cuts: Vec<f64> = group.iter().map(|&i| t / (group.len() as f64 * u[i])).collect();
    let cut_tails: Vec<f64> = cuts.iter().map(|&c| tail.survival(c)).collect();
    let total: f64 = cut_tails.iter().sum();

    let mut rng = rng_from_seed(seed);
    let mut z = vec![0.0; h];
    let mut y = vec![0.0; h];
    // Welford running moments of the weighted indicator
    let (mut mean, mut m2) = (0.0, 0.0);
    let (mut s1, mut s2) = (0.0, 0.0);
    for draw in 0..n_mc {
        for &i in &flagged {
            z[i] = tail.draw_exceeding(t / u[i], &mut rng);
        }
        let mut w = flagged_weight;
        if !group.is_empty() {
            let mut pick = rand::Rng::random::<f64>(&mut rng) * total;
            let mut chosen = group.len() - 1;
            for (g, &p) in cut_tails.iter().enumerate() {
                if pick < p {
                    chosen = g;
                    break;
                }
                pick -= p;
            }
            for (g, &i) in group.iter().enumerate() {
                z[i] = if g == chosen {
                    tail.draw_exceeding(cuts[g], &mut rng)
                } else {
                    tail.draw(&mut rng)
                };
            }
            let hits = group.iter().zip(&cuts).filter(|(&i, &c)| z[i] > c).count();
            w *= total / hits as f64;
        }
        for i in 0..h {
            y[i] = u[i] * z[i];
        }
        let v = if set.contains(t, &y) { w } else { 0.0 };
        s1 += v;
        s2 += v * v;
        let delta = v - mean;
        mean += delta / (draw + 1) as f64;
        m2 += delta * (v - mean);
    }
    let nf = n_mc as f64;
    let var = m2 / (nf - 1.0) / nf;
    let norm = set.g_scale(tail_t);
    let ess = if s2 > 0.0 { s1 * s1 / s2 } else { 0.0 };
    Ok(TailRatio {
        estimate: mean / norm,
        stderr: var.sqrt() / norm,
        effective_sample_size: ess,
        low_precision: ess < 100.0,
    })
}
