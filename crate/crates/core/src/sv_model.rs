//! The stochastic volatility process `Y_j = σ(X_j) Z_j`.

use crate::error::{Error, Result};
use crate::gp_sim::{AcfModel, CirculantSampler};
use crate::quadrature::normal_expect_adaptive;
use crate::rng::{derive_seed, rng_from_seed, streams};
use crate::tails::TailModel;
use serde::{Deserialize, Serialize};

/// Floor added to `|x|^p` so that the volatility stays positive.
pub const ABS_POWER_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum VolatilityFn {
    /// `σ(x) = e^x`.
    Exp,
    /// `σ(x) = |x|^p + 1e−8`.
    AbsPower { power: f64 },
    /// `σ(x) = c`.
    Const { value: f64 },
    /// `σ(x) = c·σ₀(x)`.
    Scaled { factor: f64, inner: Box<VolatilityFn> },
}

impl VolatilityFn {
    pub fn validate(&self) -> Result<()> {
        match self {
            VolatilityFn::Exp => Ok(()),
            VolatilityFn::AbsPower { power } if *power > 0.0 && power.is_finite() => Ok(()),
            VolatilityFn::Const { value } if *value > 0.0 && value.is_finite() => Ok(()),
            VolatilityFn::Scaled { factor, inner } if *factor > 0.0 && factor.is_finite() => inner.validate(),
            other => Err(Error::Config(format!("invalid volatility function {other:?}"))),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            VolatilityFn::Exp => x.exp(),
            VolatilityFn::AbsPower { power } => x.abs().powf(*power) + ABS_POWER_FLOOR,
            VolatilityFn::Const { value } => *value,
            VolatilityFn::Scaled { factor, inner } => factor * inner.eval(x),
        }
    }

    /// `σ(x)^a`, computed in log space for `Exp`.
    pub fn eval_pow(&self, x: f64, a: f64) -> f64 {
        match self {
            VolatilityFn::Exp => (a * x).exp(),
            _ => self.eval(x).powf(a),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            VolatilityFn::Const { .. } => true,
            VolatilityFn::Scaled { inner, .. } => inner.is_constant(),
            _ => false,
        }
    }

    /// Points where `σ` is not smooth.
    fn kinks(&self) -> Vec<f64> {
        match self {
            VolatilityFn::AbsPower { .. } => vec![0.0],
            VolatilityFn::Scaled { inner, .. } => inner.kinks(),
            _ => Vec::new(),
        }
    }

    /// `E[σ(X)^a]` for `X ~ N(0, 1)`.
    pub fn moment(&self, a: f64) -> f64 {
        match self {
            VolatilityFn::Exp => (0.5 * a * a).exp(),
            VolatilityFn::Const { value } => value.powf(a),
            VolatilityFn::Scaled { factor, inner } => factor.powf(a) * inner.moment(a),
            // |x|^p is not smooth at 0, so Gauss–Hermite converges slowly;
            // split the line there instead.
            VolatilityFn::AbsPower { .. } => {
                normal_expect_adaptive(|x| self.eval_pow(x, a), &self.kinks(), 1e-14)
                    .unwrap_or(f64::INFINITY)
            }
        }
    }
}

/// `E[σ^{order·α}(X)]`, with a flag set when the value is not finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moment {
    pub value: f64,
    pub divergent: bool,
}

pub fn sigma_alpha_moment(vol: &VolatilityFn, alpha: f64, order: u32) -> Result<Moment> {
    if !(1..=2).contains(&order) {
        return Err(Error::Domain(format!("moment order must be 1 or 2, got {order}")));
    }
    vol.validate()?;
    let value = vol.moment(alpha * order as f64);
    let divergent = !value.is_finite();
    Ok(Moment { value: if divergent { f64::INFINITY } else { value }, divergent })
}

/// Full description of a simulated process and its horizon parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvConfig {
    pub acf: AcfModel,
    pub vol: VolatilityFn,
    pub tail: TailModel,
    /// Series length.
    pub n: usize,
    /// Conditioning window length.
    pub h: usize,
    /// Lead of the target window.
    pub m: usize,
    /// Target window is `h_prime + 1` observations long.
    #[serde(default)]
    pub h_prime: usize,
}

impl SvConfig {
    pub fn validate(&self) -> Result<()> {
        self.acf.validate()?;
        self.vol.validate()?;
        self.tail.validate()?;
        if self.h == 0 {
            return Err(Error::Config("conditioning window h must be at least 1".into()));
        }
        if self.m <= self.h {
            return Err(Error::Config(format!(
                "lead m = {} must exceed the window h = {}",
                self.m, self.h
            )));
        }
        if self.n < self.m + self.h_prime + 1 {
            return Err(Error::Config(format!(
                "series length {} shorter than m + h' + 1 = {}",
                self.n,
                self.m + self.h_prime + 1
            )));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.tail.alpha()
    }
}

/// A simulated path together with its latent driver and innovations.
#[derive(Debug, Clone, PartialEq)]
pub struct SvPath {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

/// Reusable simulator; the circulant factorization is computed once.
#[derive(Debug)]
pub struct SvSimulator {
    vol: VolatilityFn,
    tail: TailModel,
    sampler: CirculantSampler,
}

impl SvSimulator {
    pub fn new(acf: &AcfModel, vol: &VolatilityFn, tail: &TailModel, n: usize) -> Result<Self> {
        vol.validate()?;
        tail.validate()?;
        Ok(SvSimulator {
            vol: vol.clone(),
            tail: tail.clone(),
            sampler: CirculantSampler::new(acf, n)?,
        })
    }

    pub fn from_config(cfg: &SvConfig) -> Result<Self> {
        cfg.validate()?;
        Self::new(&cfg.acf, &cfg.vol, &cfg.tail, cfg.n)
    }

    pub fn len(&self) -> usize {
        self.sampler.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sampler.is_empty()
    }

    /// Latent path from stream `LATENT` of `seed`, innovations from stream
    /// `INNOVATION`.
    pub fn simulate(&self, seed: u64) -> SvPath {
        let n = self.len();
        let mut x = vec![0.0; n];
        self.sampler.sample_into(derive_seed(seed, streams::LATENT), &mut x);
        let mut rng = rng_from_seed(derive_seed(seed, streams::INNOVATION));
        let z: Vec<f64> = (0..n).map(|_| self.tail.draw(&mut rng)).collect();
        let y = x.iter().zip(&z).map(|(&xi, &zi)| self.vol.eval(xi) * zi).collect();
        SvPath { y, x, z }
    }

    /// Observations only.
    pub fn simulate_y(&self, seed: u64) -> Vec<f64> {
        self.simulate(seed).y
    }
}

pub fn simulate_sv(cfg: &SvConfig, seed: u64) -> Result<SvPath> {
    Ok(SvSimulator::from_config(cfg)?.simulate(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(vol: VolatilityFn, n: usize) -> SvConfig {
        SvConfig {
            acf: AcfModel::Ar1 { phi: 0.5 },
            vol,
            tail: TailModel::pareto(2.0),
            n,
            h: 1,
            m: 2,
            h_prime: 0,
        }
    }

    #[test]
    fn constant_volatility_returns_innovations() {
        let p = simulate_sv(&cfg(VolatilityFn::Const { value: 1.0 }, 500), 3).unwrap();
        assert_eq!(p.y, p.z);
    }

    #[test]
    fn signs_follow_innovations() {
        let mut c = cfg(VolatilityFn::Exp, 1000);
        c.tail = TailModel::student_t(3.0);
        let p = simulate_sv(&c, 8).unwrap();
        assert!(p.y.iter().zip(&p.z).all(|(y, z)| y.signum() == z.signum()));
        for i in 0..p.y.len() {
            assert_eq!(p.y[i], p.x[i].exp() * p.z[i]);
        }
    }

    #[test]
    fn moment_examples() {
        let m = sigma_alpha_moment(&VolatilityFn::Exp, 1.0, 1).unwrap();
        assert_relative_eq!(m.value, 0.5f64.exp(), epsilon = 1e-14);
        assert_eq!(sigma_alpha_moment(&VolatilityFn::Const { value: 3.0 }, 2.0, 1).unwrap().value, 9.0);
        let m = sigma_alpha_moment(&VolatilityFn::AbsPower { power: 1.0 }, 2.0, 1).unwrap();
        assert_relative_eq!(m.value, 1.0, epsilon = 1e-7);
        // E|X|^{2·1.5} = 2^{1.5}Γ(2)/√π
        let m = sigma_alpha_moment(&VolatilityFn::AbsPower { power: 1.0 }, 1.5, 2).unwrap();
        assert_relative_eq!(m.value, 2f64.powf(1.5) / std::f64::consts::PI.sqrt(), epsilon = 1e-7);
        assert!(sigma_alpha_moment(&VolatilityFn::Exp, 1.0, 3).is_err());
    }

    #[test]
    fn lead_must_exceed_window() {
        let mut c = cfg(VolatilityFn::Exp, 100);
        c.m = 1;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.m = 2;
        c.n = 2;
        assert!(c.validate().is_err());
    }

    #[test]
    fn simulation_is_deterministic() {
        let c = cfg(VolatilityFn::Exp, 256);
        assert_eq!(simulate_sv(&c, 5).unwrap(), simulate_sv(&c, 5).unwrap());
        assert_ne!(simulate_sv(&c, 5).unwrap().y, simulate_sv(&c, 6).unwrap().y);
    }
}
