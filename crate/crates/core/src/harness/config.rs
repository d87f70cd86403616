//! TOML experiment specifications.
//!
//! Every random draw of an experiment descends from `master_seed`:
//! replicate `r` uses `derive_path(master_seed, [REPLICATE, r])`, limit
//! functionals use `[LIMIT]`, figure panels `[FIGURE, panel]` and the
//! Hermite variance check `[HERMITE]`.

use crate::cones::ExtremeSet;
use crate::error::{Error, Result};
use crate::estimators::EstimatorConfig;
use crate::gp_sim::AcfModel;
use crate::limits::{LimitQuery, Target};
use crate::rng::derive_path;
use crate::sv_model::{SvConfig, VolatilityFn};
use crate::tails::TailModel;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub mod seeds {
    pub const REPLICATE: u64 = 10;
    pub const LIMIT: u64 = 11;
    pub const FIGURE: u64 = 12;
    pub const HERMITE: u64 = 13;
    pub const SIMULATE: u64 = 14;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub sv: SvConfig,
    pub estimator: EstimatorConfig,
    pub target: Target,
    #[serde(default = "defaults::replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Monte Carlo draws for limit functionals.
    #[serde(default = "defaults::n_mc")]
    pub n_mc: usize,
    #[serde(default)]
    pub coverage: CoverageOptions,
    #[serde(default)]
    pub hermite: HermiteOptions,
    #[serde(default)]
    pub appendix_a: AppendixOptions,
    #[serde(default)]
    pub outputs: Outputs,
}

mod defaults {
    pub fn replicates() -> usize {
        1
    }
    pub fn n_mc() -> usize {
        200_000
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceChoice {
    /// Bernoulli for box and combined sets, empirical cross lags for sums.
    #[default]
    Auto,
    Bernoulli,
    Empirical,
    /// Cross terms of the generating model at the plug-in estimate.
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormingChoice {
    #[default]
    Observed,
    /// `n·g(k/n)·μ_C` with `μ_C` of the generating model.
    Known,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageOptions {
    #[serde(default)]
    pub variance: VarianceChoice,
    #[serde(default)]
    pub norming: NormingChoice,
}

/// Functions of a standard normal used by the Hermite variance check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Identity,
    Exp,
    /// `x² − 1`.
    Square,
    Abs,
}

impl Functional {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Functional::Identity => x,
            Functional::Exp => x.exp(),
            Functional::Square => x * x - 1.0,
            Functional::Abs => x.abs(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Functional::Identity => "identity",
            Functional::Exp => "exp",
            Functional::Square => "square",
            Functional::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HermiteOptions {
    pub acf: AcfModel,
    pub functions: Vec<Functional>,
    pub n_list: Vec<usize>,
    pub replicates: usize,
    pub q_max: usize,
}

impl Default for HermiteOptions {
    fn default() -> Self {
        HermiteOptions {
            acf: AcfModel::Fgn { hurst: 0.8 },
            functions: vec![Functional::Identity, Functional::Exp, Functional::Square],
            n_list: vec![256, 1024, 4096],
            replicates: 300,
            q_max: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppendixOptions {
    pub alphas: Vec<f64>,
    pub u1: f64,
    pub u2: f64,
    pub epsilon: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl Default for AppendixOptions {
    fn default() -> Self {
        AppendixOptions { alphas: vec![1.5, 2.0, 3.0], u1: 1.0, u2: 2.0, epsilon: 0.1, t_min: 10.0, t_max: 1e5, points: 41 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Observations for `estimate`; simulated from `sv` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            sv: SvConfig {
                acf: AcfModel::Ar1 { phi: 0.5 },
                vol: VolatilityFn::Exp,
                tail: TailModel::pareto(2.0),
                n: 10_000,
                h: 1,
                m: 2,
                h_prime: 0,
            },
            estimator: EstimatorConfig::with_exponent(ExtremeSet::Box { h: 1 }, 2, 0.5),
            target: Target::CdfCurve { grid: vec![0.5, 1.0, 2.0, 4.0, 8.0] },
            replicates: 1,
            master_seed: 0,
            n_mc: defaults::n_mc(),
            coverage: CoverageOptions::default(),
            hermite: HermiteOptions::default(),
            appendix_a: AppendixOptions::default(),
            outputs: Outputs::default(),
        }
    }
}

fn field(path: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{path}: {m}")),
        Error::Domain(m) => Error::Config(format!("{path}: {m}")),
        Error::Shape { expected, got } => {
            Error::Config(format!("{path}: dimension mismatch, expected {expected}, got {got}"))
        }
        other => other,
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Structural checks with the offending field named in the message.
    pub fn validate(&self) -> Result<()> {
        self.sv.validate().map_err(|e| field("sv", e))?;
        self.estimator.validate().map_err(|e| field("estimator", e))?;
        let est = &self.estimator;
        if est.h() != self.sv.h {
            return Err(Error::Config(format!("estimator.set: dimension {} differs from sv.h = {}", est.h(), self.sv.h)));
        }
        if est.m != self.sv.m {
            return Err(Error::Config(format!("estimator.m = {} differs from sv.m = {}", est.m, self.sv.m)));
        }
        if est.h_prime != self.sv.h_prime {
            return Err(Error::Config(format!(
                "estimator.h_prime = {} differs from sv.h_prime = {}",
                est.h_prime, self.sv.h_prime
            )));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates: must be at least 1".into()));
        }
        if self.n_mc < 2 {
            return Err(Error::Config("n_mc: must be at least 2".into()));
        }
        self.limit_query().validate().map_err(|e| field("target", e))?;
        let n = est.windows(self.sv.n).map_err(|e| field("sv.n", e))?;
        est.resolve_k(n).map_err(|e| field("estimator.k", e))?;
        let ap = &self.appendix_a;
        if ap.alphas.iter().any(|a| !(*a > 0.0)) || !(ap.t_min > 0.0 && ap.t_max > ap.t_min) || ap.points < 2 {
            return Err(Error::Config("appendix_a: need positive alphas, 0 < t_min < t_max and points >= 2".into()));
        }
        let he = &self.hermite;
        he.acf.validate().map_err(|e| field("hermite.acf", e))?;
        if he.n_list.len() < 2 || he.replicates < 3 || he.q_max == 0 || he.q_max > 6 {
            return Err(Error::Config("hermite: need two or more n values, >= 3 replicates and 1 <= q_max <= 6".into()));
        }
        Ok(())
    }

    pub fn limit_query(&self) -> LimitQuery {
        LimitQuery {
            cfg: self.sv.clone(),
            set: self.estimator.set,
            target: self.target.clone(),
            n_mc: self.n_mc,
            seed: derive_path(self.master_seed, &[seeds::LIMIT]),
        }
    }

    pub fn replicate_seed(&self, r: usize) -> u64 {
        derive_path(self.master_seed, &[seeds::REPLICATE, r as u64])
    }
}
