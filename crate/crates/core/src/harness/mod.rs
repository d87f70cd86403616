//! Experiment driver behind the `svx` binary: simulation, estimation,
//! limit functionals, coverage studies, the two-panel distribution figure,
//! Hermite diagnostics and the convolution tail check.

pub mod config;
pub mod output;
pub mod svg;

pub use config::{ExperimentSpec, NormingChoice, VarianceChoice};
pub use output::{error_json, Cell, Format, Report, Table};

use crate::error::{Error, Result};
use crate::estimators::{psi_hat_curve_with, rho_hat_with, Estimate, Norming, StderrOptions, VarianceMode};
use crate::hermite::{variance_rate_check, hermite_coeffs_1d, rank_of_g, DEFAULT_RANK_TOL};
use crate::limits::{asymptotic_variance, mc_psi_limit, mc_rho_limit, mu_c, mu_c_exact, Target};
use crate::rng::{derive_path, rng_from_seed};
use rand::Rng;
use crate::stats::{anderson_darling_composite_normal, anderson_darling_normal, ecdf_sorted, ks_critical_value};
use crate::sv_model::{SvConfig, SvSimulator, VolatilityFn};
use crate::tails::{convolution_tail_check, log_grid, sum_tail_second_order, TailModel};
use config::seeds;
use rayon::prelude::*;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Estimate,
    Limit,
    Coverage,
    Figure1,
    Hermite,
    CheckAppendixA,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Estimate => "estimate",
            Command::Limit => "limit",
            Command::Coverage => "coverage",
            Command::Figure1 => "figure1",
            Command::Hermite => "hermite",
            Command::CheckAppendixA => "check-appendix-a",
        }
    }

    /// Runs on a dedicated pool of `threads` workers (`0` = rayon default).
    pub fn run(self, spec: &ExperimentSpec, threads: usize) -> Result<Report> {
        spec.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| match self {
            Command::Simulate => run_simulate(spec),
            Command::Estimate => {
                let y = match &spec.outputs.input {
                    Some(path) => read_series(Path::new(path))?,
                    None => simulate_series(spec)?,
                };
                run_estimate(spec, &y)
            }
            Command::Limit => run_limit(spec),
            Command::Coverage => Ok(coverage_report(&run_coverage(spec)?)),
            Command::Figure1 => Ok(figure1_report(&run_figure1(spec)?)),
            Command::Hermite => run_hermite(spec),
            Command::CheckAppendixA => run_check_appendix_a(spec),
        })
    }
}

/// Observations from a CSV file: one numeric column, optionally headed `y`.
/// With several columns the one headed `y` is used.
pub fn read_series(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    parse_series(&text)
}

pub fn parse_series(text: &str) -> Result<Vec<f64>> {
    let mut column = 0;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if i == 0 && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            column = fields.iter().position(|f| *f == "y").ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("header {line:?} has no `y` column"),
            })?;
            continue;
        }
        let field = fields.get(column).ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected at least {} fields", column + 1),
        })?;
        let v: f64 = field.parse().map_err(|_| Error::Parse {
            line: i + 1,
            message: format!("{field:?} is not a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse { line: i + 1, message: format!("{field:?} is not finite") });
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Parse { line: 0, message: "no observations".into() });
    }
    Ok(out)
}

fn simulation_seed(spec: &ExperimentSpec) -> u64 {
    derive_path(spec.master_seed, &[seeds::SIMULATE])
}

/// The series `estimate` uses when no input file is given.
pub fn simulate_series(spec: &ExperimentSpec) -> Result<Vec<f64>> {
    Ok(SvSimulator::from_config(&spec.sv)?.simulate_y(simulation_seed(spec)))
}

pub fn run_simulate(spec: &ExperimentSpec) -> Result<Report> {
    let path = SvSimulator::from_config(&spec.sv)?.simulate(simulation_seed(spec));
    let mut t = Table::new("path", &["j", "x", "y"]);
    for (j, (x, y)) in path.x.iter().zip(&path.y).enumerate() {
        t.push(vec![(j + 1).into(), (*x).into(), (*y).into()]);
    }
    let mut r = Report::new("simulate");
    r.tables.push(t);
    Ok(r)
}

/// Standard-error settings requested by the spec.
pub fn stderr_options(spec: &ExperimentSpec) -> Result<StderrOptions> {
    let variance = match spec.coverage.variance {
        VarianceChoice::Auto => None,
        VarianceChoice::Bernoulli => Some(VarianceMode::Bernoulli),
        VarianceChoice::Empirical => Some(VarianceMode::Empirical),
        VarianceChoice::Model => Some(VarianceMode::Model(asymptotic_variance(&spec.limit_query())?)),
    };
    let norming = match spec.coverage.norming {
        NormingChoice::Observed => Norming::Observed,
        NormingChoice::Known => {
            let sv = &spec.sv;
            let set = &spec.estimator.set;
            let value = match mu_c_exact(set, &sv.vol, &sv.acf, sv.alpha()) {
                Some(v) => v,
                None => mu_c(set, &sv.vol, &sv.acf, sv.alpha(), spec.n_mc, derive_path(spec.master_seed, &[seeds::LIMIT, 1]))?.value,
            };
            Norming::Known { mu_c: value }
        }
    };
    Ok(StderrOptions { variance, norming })
}

/// Estimates for every target point of the spec.
pub fn estimate_points(y: &[f64], spec: &ExperimentSpec, opts: &StderrOptions) -> Result<Vec<Estimate>> {
    match &spec.target {
        Target::CdfCurve { grid } => psi_hat_curve_with(y, &spec.estimator, grid, opts),
        Target::EventProb { intervals } => Ok(vec![rho_hat_with(y, &spec.estimator, intervals, opts)?]),
        Target::SumCdf { .. } => Err(Error::Unimplemented("estimation of the sum-of-future target".into())),
    }
}

fn target_labels(target: &Target) -> Vec<f64> {
    match target {
        Target::CdfCurve { grid } | Target::SumCdf { grid } => grid.clone(),
        Target::EventProb { .. } => vec![f64::NAN],
    }
}

pub fn run_estimate(spec: &ExperimentSpec, y: &[f64]) -> Result<Report> {
    let opts = stderr_options(spec)?;
    let est = estimate_points(y, spec, &opts)?;
    let mut t = Table::new(
        "estimate",
        &["y", "value", "stderr", "ci_lo", "ci_hi", "sigma2", "numerator", "denominator", "k", "n", "u_hat"],
    );
    for (label, e) in target_labels(&spec.target).into_iter().zip(&est) {
        t.push(vec![
            label.into(),
            e.value.into(),
            e.stderr.into(),
            e.ci95.0.into(),
            e.ci95.1.into(),
            e.sigma2.into(),
            e.numerator.into(),
            e.denominator.into(),
            e.k.into(),
            e.n.into(),
            e.u_hat.into(),
        ]);
    }
    let mut r = Report::new("estimate");
    r.tables.push(t);
    Ok(r)
}

/// Limit values for every target point, `(value, stderr)`.
pub fn limit_values(spec: &ExperimentSpec) -> Result<Vec<(f64, f64)>> {
    let q = spec.limit_query();
    match q.target {
        Target::EventProb { .. } => {
            let v = mc_rho_limit(&q)?;
            Ok(vec![(v.value, v.stderr)])
        }
        _ => Ok(mc_psi_limit(&q)?.points.iter().map(|p| (p.value, p.stderr)).collect()),
    }
}

pub fn run_limit(spec: &ExperimentSpec) -> Result<Report> {
    let q = spec.limit_query();
    let mut r = Report::new("limit");
    let mut t = Table::new("limit", &["y", "value", "raw", "stderr"]);
    match q.target {
        Target::EventProb { .. } => {
            let v = mc_rho_limit(&q)?;
            t.push(vec![f64::NAN.into(), v.value.into(), v.value.into(), v.stderr.into()]);
        }
        _ => {
            for p in mc_psi_limit(&q)?.points {
                t.push(vec![p.y.into(), p.value.into(), p.raw.into(), p.stderr.into()]);
            }
        }
    }
    r.tables.push(t);
    match asymptotic_variance(&q) {
        Ok(reports) => {
            let mut v = Table::new("variance", &["y", "rho", "sigma2", "bernoulli", "mu_c", "cross_lags"]);
            for rep in reports {
                v.push(vec![
                    rep.y.into(),
                    rep.rho.into(),
                    rep.sigma2.into(),
                    (rep.rho * (1.0 - rep.rho)).into(),
                    rep.mu_c.into(),
                    rep.cross_terms.len().into(),
                ]);
            }
            r.tables.push(v);
        }
        Err(Error::Unimplemented(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(r)
}

const JITTER_STREAM: u64 = 1;

/// Per-point summary of a coverage study.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub y: f64,
    pub truth: f64,
    pub truth_stderr: f64,
    pub mean_estimate: f64,
    pub mean_stderr: f64,
    pub sd_estimate: f64,
    pub mean_abs_error: f64,
    pub coverage: f64,
    /// Anderson–Darling test of the studentized errors against `N(0, 1)`.
    /// Both tests see the numerator count spread uniformly over its unit
    /// cell, since a fixed denominator puts the raw errors on a lattice.
    pub ad_standard_pvalue: f64,
    /// Anderson–Darling test of normality with estimated mean and scale.
    pub ad_pvalue: f64,
    pub used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageStudy {
    pub rows: Vec<CoverageRow>,
    /// Per replicate, the estimates of every point or the failure kind.
    pub replicates: Vec<std::result::Result<Vec<Estimate>, String>>,
    pub failures: usize,
}

impl CoverageStudy {
    /// Studentized errors at point `i` over successful replicates.
    pub fn studentized(&self, i: usize) -> Vec<f64> {
        let truth = self.rows[i].truth;
        self.replicates
            .iter()
            .flatten()
            .map(|e| (e[i].value - truth) / e[i].stderr)
            .filter(|v| v.is_finite())
            .collect()
    }
}

/// Replicated estimation against the Monte Carlo limit. Replicate `r` is
/// simulated from its own derived seed, so the table does not depend on the
/// worker count.
pub fn run_coverage(spec: &ExperimentSpec) -> Result<CoverageStudy> {
    let truth = limit_values(spec)?;
    let opts = stderr_options(spec)?;
    let sim = SvSimulator::from_config(&spec.sv)?;
    let replicates: Vec<std::result::Result<Vec<Estimate>, String>> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| {
            let y = sim.simulate_y(spec.replicate_seed(r));
            estimate_points(&y, spec, &opts).map_err(|e| e.kind().to_string())
        })
        .collect();
    let failures = replicates.iter().filter(|r| r.is_err()).count();
    let ok: Vec<&Vec<Estimate>> = replicates.iter().flatten().collect();
    if ok.len() < 2 {
        return Err(Error::Numeric(format!("only {} of {} replicates succeeded", ok.len(), spec.replicates)));
    }
    let labels = target_labels(&spec.target);
    let mut rows = Vec::with_capacity(truth.len());
    for (i, &(tv, ts)) in truth.iter().enumerate() {
        let est: Vec<f64> = ok.iter().map(|e| e[i].value).collect();
        let se: Vec<f64> = ok.iter().map(|e| e[i].stderr).collect();
        let covered = ok.iter().filter(|e| e[i].ci95.0 <= tv && tv <= e[i].ci95.1).count();
        let z: Vec<f64> = replicates
            .iter()
            .enumerate()
            .filter_map(|(r, res)| res.as_ref().ok().map(|e| (r, &e[i])))
            .map(|(r, e)| {
                let mut rng = rng_from_seed(derive_path(spec.replicate_seed(r), &[JITTER_STREAM, i as u64]));
                let shift: f64 = rng.random::<f64>() - 0.5;
                ((e.numerator as f64 + shift) / e.denominator as f64 - tv) / e.stderr
            })
            .filter(|v| v.is_finite())
            .collect();
        let (ad_standard_pvalue, ad_pvalue) = if z.len() >= 8 {
            (anderson_darling_normal(&z).1, anderson_darling_composite_normal(&z).1)
        } else {
            (f64::NAN, f64::NAN)
        };
        rows.push(CoverageRow {
            y: labels[i],
            truth: tv,
            truth_stderr: ts,
            mean_estimate: crate::stats::mean(&est),
            mean_stderr: crate::stats::mean(&se),
            sd_estimate: crate::stats::variance(&est).sqrt(),
            mean_abs_error: est.iter().map(|v| (v - tv).abs()).sum::<f64>() / est.len() as f64,
            coverage: covered as f64 / ok.len() as f64,
            ad_standard_pvalue,
            ad_pvalue,
            used: ok.len(),
        });
    }
    Ok(CoverageStudy { rows, replicates, failures })
}

pub fn coverage_report(study: &CoverageStudy) -> Report {
    let mut cov = Table::new(
        "coverage",
        &[
            "y",
            "truth",
            "truth_stderr",
            "mean_estimate",
            "mean_stderr",
            "sd_estimate",
            "mean_abs_error",
            "coverage",
            "ad_pvalue",
            "ad_standard_pvalue",
            "replicates_used",
            "failures",
        ],
    );
    for r in &study.rows {
        cov.push(vec![
            r.y.into(),
            r.truth.into(),
            r.truth_stderr.into(),
            r.mean_estimate.into(),
            r.mean_stderr.into(),
            r.sd_estimate.into(),
            r.mean_abs_error.into(),
            r.coverage.into(),
            r.ad_pvalue.into(),
            r.ad_standard_pvalue.into(),
            r.used.into(),
            study.failures.into(),
        ]);
    }
    let mut reps = Table::new("replicates", &["replicate", "y", "estimate", "stderr", "studentized", "covered", "error"]);
    for (r, res) in study.replicates.iter().enumerate() {
        match res {
            Ok(est) => {
                for (row, e) in study.rows.iter().zip(est) {
                    reps.push(vec![
                        r.into(),
                        row.y.into(),
                        e.value.into(),
                        e.stderr.into(),
                        ((e.value - row.truth) / e.stderr).into(),
                        (e.ci95.0 <= row.truth && row.truth <= e.ci95.1).into(),
                        "".into(),
                    ]);
                }
            }
            Err(kind) => reps.push(vec![
                r.into(),
                f64::NAN.into(),
                f64::NAN.into(),
                f64::NAN.into(),
                f64::NAN.into(),
                false.into(),
                kind.as_str().into(),
            ]),
        }
    }
    let mut report = Report::new("coverage");
    report.tables.push(cov);
    report.tables.push(reps);
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigurePanel {
    pub label: String,
    pub grid: Vec<f64>,
    pub conditional: Vec<Estimate>,
    pub unconditional: Vec<f64>,
    pub sup_distance: f64,
    /// Two-sample 5% Kolmogorov–Smirnov critical value for the number of
    /// conditioning windows against the full sample.
    pub ks_critical: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure1 {
    pub iid: FigurePanel,
    pub sv: FigurePanel,
    pub svg: String,
}

fn figure_panel(label: &str, cfg: &SvConfig, spec: &ExperimentSpec, grid: &[f64], seed: u64) -> Result<FigurePanel> {
    let y = SvSimulator::from_config(cfg)?.simulate_y(seed);
    let conditional = psi_hat_curve_with(&y, &spec.estimator, grid, &StderrOptions::default())?;
    let n = conditional[0].n;
    let mut sorted = y[..n].to_vec();
    sorted.sort_by(f64::total_cmp);
    let unconditional: Vec<f64> = grid.iter().map(|&g| ecdf_sorted(&sorted, g)).collect();
    let sup_distance = conditional
        .iter()
        .zip(&unconditional)
        .map(|(c, u)| (c.value - u).abs())
        .fold(0.0, f64::max);
    let ks_critical = ks_critical_value(0.05, conditional[0].denominator as f64, n as f64);
    Ok(FigurePanel { label: label.into(), grid: grid.to_vec(), conditional, unconditional, sup_distance, ks_critical })
}

/// Conditional against unconditional empirical distributions for the
/// configured process and for i.i.d. data with the same innovations.
pub fn run_figure1(spec: &ExperimentSpec) -> Result<Figure1> {
    let Target::CdfCurve { grid } = &spec.target else {
        return Err(Error::Config("figure1 needs a cdf_curve target".into()));
    };
    let iid_cfg = SvConfig { vol: VolatilityFn::Const { value: 1.0 }, ..spec.sv.clone() };
    let iid = figure_panel("iid", &iid_cfg, spec, grid, derive_path(spec.master_seed, &[seeds::FIGURE, 0]))?;
    let sv = figure_panel("sv", &spec.sv, spec, grid, derive_path(spec.master_seed, &[seeds::FIGURE, 1]))?;
    let panels: Vec<svg::Panel> = [(&iid, "i.i.d."), (&sv, "stochastic volatility")]
        .iter()
        .map(|(p, title)| svg::Panel {
            title: title.to_string(),
            grid: p.grid.clone(),
            conditional: p.conditional.iter().map(|e| e.value).collect(),
            unconditional: p.unconditional.clone(),
        })
        .collect();
    Ok(Figure1 { svg: svg::render(&panels), iid, sv })
}

pub fn figure1_report(fig: &Figure1) -> Report {
    let mut r = Report::new("figure1");
    for p in [&fig.iid, &fig.sv] {
        let mut t = Table::new(&p.label, &["y", "conditional", "stderr", "unconditional"]);
        for ((&g, e), &u) in p.grid.iter().zip(&p.conditional).zip(&p.unconditional) {
            t.push(vec![g.into(), e.value.into(), e.stderr.into(), u.into()]);
        }
        r.tables.push(t);
    }
    let mut s = Table::new("summary", &["panel", "n", "k", "exceedances", "sup_distance", "ks_critical"]);
    for p in [&fig.iid, &fig.sv] {
        let e = &p.conditional[0];
        s.push(vec![
            p.label.as_str().into(),
            e.n.into(),
            e.k.into(),
            e.denominator.into(),
            p.sup_distance.into(),
            p.ks_critical.into(),
        ]);
    }
    r.tables.push(s);
    r.files.push(("figure1.svg".into(), fig.svg.clone()));
    r
}

pub fn run_hermite(spec: &ExperimentSpec) -> Result<Report> {
    let opts = &spec.hermite;
    let mut ranks = Table::new("ranks", &["function", "rank", "coefficient", "second_moment"]);
    let mut rows = Table::new("variance", &["function", "n", "variance", "rate", "ratio"]);
    let mut slopes = Table::new(
        "slopes",
        &["function", "rank", "slope", "expected_slope", "fitted_c", "ratio_slope", "bound_holds"],
    );
    for (fi, f) in opts.functions.iter().enumerate() {
        let e = hermite_coeffs_1d(|x| f.eval(x), opts.q_max, DEFAULT_RANK_TOL)?;
        ranks.push(vec![
            f.name().into(),
            e.rank.into(),
            e.rank.map(|q| e.normalized(q)).into(),
            e.second_moment.into(),
        ]);
        let Some(rank) = e.rank else { continue };
        let seed = derive_path(spec.master_seed, &[seeds::HERMITE, fi as u64]);
        let rep = variance_rate_check(|x| f.eval(x), rank, &opts.acf, &opts.n_list, opts.replicates, seed)?;
        for row in &rep.rows {
            rows.push(vec![f.name().into(), row.n.into(), row.variance.into(), row.rate.into(), row.ratio.into()]);
        }
        slopes.push(vec![
            f.name().into(),
            rank.into(),
            rep.slope.into(),
            rep.expected_slope.into(),
            rep.fitted_c.into(),
            rep.ratio_slope.into(),
            rep.bound_holds.into(),
        ]);
    }
    let mut r = Report::new("hermite");
    r.tables.extend([ranks, rows, slopes]);
    match rank_of_g(&spec.limit_query(), opts.q_max.min(4), DEFAULT_RANK_TOL) {
        Ok(g) => {
            let mut t = Table::new("limit_ranks", &["y", "tau_ab", "tau_a", "tau_star", "degenerate"]);
            for (y, tau) in target_labels(&spec.target).into_iter().zip(&g.tau_ab) {
                t.push(vec![y.into(), (*tau).into(), g.tau_a.into(), g.tau_star.into(), g.degenerate.into()]);
            }
            r.tables.push(t);
        }
        Err(Error::Unimplemented(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(r)
}

pub fn run_check_appendix_a(spec: &ExperimentSpec) -> Result<Report> {
    let a = &spec.appendix_a;
    let grid = log_grid(a.t_min, a.t_max, a.points);
    let mut rows = Table::new("rows", &["alpha", "t", "lhs", "envelope", "ratio", "second_order"]);
    let mut summary = Table::new(
        "summary",
        &["alpha", "c_hat", "first_decade_max", "last_decade_max", "bounded", "second_order_at_t_max", "mean"],
    );
    for &alpha in &a.alphas {
        let model = TailModel::pareto(alpha);
        let rep = convolution_tail_check(&model, a.u1, a.u2, &grid, a.epsilon)?;
        for row in &rep.rows {
            rows.push(vec![
                alpha.into(),
                row.t.into(),
                row.lhs.into(),
                row.envelope.into(),
                row.ratio.into(),
                sum_tail_second_order(&model, row.t)?.into(),
            ]);
        }
        let mean = if alpha > 1.0 { alpha / (alpha - 1.0) } else { f64::INFINITY };
        summary.push(vec![
            alpha.into(),
            rep.c_hat.into(),
            rep.first_decade_max.into(),
            rep.last_decade_max.into(),
            rep.bounded.into(),
            sum_tail_second_order(&model, a.t_max)?.into(),
            mean.into(),
        ]);
    }
    let mut r = Report::new("check-appendix-a");
    r.tables.extend([rows, summary]);
    Ok(r)
}
