//! Estimate the conditional distribution from one simulated series and set
//! it against the Monte Carlo limit.

use sv_extremogram::cones::ExtremeSet;
use sv_extremogram::estimators::{psi_hat_curve, EstimatorConfig};
use sv_extremogram::gp_sim::AcfModel;
use sv_extremogram::limits::{mc_psi_limit, LimitQuery, Target};
use sv_extremogram::sv_model::{simulate_sv, SvConfig, VolatilityFn};
use sv_extremogram::tails::TailModel;

fn main() -> sv_extremogram::Result<()> {
    let cfg = SvConfig {
        acf: AcfModel::Ar1 { phi: 0.7 },
        vol: VolatilityFn::Exp,
        tail: TailModel::pareto(2.0),
        n: 200_000,
        h: 1,
        m: 2,
        h_prime: 0,
    };
    let grid = vec![1.5, 3.0, 6.0, 12.0, 24.0];
    let y = simulate_sv(&cfg, 2024)?.y;
    let est = psi_hat_curve(&y, &EstimatorConfig::with_exponent(ExtremeSet::Box { h: 1 }, 2, 0.6), &grid)?;
    let limit = mc_psi_limit(&LimitQuery {
        cfg,
        set: ExtremeSet::Box { h: 1 },
        target: Target::CdfCurve { grid: grid.clone() },
        n_mc: 500_000,
        seed: 9,
    })?;
    println!("k={} threshold={:.3} exceedances={}", est[0].k, est[0].u_hat, est[0].denominator);
    println!("   y   estimate  95% interval       limit");
    for ((g, e), l) in grid.iter().zip(&est).zip(&limit.points) {
        println!("{g:>5}  {:.4}   [{:.4}, {:.4}]   {:.4}", e.value, e.ci95.0, e.ci95.1, l.value);
    }
    Ok(())
}
