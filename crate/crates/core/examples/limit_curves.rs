//! Limiting conditional distributions for short and long memory drivers,
//! with the conditioning constant and the asymptotic variance.

use sv_extremogram::cones::ExtremeSet;
use sv_extremogram::gp_sim::AcfModel;
use sv_extremogram::limits::{asymptotic_variance, mc_psi_limit, mu_c_exact, LimitQuery, Target};
use sv_extremogram::sv_model::{SvConfig, VolatilityFn};
use sv_extremogram::tails::TailModel;

fn main() -> sv_extremogram::Result<()> {
    let grid = vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
    for (name, acf) in [("ar1(0.5)", AcfModel::Ar1 { phi: 0.5 }), ("fgn(0.9)", AcfModel::Fgn { hurst: 0.9 })] {
        for set in [ExtremeSet::Box { h: 1 }, ExtremeSet::Sum { h: 2 }] {
            let m = set.dim() + 2;
            let q = LimitQuery {
                cfg: SvConfig {
                    acf: acf.clone(),
                    vol: VolatilityFn::Exp,
                    tail: TailModel::pareto(2.0),
                    n: 1000,
                    h: set.dim(),
                    m,
                    h_prime: 0,
                },
                set,
                target: Target::CdfCurve { grid: grid.clone() },
                n_mc: 200_000,
                seed: 1,
            };
            let curve = mc_psi_limit(&q)?;
            let mu = mu_c_exact(&set, &q.cfg.vol, &acf, 2.0).unwrap_or(f64::NAN);
            println!("{name} {set} m={m} mu_C={mu:.4}");
            for (p, v) in curve.points.iter().zip(asymptotic_variance(&q)?) {
                println!(
                    "  y={:>4}  psi={:.4} ± {:.4}  sigma2={:.4} (bernoulli {:.4})",
                    p.y,
                    p.value,
                    p.stderr,
                    v.sigma2,
                    v.rho * (1.0 - v.rho)
                );
            }
        }
    }
    Ok(())
}
