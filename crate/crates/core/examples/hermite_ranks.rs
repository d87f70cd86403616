//! Hermite coefficients and ranks, ranks of the limit integrands, and the
//! variance decay of partial sums under long memory.

use sv_extremogram::cones::ExtremeSet;
use sv_extremogram::gp_sim::AcfModel;
use sv_extremogram::hermite::{variance_rate_check, hermite_coeffs_1d, rank_of_g, DEFAULT_RANK_TOL};
use sv_extremogram::limits::{LimitQuery, Target};
use sv_extremogram::sv_model::{SvConfig, VolatilityFn};
use sv_extremogram::tails::TailModel;

fn main() -> sv_extremogram::Result<()> {
    let fns: [(&str, fn(f64) -> f64); 4] =
        [("x", |x| x), ("exp", f64::exp), ("x^2-1", |x| x * x - 1.0), ("|x|", f64::abs)];
    for (name, f) in fns {
        let e = hermite_coeffs_1d(f, 6, DEFAULT_RANK_TOL)?;
        let c: Vec<String> = (0..=4).map(|q| format!("{:+.4}", e.normalized(q))).collect();
        println!("{name:<6} rank {:?}  c_0..c_4 = {}", e.rank, c.join(" "));
    }

    for vol in [VolatilityFn::Exp, VolatilityFn::AbsPower { power: 1.0 }, VolatilityFn::Const { value: 1.0 }] {
        let q = LimitQuery {
            cfg: SvConfig { acf: AcfModel::Fgn { hurst: 0.8 }, vol: vol.clone(), tail: TailModel::pareto(2.0), n: 100, h: 1, m: 2, h_prime: 0 },
            set: ExtremeSet::Box { h: 1 },
            target: Target::CdfCurve { grid: vec![1.0, 3.0, 10.0] },
            n_mc: 2,
            seed: 0,
        };
        let r = rank_of_g(&q, 4, DEFAULT_RANK_TOL)?;
        println!("{vol:?}: tau(A)={:?} tau*={:?} degenerate={}", r.tau_a, r.tau_star, r.degenerate);
    }

    let fgn = AcfModel::Fgn { hurst: 0.8 };
    for (name, rank, f) in [("x", 1, (|x| x) as fn(f64) -> f64), ("x^2-1", 2, |x| x * x - 1.0)] {
        let rep = variance_rate_check(f, rank, &fgn, &[256, 1024, 4096, 16384], 200, 3)?;
        println!("{name}: slope {:.3} (rate {:.2}), C = {:.3}", rep.slope, rep.expected_slope, rep.fitted_c);
    }
    Ok(())
}
