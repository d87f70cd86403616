//! Simulate a long-memory stochastic volatility path and look at how the
//! extremes of `Y` line up with the latent driver.

use sv_extremogram::gp_sim::AcfModel;
use sv_extremogram::stats::autocorrelation;
use sv_extremogram::sv_model::{simulate_sv, SvConfig, VolatilityFn};
use sv_extremogram::tails::TailModel;

fn main() -> sv_extremogram::Result<()> {
    let cfg = SvConfig {
        acf: AcfModel::Fgn { hurst: 0.8 },
        vol: VolatilityFn::Exp,
        tail: TailModel::student_t(3.0),
        n: 50_000,
        h: 1,
        m: 2,
        h_prime: 0,
    };
    let path = simulate_sv(&cfg, 42)?;

    let abs: Vec<f64> = path.y.iter().map(|v| v.abs()).collect();
    println!("lag  acf(X)   acf(|Y|)  acf(Y)");
    for lag in [1, 2, 5, 10, 50, 100] {
        println!(
            "{lag:>3}  {:.4}  {:.4}   {:+.4}",
            autocorrelation(&path.x, lag),
            autocorrelation(&abs, lag),
            autocorrelation(&path.y, lag)
        );
    }

    let mut order: Vec<usize> = (0..path.y.len()).collect();
    order.sort_by(|&a, &b| abs[b].total_cmp(&abs[a]));
    let top = &order[..50];
    let mean_x = top.iter().map(|&i| path.x[i]).sum::<f64>() / top.len() as f64;
    println!("mean latent value at the 50 largest |Y|: {mean_x:.3} (unconditional mean 0)");
    Ok(())
}
