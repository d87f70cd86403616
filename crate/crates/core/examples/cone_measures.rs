//! Limit measures of the three extreme-set families, their homogeneity, and
//! the importance-sampling check of regular variation on cones.

use sv_extremogram::cones::{mc_tail_ratio, ExtremeSet};
use sv_extremogram::tails::TailModel;

fn main() -> sv_extremogram::Result<()> {
    let alpha = 2.0;
    let tail = TailModel::pareto(alpha);
    for set in ["box:2", "sum:2", "combined"] {
        let set: ExtremeSet = set.parse()?;
        let u = vec![1.5; set.dim()];
        let nu = set.nu_eval(alpha, &u)?;
        let halved: Vec<f64> = u.iter().map(|v| v / 2.0).collect();
        println!(
            "{set:<9} beta={} nu(u)={nu:.4} nu(u/2)/nu(u)={:.4} T(2)={:.4}",
            set.beta(),
            set.nu_eval(alpha, &halved)? / nu,
            set.homogeneity_t(alpha, 2.0)
        );
        for t in [1e2, 1e3, 1e4] {
            let r = mc_tail_ratio(&set, &tail, &u, t, 200_000, 7)?;
            println!(
                "          t={t:>7}: P(uZ in tA)/g(F(t)) = {:.4} ± {:.4} (ess {:.0})",
                r.estimate, r.stderr, r.effective_sample_size
            );
        }
    }
    Ok(())
}
