//! Second-order behaviour of the tail of a weighted sum of two Pareto
//! variables against its envelope.

use sv_extremogram::tails::{convolution_tail_check, log_grid, sum_tail_second_order, TailModel};

fn main() -> sv_extremogram::Result<()> {
    let grid = log_grid(10.0, 1e5, 9);
    for alpha in [1.5, 2.0, 3.0] {
        let model = TailModel::pareto(alpha);
        let r = convolution_tail_check(&model, 1.0, 2.0, &grid, 0.1)?;
        println!("alpha={alpha}: C_hat={:.3} bounded={}", r.c_hat, r.bounded);
        for row in &r.rows {
            println!(
                "  t={:>9.1} excess={:.3e} envelope={:.3e} ratio={:.3}  t*excess/F(t)={:.4} (E[Z]={:.4})",
                row.t,
                row.lhs,
                row.envelope,
                row.ratio,
                sum_tail_second_order(&model, row.t)?,
                alpha / (alpha - 1.0)
            );
        }
    }
    Ok(())
}
