//! Independent numerical oracles for integration and acceptance tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use sv_extremogram::cones::ExtremeSet;
use sv_extremogram::gp_sim::AcfModel;
use sv_extremogram::tails::TailModel;

const XK: [f64; 8] = [
    0.991455371120812639,
    0.949107912342758525,
    0.864864423359769073,
    0.741531185599394440,
    0.586087235467691130,
    0.405845151377397167,
    0.207784955007898468,
    0.0,
];
const WK: [f64; 8] = [
    0.022935322010529225,
    0.063092092629978553,
    0.104790010322250184,
    0.140653259715525919,
    0.169004726639267903,
    0.190350578064785410,
    0.204432940075298892,
    0.209482141084727828,
];
const WG: [f64; 4] = [0.129484966168869693, 0.279705391489276668, 0.381830050505118945, 0.417959183673469388];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XK[i];
        let s = f(c - x) + f(c + x);
        k += WK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Recursive Gauss–Kronrod integration of `f` on `[a, b]`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth > 40 || (b - a).abs() < 1e-14 * (1.0 + a.abs()) {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    rec(f, a, b, tol, 0)
}

/// `∫_a^∞ f` via `z = a + s/(1 − s)`.
pub fn adaptive_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, tol: f64) -> f64 {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let d = 1.0 - s;
        f(a + s / d) / (d * d)
    };
    adaptive(&g, 0.0, 1.0, tol)
}

/// `E[f(V)]` for `V ~ N(0,1)`, split at `breaks`.
pub fn normal_expectation<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: f64) -> f64 {
    let phi = |v: f64| (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|b| b.abs() < 12.0).collect();
    pts.push(-12.0);
    pts.push(12.0);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2).map(|w| adaptive(&|v| f(v) * phi(v), w[0], w[1], tol)).sum()
}

/// Gauss–Hermite rule for the standard normal weight by Golub–Welsch.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::zeros(n, n);
    for i in 1..n {
        let b = (i as f64).sqrt();
        j[(i, i - 1)] = b;
        j[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `ν(u^{−1}·A)` by integrating the density of the limit measure: product
/// of one-dimensional Pareto densities on the flagged coordinates and the
/// axis measures on the unflagged group.
pub fn nu_numeric(set: &ExtremeSet, alpha: f64, u: &[f64]) -> f64 {
    let tol = 1e-12;
    let dens = |z: f64| alpha * z.powf(-alpha - 1.0);
    // measure of {z : u_i z > c} along one axis
    let axis = |ui: f64, c: f64| adaptive_to_infinity(&dens, c / ui, tol);
    match *set {
        ExtremeSet::Box { h } => match h {
            1 => axis(u[0], 1.0),
            2 => adaptive_to_infinity(&|z1: f64| dens(z1) * axis(u[1], 1.0), 1.0 / u[0], tol),
            _ => u.iter().map(|&ui| axis(ui, 1.0)).product(),
        },
        ExtremeSet::Sum { .. } => u.iter().map(|&ui| axis(ui, 1.0)).sum(),
        ExtremeSet::Combined => {
            let inner = |z3: f64| dens(z3) * (axis(u[0], 1.0) + axis(u[1], 1.0));
            adaptive_to_infinity(&inner, 1.0 / u[2], tol)
        }
    }
}

/// Lower Cholesky factor of a small covariance matrix.
pub fn cholesky(cov: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = cov.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][j] = (cov[i][i] - s).sqrt();
            } else {
                l[i][j] = (cov[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// `Ψ(y)` for `σ = exp`, conditioning window `X_1..X_h` (`h ≤ 2`) and a single
/// target `X_m`: Gauss–Hermite over the conditioning coordinates, adaptive
/// quadrature over the conditional law of `X_m`.
pub fn psi_oracle_exp(set: &ExtremeSet, tail: &TailModel, acf: &AcfModel, m: usize, y: f64) -> f64 {
    let h = set.dim();
    assert!(h <= 2);
    let alpha = tail.alpha();
    let idx: Vec<usize> = (0..h).chain([m - 1]).collect();
    let cov: Vec<Vec<f64>> = idx
        .iter()
        .map(|&a| idx.iter().map(|&b| acf.gamma(a.abs_diff(b))).collect())
        .collect();
    let l = cholesky(&cov);
    let (nodes, weights) = gauss_hermite(60);
    let weight = |x: &[f64]| -> f64 {
        match set {
            ExtremeSet::Box { .. } => x.iter().map(|v| (alpha * v).exp()).product(),
            ExtremeSet::Sum { .. } => x.iter().map(|v| (alpha * v).exp()).sum(),
            ExtremeSet::Combined => unreachable!(),
        }
    };
    // X_m = Σ_i l[h][i] w_i + l[h][h] v
    let inner = |mean: f64| -> f64 {
        let s = l[h][h];
        let f = |v: f64| tail.cdf(y / (mean + s * v).exp());
        // kink of F_Z(y/σ) where y/σ hits the lower support point 1 (Pareto)
        let mut breaks = vec![];
        if y > 0.0 {
            breaks.push((y.ln() - mean) / s);
        }
        normal_expectation(&f, &breaks, 1e-13)
    };
    let (mut num, mut den) = (0.0, 0.0);
    let mut w = vec![0.0; h];
    let mut x = vec![0.0; h];
    let total = nodes.len().pow(h as u32);
    for flat in 0..total {
        let mut r = flat;
        let mut wt = 1.0;
        for d in 0..h {
            let i = r % nodes.len();
            r /= nodes.len();
            w[d] = nodes[i];
            wt *= weights[i];
        }
        for d in 0..h {
            x[d] = (0..=d).map(|k| l[d][k] * w[k]).sum();
        }
        let mean: f64 = (0..h).map(|k| l[h][k] * w[k]).sum();
        let g = weight(&x);
        num += wt * g * inner(mean);
        den += wt * g;
    }
    num / den
}
