//! Small statistical helpers shared by the estimators and the experiment
//! harness.

use statrs::function::erf::erfc;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample autocovariance at `lag` (biased, divides by n).
pub fn autocovariance(xs: &[f64], lag: usize) -> f64 {
    let n = xs.len();
    let m = mean(xs);
    (0..n - lag).map(|i| (xs[i] - m) * (xs[i + lag] - m)).sum::<f64>() / n as f64
}

pub fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
    autocovariance(xs, lag) / autocovariance(xs, 0)
}

/// Least squares fit `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    LinearFit { slope, intercept: my - slope * mx }
}

/// Pool-adjacent-violators projection onto nondecreasing sequences.
pub fn isotonic_nondecreasing(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (v2, n2) = blocks[blocks.len() - 1];
            let (v1, n1) = blocks[blocks.len() - 2];
            if v1 <= v2 {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().unwrap();
            *last = ((v1 * n1 as f64 + v2 * n2 as f64) / (n1 + n2) as f64, n1 + n2);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(v, n)| std::iter::repeat_n(v, n))
        .collect()
}

/// Anderson–Darling statistic of `sample` against a fully specified
/// continuous CDF.
pub fn anderson_darling_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let n = sample.len();
    let mut u: Vec<f64> = sample.iter().map(|&x| cdf(x).clamp(1e-300, 1.0 - 1e-16)).collect();
    u.sort_by(f64::total_cmp);
    let nf = n as f64;
    let s: f64 = (0..n)
        .map(|i| (2.0 * i as f64 + 1.0) * (u[i].ln() + (1.0 - u[n - 1 - i]).ln()))
        .sum();
    -nf - s / nf
}

fn adinf(z: f64) -> f64 {
    if z < 2.0 {
        (-1.233_714_1 / z).exp() / z.sqrt()
            * (2.00012
                + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z)
                    * z)
    } else {
        (-(1.0776
            - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z)
            .exp())
        .exp()
    }
}

fn ad_errfix(n: f64, x: f64) -> f64 {
    if x > 0.8 {
        return (-130.2137
            + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x)
            / n;
    }
    let c = 0.01265 + 0.1757 / n;
    if x < c {
        let t = x / c;
        let t = t.sqrt() * (1.0 - t) * (49.0 * t - 102.0);
        return t * (0.0037 / (n * n) + 0.00078 / n + 0.00006) / n;
    }
    let x = (x - c) / (0.8 - c);
    let x = -0.00022633 + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * x) * x) * x) * x) * x;
    x * (0.04213 + 0.01365 / n) / n
}

/// Upper-tail p-value of the Anderson–Darling test for a fully specified
/// null (Marsaglia & Marsaglia approximation).
pub fn anderson_darling_pvalue(statistic: f64, n: usize) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    let x = adinf(statistic);
    (1.0 - (x + ad_errfix(n as f64, x))).clamp(0.0, 1.0)
}

/// p-value of the AD test that `sample` is standard normal.
pub fn anderson_darling_normal(sample: &[f64]) -> (f64, f64) {
    let a2 = anderson_darling_statistic(sample, normal_cdf);
    (a2, anderson_darling_pvalue(a2, sample.len()))
}

/// Composite normality test with mean and variance estimated from the
/// sample (Stephens' modified statistic, D'Agostino p-value formulas).
/// Returns the modified statistic and its p-value.
pub fn anderson_darling_composite_normal(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let m = mean(sample);
    let sd = variance(sample).sqrt();
    if !(sd > 0.0) {
        return (f64::INFINITY, 0.0);
    }
    let a2 = anderson_darling_statistic(sample, |x| normal_cdf((x - m) / sd));
    let a = a2 * (1.0 + 0.75 / n + 2.25 / (n * n));
    let p = if a >= 0.6 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else if a >= 0.34 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a >= 0.2 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    };
    (a, p.clamp(0.0, 1.0))
}

/// Asymptotic two-sample Kolmogorov–Smirnov critical value.
pub fn ks_critical_value(level: f64, n1: f64, n2: f64) -> f64 {
    let c = (-0.5 * (level / 2.0).ln()).sqrt();
    c * ((n1 + n2) / (n1 * n2)).sqrt()
}

/// Empirical CDF of `sorted` (ascending) at `y`: fraction of values `≤ y`.
pub fn ecdf_sorted(sorted: &[f64], y: f64) -> f64 {
    sorted.partition_point(|&v| v <= y) as f64 / sorted.len() as f64
}
