//! Test-side numerical helpers, deliberately independent of the library's
//! quadrature and special-function code paths.
#![allow(dead_code)]

/// Composite Simpson rule.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Closed-form Beta(s1, 2) cdf: x^s1 (s1 + 1 - s1 x).
pub fn beta_s1_2_cdf(s1: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x.powf(s1) * (s1 + 1.0 - s1 * x)
    }
}

/// Closed-form Beta(2, 3) cdf: x^2 (6 - 8x + 3x^2).
pub fn beta_2_3_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * (6.0 - 8.0 * x + 3.0 * x * x)
    }
}

/// Closed-form Beta(2, 2) cdf: x^2 (3 - 2x).
pub fn beta_2_2_cdf(x: f64) -> f64 {
    beta_s1_2_cdf(2.0, x)
}

/// Kolmogorov-Smirnov statistic of draws against a reference cdf.
pub fn ks_statistic<F: Fn(f64) -> f64>(draws: &mut [f64], cdf: F) -> f64 {
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in draws.iter().enumerate() {
        let fx = cdf(x);
        d = d.max((fx - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - fx).abs());
    }
    d
}
