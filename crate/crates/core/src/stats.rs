//! Small statistics kit: least squares, KS two-sample test, means.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::summation::NeumaierSum;

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub slope_se: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::domain("x and y differ in length"));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::FitDegenerate(format!("{n} points")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 {
        return Err(Error::FitDegenerate("x has no spread".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = (syy - slope * sxy).max(0.0);
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_se = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { f64::NAN };
    Ok(LinearFit { slope, intercept, slope_se, r2, points: n })
}

/// Fit of `ln y` against `ln x`; nonpositive points are dropped.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        x.iter().zip(y).filter(|(&a, &b)| a > 0.0 && b > 0.0).map(|(a, b)| (a.ln(), b.ln())).unzip();
    linear_fit(&lx, &ly)
}

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().copied().collect::<NeumaierSum>().value() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).collect::<NeumaierSum>().value();
    (mean, (ss / (n - 1.0) / n).sqrt())
}

/// Half the L1 distance between two pmfs over the same index set.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..len).map(|i| (at(p, i) - at(q, i)).abs()).collect::<NeumaierSum>().value()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("KS test needs two nonempty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    Ok(KsResult { statistic: d, p_value: kolmogorov_q(lambda) })
}

/// `Q_KS(x) = 2 Σ (-1)^{k-1} exp(-2 k² x²)`.
fn kolmogorov_q(x: f64) -> f64 {
    if x < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = f64::from(k);
        let term = sign * (-2.0 * kf * kf * x * x).exp();
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
