//! Small statistics helpers: moments, the Kolmogorov-Smirnov test used by
//! the time-rescaling check, and log-log slope fits for rate experiments.

/// Sample mean and its standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// KS statistic of `samples` against the unit-rate exponential law.
pub fn ks_statistic_exp(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = 1.0 - (-x).exp();
        let hi = (i as f64 + 1.0) / n - cdf;
        let lo = cdf - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

/// Asymptotic Kolmogorov p-value `P(√n·D_n > z)`.
///
/// Uses the Jacobi-theta form `1 − (√(2π)/z) Σ exp(−(2k−1)²π²/(8z²))` for
/// small `z` and the alternating series `2 Σ (−1)^{k−1} exp(−2k²z²)`
/// otherwise; both are standard expansions of the Kolmogorov distribution.
pub fn kolmogorov_pvalue(d: f64, n: usize) -> f64 {
    let z = d * (n as f64).sqrt();
    if z <= 0.0 {
        return 1.0;
    }
    if z < 1.18 {
        let mut cdf = 0.0;
        for k in 1..=5u32 {
            let odd = (2 * k - 1) as f64;
            cdf += (-odd * odd * std::f64::consts::PI.powi(2) / (8.0 * z * z)).exp();
        }
        cdf *= (std::f64::consts::TAU).sqrt() / z;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut p = 0.0;
        let mut sign = 1.0;
        for k in 1..=100u32 {
            let term = (-2.0 * (k as f64 * z).powi(2)).exp();
            p += sign * term;
            sign = -sign;
            if term < 1e-16 {
                break;
            }
        }
        (2.0 * p).clamp(0.0, 1.0)
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
