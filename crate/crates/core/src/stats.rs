//! Small statistics helpers: Wilson score intervals, least squares on
//! log-log data, sample moments.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z_95_TWO_SIDED: f64 = 1.959_963_984_540_054;
/// One-sided 99% normal quantile.
pub const Z_99_ONE_SIDED: f64 = 2.326_347_874_040_841;

/// Wilson score interval for `hits` successes out of `trials` at quantile `z`.
///
/// Returns `(lo, hi)`; `(0, 1)` when there are no trials.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if hits == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if hits == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Upper end of the two-sided 95% Wilson interval.
pub fn wilson_upper_95(hits: u64, trials: u64) -> f64 {
    wilson_interval(hits, trials, Z_95_TWO_SIDED).1
}

/// One-sided 99% Wilson upper bound.
pub fn wilson_upper_99_one_sided(hits: u64, trials: u64) -> f64 {
    wilson_interval(hits, trials, Z_99_ONE_SIDED).1
}

/// Ordinary least-squares line `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
}

/// OLS fit; `None` with fewer than two points or zero spread in `x`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    Some(LineFit { slope, intercept, residual_rms: (ss / nf).sqrt() })
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Empirical quantile by linear interpolation on a sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wilson_textbook_value() {
        // 8 of 10 at 95%: (0.4902, 0.9433).
        let (lo, hi) = wilson_interval(8, 10, Z_95_TWO_SIDED);
        assert_relative_eq!(lo, 0.490_16, epsilon = 1e-4);
        assert_relative_eq!(hi, 0.943_32, epsilon = 1e-4);
    }

    #[test]
    fn wilson_edges() {
        let (lo, hi) = wilson_interval(0, 100, Z_95_TWO_SIDED);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(100, 100, Z_95_TWO_SIDED);
        assert_eq!(hi, 1.0);
        assert!(lo > 0.95);
    }

    #[test]
    fn ols_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let fit = ols(&xs, &ys).unwrap();
        assert_relative_eq!(fit.slope, 3.0, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, -1.0, epsilon = 1e-12);
        assert!(fit.residual_rms < 1e-12);
        assert!(ols(&[1.0, 1.0], &[0.0, 2.0]).is_none());
    }

    #[test]
    fn quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&s, 0.5), 3.0);
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 0.125), 1.5);
    }
}
