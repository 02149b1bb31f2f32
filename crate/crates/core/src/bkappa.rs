//! The regularized Hilbert-Schmidt norm
//!
//! ```text
//! B_kappa(M) = min { sum_i alpha_i^2 ||M_i||^2 : alpha in [0,1]^n, prod alpha_i >= kappa^-n }
//! ```
//!
//! Substituting `a_i = alpha_i^2` and `y_i = ||M_i||^2` turns it into
//! `min { sum a_i y_i : a in [0,1]^n, prod a_i >= w }` with `w = kappa^{-2n}`.
//! At the optimum the coordinates with `a_i < 1` form a set `S` of largest
//! `y_i` sharing a common value `a_i y_i = c = (w prod_S y_i)^{1/|S|}`, and
//! every `y_i` outside `S` is at most `c`. The solver walks the prefixes of
//! `y` sorted descending; everything runs in log space since `w` underflows
//! for a few hundred columns.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for boundary ties `y_(k) = c_k`.
pub const TIE_TOL: f64 = 1e-12;

/// Largest `n` accepted by [`oracle_subset`].
pub const ORACLE_SUBSET_MAX_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BkappaSolution {
    pub value: f64,
    /// Coordinates with weight below one, in decreasing order of `y`.
    #[serde(rename = "S")]
    pub s: Vec<usize>,
    /// Common value of `a_i y_i` on `S`; the largest `y_i` when `S` is empty.
    #[serde(rename = "c")]
    pub threshold: f64,
    pub weights: Vec<f64>,
    /// Product floor (may underflow to 0; see `log_w`).
    pub w: f64,
    pub log_w: f64,
}

impl BkappaSolution {
    /// Checks the optimality structure against the input `y`: weights in
    /// [0, 1], product at least `w`, `a_i y_i = c < y_i` on `S`, `y_i <= c`
    /// off `S`, and `value <= n c`.
    pub fn structure_violation(&self, y: &[f64]) -> Option<String> {
        let n = y.len();
        let tol = |x: f64| TIE_TOL.max(1e-11) * x.abs().max(1e-300);
        let log_prod: f64 = self.weights.iter().map(|a| a.ln()).sum();
        if log_prod < self.log_w + (1.0 - 1e-12f64).ln() - 1e-12 * self.log_w.abs() {
            return Some(format!("product of weights below floor: {log_prod} < {}", self.log_w));
        }
        for (i, (&a, &yi)) in self.weights.iter().zip(y).enumerate() {
            if !(0.0..=1.0).contains(&a) {
                return Some(format!("weight {i} = {a} outside [0, 1]"));
            }
            if self.s.contains(&i) {
                if (a * yi - self.threshold).abs() > tol(self.threshold) * 10.0 {
                    return Some(format!("a_{i} y_{i} = {} != c = {}", a * yi, self.threshold));
                }
                if yi < self.threshold * (1.0 - TIE_TOL) {
                    return Some(format!("y_{i} = {yi} below c = {} inside S", self.threshold));
                }
            } else {
                if a != 1.0 {
                    return Some(format!("weight {i} = {a} outside S"));
                }
                if yi > self.threshold * (1.0 + 1e-10) {
                    return Some(format!("y_{i} = {yi} above c = {} outside S", self.threshold));
                }
            }
        }
        if self.value > n as f64 * self.threshold * (1.0 + 1e-10) {
            return Some(format!("value {} exceeds n c = {}", self.value, n as f64 * self.threshold));
        }
        None
    }
}

fn validate_y(y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::invalid("y must be non-empty"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("y"));
    }
    if y.iter().any(|&v| v < 0.0) {
        return Err(Error::invalid("y must be nonnegative"));
    }
    Ok(())
}

/// Exact `min { sum a_i y_i : a in [0,1]^n, prod a_i >= w }` for `w` in (0, 1].
pub fn solve_weighted_min(y: &[f64], w: f64) -> Result<BkappaSolution> {
    if !(w > 0.0 && w <= 1.0) {
        return Err(Error::invalid(format!("w must lie in (0, 1], got {w}")));
    }
    solve_weighted_min_log(y, w.ln())
}

/// [`solve_weighted_min`] with the floor given as `log_w <= 0`.
pub fn solve_weighted_min_log(y: &[f64], log_w: f64) -> Result<BkappaSolution> {
    validate_y(y)?;
    if !(log_w <= 0.0 && log_w.is_finite()) {
        return Err(Error::invalid(format!("log w must be finite and <= 0, got {log_w}")));
    }
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| y[j].total_cmp(&y[i]).then(i.cmp(&j)));
    let sorted: Vec<f64> = order.iter().map(|&i| y[i]).collect();

    // rest[k] = sum of sorted[k..], accumulated from the small end.
    let mut rest = vec![0.0; n + 1];
    for k in (0..n).rev() {
        rest[k] = rest[k + 1] + sorted[k];
    }

    let mut best_k = 0usize;
    let mut best_value = rest[0];
    let mut best_c = sorted[0];

    let positive = sorted.iter().take_while(|&&v| v > 0.0).count();
    if log_w < 0.0 {
        let mut log_sum = log_w;
        for k in 1..=positive {
            let yk = sorted[k - 1];
            log_sum += yk.ln();
            let c = (log_sum / k as f64).exp();
            // membership in the feasible family: every y in S exceeds c
            if yk < c * (1.0 - TIE_TOL) {
                continue;
            }
            let value = rest[k] + k as f64 * c;
            if value < best_value * (1.0 - TIE_TOL) {
                best_k = k;
                best_value = value;
                best_c = c;
            }
        }
    }

    let s: Vec<usize> = order[..best_k].to_vec();
    let mut weights = vec![1.0; n];
    for &i in &s {
        weights[i] = (best_c / y[i]).min(1.0);
    }
    Ok(BkappaSolution { value: best_value, s, threshold: best_c, weights, w: log_w.exp(), log_w })
}

/// Squared column norms of `M`.
pub fn column_norms_sq(m: &DMatrix<f64>) -> Vec<f64> {
    m.column_iter().map(|c| c.norm_squared()).collect()
}

/// `B_kappa(M)` for `kappa > 1`.
pub fn bkappa(m: &DMatrix<f64>, kappa: f64) -> Result<BkappaSolution> {
    if !(kappa > 1.0 && kappa.is_finite()) {
        return Err(Error::invalid(format!("kappa must be > 1, got {kappa}")));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let y = column_norms_sq(m);
    solve_weighted_min_log(&y, -2.0 * y.len() as f64 * kappa.ln())
}

/// Minimum of the closed-form objective over every subset in the feasible
/// family, by enumeration of all `2^n` subsets. Returns the value and the
/// minimizing subset as a bit mask.
pub fn oracle_subset_with_set(y: &[f64], w: f64) -> Result<(f64, u32)> {
    validate_y(y)?;
    if y.len() > ORACLE_SUBSET_MAX_N {
        return Err(Error::invalid(format!("oracle_subset limited to n <= {ORACLE_SUBSET_MAX_N}")));
    }
    if !(w > 0.0 && w <= 1.0) {
        return Err(Error::invalid(format!("w must lie in (0, 1], got {w}")));
    }
    let n = y.len();
    let total: f64 = y.iter().sum();
    let mut best = (total, 0u32);
    for mask in 1u32..(1u32 << n) {
        let k = mask.count_ones() as f64;
        let mut prod = w;
        let mut outside = 0.0;
        for (i, &yi) in y.iter().enumerate() {
            if mask & (1 << i) != 0 {
                prod *= yi;
            } else {
                outside += yi;
            }
        }
        let c = prod.powf(1.0 / k);
        let member = y.iter().enumerate().all(|(i, &yi)| mask & (1 << i) == 0 || yi > c);
        if !member {
            continue;
        }
        let value = outside + k * c;
        if value < best.0 {
            best = (value, mask);
        }
    }
    Ok(best)
}

/// Enumeration oracle for [`solve_weighted_min`]; `n <= 20`.
pub fn oracle_subset(y: &[f64], w: f64) -> Result<f64> {
    oracle_subset_with_set(y, w).map(|(v, _)| v)
}

/// Minimizes `sum y_i e^{t_i}` over `t_i <= 0`, `sum t_i >= log w` by exact
/// pairwise coordinate descent in the log domain, keeping `sum t_i = log w`.
///
/// Every iterate is feasible, so the result is an upper bound on the true
/// minimum. `iterations` counts full sweeps over all pairs.
pub fn oracle_continuous(y: &[f64], w: f64, iterations: usize) -> Result<f64> {
    validate_y(y)?;
    if y.iter().any(|&v| v <= 0.0) {
        return Err(Error::invalid("oracle_continuous needs strictly positive y"));
    }
    if !(w > 0.0 && w <= 1.0) {
        return Err(Error::invalid(format!("w must lie in (0, 1], got {w}")));
    }
    let n = y.len();
    let log_w = w.ln();
    let objective = |t: &[f64]| t.iter().zip(y).map(|(ti, yi)| yi * ti.exp()).sum::<f64>();
    if n == 1 || log_w == 0.0 {
        let t = vec![log_w / n as f64; n];
        return Ok(objective(&t));
    }
    let ln_y: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mut t = vec![log_w / n as f64; n];
    let mut value = objective(&t);
    let tol = 1e-15;
    let mut last_improvement = f64::INFINITY;
    for _ in 0..iterations {
        for i in 0..n {
            for j in (i + 1)..n {
                let s = t[i] + t[j];
                let ti = (0.5 * (s + ln_y[j] - ln_y[i])).clamp(s, 0.0);
                t[i] = ti;
                t[j] = s - ti;
            }
        }
        let next = objective(&t);
        last_improvement = (value - next) / value.max(f64::MIN_POSITIVE);
        value = next;
        if last_improvement.abs() <= tol {
            return Ok(value);
        }
    }
    Err(Error::NonConvergence { iterations, last_improvement })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    #[test]
    fn symmetric_optimum() {
        let n = 5;
        let kappa: f64 = 3.0;
        let w = kappa.powi(-2 * n as i32);
        let sol = solve_weighted_min(&vec![1.0; n], w).unwrap();
        assert_relative_eq!(sol.value, n as f64 / (kappa * kappa), max_relative = 1e-12);
        assert_eq!(sol.s.len(), n);
    }

    #[test]
    fn unit_floor_is_plain_sum() {
        let sol = solve_weighted_min(&[3.0, 1.0, 2.0], 1.0).unwrap();
        assert_eq!(sol.value, 6.0);
        assert!(sol.s.is_empty());
        assert_eq!(sol.weights, vec![1.0; 3]);
    }

    #[test]
    fn two_coordinates() {
        let sol = solve_weighted_min(&[4.0, 1.0], 0.25).unwrap();
        assert_relative_eq!(sol.value, 2.0, epsilon = 1e-14);
        assert_eq!(sol.s, vec![0]);
        assert_relative_eq!(sol.threshold, 1.0, epsilon = 1e-14);
        assert_relative_eq!(sol.weights[0], 0.25, epsilon = 1e-14);
        assert!(sol.structure_violation(&[4.0, 1.0]).is_none());
    }

    #[test]
    fn zero_coordinate_never_in_s() {
        let sol = solve_weighted_min(&[1.0, 0.0], 0.25).unwrap();
        assert_relative_eq!(sol.value, 0.25, epsilon = 1e-15);
        assert_eq!(sol.s, vec![0]);
        let sol = solve_weighted_min(&[0.0, 0.0], 0.25).unwrap();
        assert_eq!(sol.value, 0.0);
        assert!(sol.s.is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(solve_weighted_min(&[1.0, -1.0], 0.5).is_err());
        assert!(solve_weighted_min(&[1.0], 0.0).is_err());
        assert!(solve_weighted_min(&[1.0], 1.5).is_err());
        assert!(solve_weighted_min(&[f64::NAN], 0.5).is_err());
        assert!(solve_weighted_min(&[], 0.5).is_err());
        assert!(bkappa(&DMatrix::identity(2, 2), 1.0).is_err());
    }

    #[test]
    fn bkappa_examples() {
        let q = DMatrix::<f64>::identity(4, 3);
        let e = std::f64::consts::E;
        assert_relative_eq!(bkappa(&q, e).unwrap().value, 3.0 * e.powi(-2), max_relative = 1e-12);
        let m = dmatrix![2.0, 0.0; 0.0, 1.0];
        assert_relative_eq!(bkappa(&m, 2f64.sqrt()).unwrap().value, 2.0, max_relative = 1e-12);
        let near_one = bkappa(&m, 1.0 + 1e-9).unwrap().value;
        assert_relative_eq!(near_one, 5.0, max_relative = 1e-7);
    }

    #[test]
    fn huge_n_does_not_underflow() {
        let m = DMatrix::<f64>::identity(600, 600);
        let sol = bkappa(&m, 10.0).unwrap();
        assert_eq!(sol.w, 0.0);
        assert_relative_eq!(sol.value, 600.0 / 100.0, max_relative = 1e-10);
    }

    #[test]
    fn oracle_subset_examples() {
        assert_relative_eq!(oracle_subset(&[4.0, 1.0], 0.25).unwrap(), 2.0, epsilon = 1e-14);
        assert_eq!(oracle_subset(&[1.0, 1.0], 1.0).unwrap(), 2.0);
        let (v, mask) = oracle_subset_with_set(&[1.0, 0.0, 0.0], 0.3).unwrap();
        assert_relative_eq!(v, 0.3, epsilon = 1e-15);
        assert_eq!(mask, 0b001);
        assert!(oracle_subset(&[1.0; 21], 0.5).is_err());
    }

    #[test]
    fn oracle_continuous_examples() {
        let e2 = (-2.0f64).exp();
        let v = oracle_continuous(&[1.0, 1.0], e2, 1000).unwrap();
        assert_relative_eq!(v, 2.0 / std::f64::consts::E, max_relative = 1e-6);
        let v = oracle_continuous(&[4.0, 1.0], 0.25, 1000).unwrap();
        assert!((v - 2.0).abs() < 1e-4);
        let v = oracle_continuous(&[5.0, 3.0, 2.0], 0.1, 1000).unwrap();
        assert!((v - oracle_subset(&[5.0, 3.0, 2.0], 0.1).unwrap()).abs() < 1e-4);
        assert!(oracle_continuous(&[1.0, 0.0], 0.5, 10).is_err());
    }

    proptest! {
        #[test]
        fn matches_subset_oracle(y in prop::collection::vec(0.0f64..10.0, 1..10), kappa in 1.01f64..20.0) {
            let n = y.len();
            let w = kappa.powf(-2.0 * n as f64);
            let sol = solve_weighted_min(&y, w).unwrap();
            let (v, _) = oracle_subset_with_set(&y, w).unwrap();
            prop_assert!((sol.value - v).abs() <= 1e-10 * v.max(1e-300), "{} vs {}", sol.value, v);
            prop_assert!(sol.structure_violation(&y).is_none(), "{:?}", sol.structure_violation(&y));
        }

        #[test]
        fn homogeneous_and_bounded(y in prop::collection::vec(0.01f64..10.0, 1..16), t in 0.01f64..100.0, w in 1e-8f64..1.0) {
            let a = solve_weighted_min(&y, w).unwrap();
            let scaled: Vec<f64> = y.iter().map(|v| v * t).collect();
            let b = solve_weighted_min(&scaled, w).unwrap();
            prop_assert!((b.value - t * a.value).abs() <= 1e-10 * b.value);
            prop_assert!(a.value <= y.iter().sum::<f64>() * (1.0 + 1e-12));
        }
    }
}
