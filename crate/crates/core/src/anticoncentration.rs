//! Lévy concentration estimates, moment-to-anti-concentration constants,
//! and empirical small-ball checks for sums and linear forms.

use serde::{Deserialize, Serialize};

use crate::ensembles::{Family, ScalarDistribution};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::Stream;
use crate::stats::{ols, wilson_interval, wilson_upper_99_one_sided, Z_95_TWO_SIDED};

/// Empirical `sup_z P(|X - z| <= a)` on a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationEstimate {
    pub radius: f64,
    pub q_hat: f64,
    pub samples: usize,
    /// Most points in any closed window of width `2a`.
    pub max_count: usize,
    /// One-sided 99% Wilson upper bound on `q_hat`.
    pub upper_99: f64,
}

/// Exact maximum of the empirical measure of `[z - a, z + a]` over `z`.
///
/// Some optimal window has its left edge on a sample point, so a two-pointer
/// scan over left edges finds the maximum in O(M). `sorted` must be
/// ascending.
pub fn levy_concentration(sorted: &[f64], a: f64) -> Result<ConcentrationEstimate> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!("radius must be positive, got {a}")));
    }
    let m = sorted.len();
    if m < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    if sorted.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("samples"));
    }
    if sorted.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("samples must be sorted ascending"));
    }
    let width = 2.0 * a;
    let mut best = 0usize;
    let mut right = 0usize;
    for left in 0..m {
        if right < left {
            right = left;
        }
        while right < m && sorted[right] - sorted[left] <= width {
            right += 1;
        }
        best = best.max(right - left);
    }
    Ok(ConcentrationEstimate {
        radius: a,
        q_hat: best as f64 / m as f64,
        samples: m,
        max_count: best,
        upper_99: wilson_upper_99_one_sided(best as u64, m as u64),
    })
}

/// Constants from the truncation argument: a mean-0 variance-1 variable with
/// `E|X|^{2+beta} <= c_moment` has `sup_z P(|X - z| <= a) <= b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UacConstants {
    /// Truncation level.
    pub m: f64,
    pub a: f64,
    pub b: f64,
    pub beta: f64,
    pub c_moment: f64,
}

/// Multiplicative step of the truncation-level grid.
pub const UAC_GRID_FACTOR: f64 = 1.001;

/// True when every truncation inequality holds at level `m`.
pub fn truncation_level_ok(m: f64, beta: f64, c: f64) -> bool {
    let mb = m.powf(beta);
    c / mb + 2.0 * c / (beta * mb) <= 1.0 / 8.0
        && 2.0 * c / (m * mb) <= 1.0 / 20.0
        && c / (m * m * mb) < 1.0 / (16.0 * m * m)
        && 16.0 * m * m > m + 1.0
        && m > 0.75
}

/// Smallest grid level `m = 0.75 * 1.001^k` satisfying every truncation
/// inequality, and `b = 1 - 1/(4 m^2)`.
pub fn derive_uac_constants(beta: f64, c_moment: f64) -> Result<UacConstants> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    if !(c_moment >= 1.0 && c_moment.is_finite()) {
        return Err(Error::invalid(format!("moment bound must be >= 1, got {c_moment}")));
    }
    let mut m = 0.75;
    loop {
        m *= UAC_GRID_FACTOR;
        if truncation_level_ok(m, beta, c_moment) {
            break;
        }
    }
    Ok(UacConstants { m, a: 0.25, b: 1.0 - 1.0 / (4.0 * m * m), beta, c_moment })
}

/// Radius and bound for a variable with the given variance: `(sd/4, b)`.
/// The mean plays no role.
pub fn rescale_uac(constants: &UacConstants, variance: f64, _mean: f64) -> Result<(f64, f64)> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::invalid("variance must be positive"));
    }
    Ok((variance.sqrt() / 4.0, constants.b))
}

/// Best `p` with `P(|Y| <= t) <= p t` for all `t > 0`, if one exists.
pub fn linear_smallball_constant(dist: &ScalarDistribution) -> Option<f64> {
    let sd = dist.std_dev();
    match dist.family {
        Family::Gaussian => Some(2.0 / (2.0 * std::f64::consts::PI).sqrt() / sd),
        // density 1 / (2 sqrt(3) sd) on an interval of half-width sqrt(3) sd
        Family::UniformInterval => Some(1.0 / (3f64.sqrt() * sd)),
        Family::SymmetricPareto => {
            let alpha = dist.alpha?;
            let h = alpha / (2.0 * (alpha + 1.0));
            let raw_var = 2.0 * h * (1.0 / 3.0 + 1.0 / (alpha - 2.0));
            Some(2.0 * h * raw_var.sqrt() / sd)
        }
        Family::Rademacher if dist.mean == 0.0 => Some(1.0 / sd),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorizationRow {
    pub t: f64,
    pub d: usize,
    pub trials: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    /// `p_hat^{1/d} / (p t)`: the constant `C` this row would need.
    pub implied_constant: f64,
}

/// Empirical `P(sum_{i<=d} Y_i^2 <= t^2 d)` for i.i.d. `Y_i ~ dist`.
pub fn check_tensorization(
    dist: &ScalarDistribution,
    dims: &[usize],
    t_grid: &[f64],
    trials: u64,
    stream: Stream,
) -> Result<Vec<TensorizationRow>> {
    dist.validate()?;
    let p = linear_smallball_constant(dist)
        .ok_or_else(|| Error::invalid("distribution has no global linear small-ball bound"))?;
    if t_grid.iter().any(|t| !(*t > 0.0)) || dims.contains(&0) || trials == 0 {
        return Err(Error::invalid("need positive t, d >= 1 and trials >= 1"));
    }
    let mut rows = Vec::new();
    for &d in dims {
        let s = stream.child(d as u64);
        let mut sums = par::map_trials(trials, |i| {
            let mut rng = s.trial(i).rng();
            (0..d).map(|_| dist.sample(&mut rng).powi(2)).sum::<f64>()
        });
        sums.sort_by(f64::total_cmp);
        for &t in t_grid {
            let thr = t * t * d as f64;
            let hits = sums.partition_point(|&x| x <= thr) as u64;
            let p_hat = hits as f64 / trials as f64;
            let (lo, hi) = wilson_interval(hits, trials, Z_95_TWO_SIDED);
            rows.push(TensorizationRow {
                t,
                d,
                trials,
                hits,
                p_hat,
                wilson_lo: lo,
                wilson_hi: hi,
                implied_constant: p_hat.powf(1.0 / d as f64) / (p * t),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSmallBallRow {
    pub eps: f64,
    pub q_hat: f64,
    pub upper_99: f64,
    /// `q_hat * ||u||_2 / eps`.
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSmallBallReport {
    pub rows: Vec<LinearSmallBallRow>,
    pub u_norm2: f64,
    pub u_norm_inf: f64,
    /// Largest `scaled` over rows: the fitted constant `C'`.
    pub fitted_constant: f64,
    /// Log-log slope of `q_hat` against `eps`, when at least two rows have `q_hat > 0`.
    pub slope: Option<f64>,
}

/// Empirical `sup_z P(|<u, v> - z| <= eps)` for `v` with i.i.d. entries.
pub fn check_linear_smallball(
    u: &[f64],
    dist: &ScalarDistribution,
    eps_grid: &[f64],
    trials: u64,
    stream: Stream,
) -> Result<LinearSmallBallReport> {
    dist.validate()?;
    let u_norm2 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(u_norm2 > 0.0) {
        return Err(Error::invalid("u must be non-zero"));
    }
    if trials < 2 {
        return Err(Error::invalid("need at least two trials"));
    }
    let u_norm_inf = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut xs = par::map_trials(trials, |i| {
        let mut rng = stream.trial(i).rng();
        u.iter().map(|ui| ui * dist.sample(&mut rng)).sum::<f64>()
    });
    xs.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let est = levy_concentration(&xs, eps)?;
        rows.push(LinearSmallBallRow {
            eps,
            q_hat: est.q_hat,
            upper_99: est.upper_99,
            scaled: est.q_hat * u_norm2 / eps,
        });
    }
    let fitted_constant = rows.iter().map(|r| r.scaled).fold(0.0, f64::max);
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        rows.iter().filter(|r| r.q_hat > 0.0).map(|r| (r.eps.ln(), r.q_hat.ln())).unzip();
    let slope = ols(&lx, &ly).map(|f| f.slope);
    Ok(LinearSmallBallReport { rows, u_norm2, u_norm_inf, fitted_constant, slope })
}
