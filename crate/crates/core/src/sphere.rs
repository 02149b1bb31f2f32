//! Compressible / incompressible decomposition of the unit sphere and
//! samplers for unit, incompressible and spread vectors.
//!
//! For a unit `x` the nearest unit vector with at most `k` non-zero entries
//! is `x` restricted to its `k` largest-magnitude coordinates and
//! renormalized, so the distance to the `k`-sparse unit vectors is
//! `sqrt(2 - 2 ||x_top_k||)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_RHO: f64 = 0.2;
pub const DEFAULT_SPREAD_LOW: f64 = 0.5;
pub const DEFAULT_SPREAD_HIGH: f64 = 2.0;

/// Allowed deviation of `||x||_2` from one.
pub const UNIT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereClassification {
    pub is_compressible: bool,
    pub sparse_distance: f64,
    /// Indices with `rho / sqrt(2n) <= |x_j| <= 1 / sqrt(delta n)`; present
    /// for incompressible vectors only.
    pub spread_subset: Option<Vec<usize>>,
    pub delta: f64,
    pub rho: f64,
    /// Sparsity budget `floor(delta n)`.
    pub k: usize,
}

fn check_params(n: usize, delta: f64, rho: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0 && rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("delta and rho must lie in (0, 1), got ({delta}, {rho})")));
    }
    let k = (delta * n as f64).floor() as usize;
    if k < 1 {
        return Err(Error::invalid(format!("floor(delta n) = 0 for delta = {delta}, n = {n}")));
    }
    Ok(k)
}

fn check_unit(x: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("vector"));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::invalid(format!("vector is not unit: norm {norm}")));
    }
    Ok(())
}

/// Distance from unit `x` to the nearest unit vector with at most `k` non-zeros.
///
/// With `t = ||x_top_k||` the distance squared is `||x||^2 + 1 - 2t`,
/// evaluated as `||x_rest||^2 + (1 - t)^2` to avoid cancellation.
pub fn sparse_distance(x: &[f64], k: usize) -> f64 {
    let mut sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    let k = k.min(sq.len());
    if k < sq.len() {
        sq.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    }
    let top = sq[..k].iter().sum::<f64>().sqrt();
    let rest: f64 = sq[k..].iter().sum();
    (rest + (1.0 - top) * (1.0 - top)).sqrt()
}

/// Coordinates in the magnitude band `[rho / sqrt(2n), 1 / sqrt(delta n)]`.
pub fn extract_spread_subset(x: &[f64], delta: f64, rho: f64) -> Result<Vec<usize>> {
    check_unit(x)?;
    let n = x.len() as f64;
    let lo = rho / (2.0 * n).sqrt();
    let hi = 1.0 / (delta * n).sqrt();
    Ok(x.iter().enumerate().filter(|(_, v)| (lo..=hi).contains(&v.abs())).map(|(i, _)| i).collect())
}

/// Exact `(delta, rho)` classification of unit `x`.
pub fn classify(x: &[f64], delta: f64, rho: f64) -> Result<SphereClassification> {
    check_unit(x)?;
    let k = check_params(x.len(), delta, rho)?;
    let dist = sparse_distance(x, k);
    let is_compressible = dist <= rho;
    let spread_subset = if is_compressible { None } else { Some(extract_spread_subset(x, delta, rho)?) };
    Ok(SphereClassification { is_compressible, sparse_distance: dist, spread_subset, delta, rho, k })
}

/// Uniform point on `S^{n-1}` (normalized gaussian).
pub fn sample_sphere(n: usize, stream: Stream) -> Vec<f64> {
    let mut rng = stream.rng();
    sample_sphere_with(n, &mut rng)
}

pub(crate) fn sample_sphere_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Rejection-samples a `(delta, rho)`-incompressible unit vector.
pub fn sample_incompressible(n: usize, delta: f64, rho: f64, stream: Stream, max_attempts: usize) -> Result<Vec<f64>> {
    let k = check_params(n, delta, rho)?;
    let mut rng = stream.rng();
    for _ in 0..max_attempts {
        let x = sample_sphere_with(n, &mut rng);
        if sparse_distance(&x, k) > rho {
            return Ok(x);
        }
    }
    Err(Error::invalid(format!("no incompressible vector in {max_attempts} attempts")))
}

/// Unit `v` in `R^d` with `|v_i| sqrt(d)` in `[low, high]` for every `i`.
///
/// Magnitudes are drawn uniformly in the band with random signs and then
/// normalized; a draw that leaves the band is rejected. After 64 rejections
/// the magnitudes are drawn from `[1, min(1/low, high)]`, whose normalized
/// ratios always stay inside the band.
pub fn sample_spread(d: usize, low: f64, high: f64, stream: Stream) -> Result<Vec<f64>> {
    let mut rng = stream.rng();
    sample_spread_with(d, low, high, &mut rng)
}

pub(crate) fn sample_spread_with<R: Rng + ?Sized>(d: usize, low: f64, high: f64, rng: &mut R) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if !(low > 0.0 && low <= 1.0 && high >= 1.0 && high.is_finite()) {
        return Err(Error::invalid(format!("infeasible spread band [{low}, {high}]")));
    }
    let in_band = |v: &[f64]| {
        let s = (d as f64).sqrt();
        v.iter().all(|x| {
            let m = x.abs() * s;
            m >= low * (1.0 - 1e-12) && m <= high * (1.0 + 1e-12)
        })
    };
    let draw = |rng: &mut R, lo: f64, hi: f64| -> Vec<f64> {
        let raw: Vec<f64> = (0..d)
            .map(|_| {
                let m = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                if rng.random::<bool>() {
                    m
                } else {
                    -m
                }
            })
            .collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        raw.into_iter().map(|x| x / norm).collect()
    };
    for _ in 0..64 {
        let v = draw(rng, low, high);
        if in_band(&v) {
            return Ok(v);
        }
    }
    let v = draw(rng, 1.0, (1.0 / low).min(high));
    debug_assert!(in_band(&v));
    Ok(v)
}
