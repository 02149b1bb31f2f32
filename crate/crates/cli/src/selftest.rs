//! Fast self-checks: oracle equivalences and exact values at reduced size.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use sigmafloor_core::anticoncentration::{derive_uac_constants, levy_concentration};
use sigmafloor_core::bkappa::{bkappa, oracle_continuous, oracle_subset, solve_weighted_min};
use sigmafloor_core::ensembles::{EnsembleSpec, ScalarDistribution};
use sigmafloor_core::linalg::smallest_singular_value;
use sigmafloor_core::montecarlo::{projection_moment_ratio, sigma_tail_curve, Subspace};
use sigmafloor_core::sphere::{classify, sample_sphere};
use sigmafloor_core::stats::{wilson_interval, Z_95_TWO_SIDED};
use sigmafloor_core::{par, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub measured: String,
}

pub const CHECKS: &[&str] = &[
    "bkappa-examples",
    "bkappa-subset-oracle",
    "bkappa-continuous-oracle",
    "classify-brute-force",
    "projection-exact-ratio",
    "uac-anchor",
    "levy-exact",
    "sigma-examples",
    "wilson-reference",
    "determinism",
];

/// Multiplies `x` by `1 + 1e-3` when `name` is the injected fault.
fn corrupt(fault: Option<&str>, name: &str, x: f64) -> f64 {
    if fault == Some(name) {
        x * (1.0 + 1e-3) + 1e-3
    } else {
        x
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn random_y(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2) + rng.sample::<f64, _>(StandardNormal).powi(2)).collect()
}

fn check(name: &'static str, fault: Option<&str>) -> CheckResult {
    let (pass, measured) = match name {
        "bkappa-examples" => {
            let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
            let v = corrupt(fault, name, bkappa(&d, 2f64.sqrt()).map(|s| s.value).unwrap_or(f64::NAN));
            ((v - 2.0).abs() < 1e-12, format!("B(diag(2,1), sqrt 2) = {v}"))
        }
        "bkappa-subset-oracle" => {
            let mut rng = Stream::from_seed(1).rng();
            let mut worst = 0.0f64;
            for _ in 0..200 {
                let n = rng.random_range(1..=10);
                let y = random_y(&mut rng, n);
                let w = 3f64.powf(-2.0 * n as f64);
                let v = corrupt(fault, name, solve_weighted_min(&y, w).map(|s| s.value).unwrap_or(f64::NAN));
                worst = worst.max(rel(v, oracle_subset(&y, w).unwrap_or(f64::NAN)));
            }
            (worst <= 1e-10, format!("200 instances, max rel err {worst:.2e}"))
        }
        "bkappa-continuous-oracle" => {
            let mut rng = Stream::from_seed(2).rng();
            let mut worst = 0.0f64;
            for _ in 0..50 {
                let n = rng.random_range(1..=8);
                let y = random_y(&mut rng, n);
                let w = 2f64.powf(-2.0 * n as f64);
                let v = corrupt(fault, name, solve_weighted_min(&y, w).map(|s| s.value).unwrap_or(f64::NAN));
                worst = worst.max(rel(v, oracle_continuous(&y, w, 100_000).unwrap_or(f64::NAN)));
            }
            (worst <= 1e-4, format!("50 instances, max rel err {worst:.2e}"))
        }
        "classify-brute-force" => {
            let s = Stream::from_seed(3);
            let mut bad = 0;
            for t in 0..300 {
                let n = 4 + (t % 9) as usize;
                let x = sample_sphere(n, s.trial(t));
                let c = classify(&x, 0.34, 0.4).expect("valid parameters");
                let mut best = f64::INFINITY;
                for mask in 0u32..(1 << n) {
                    if mask.count_ones() as usize != c.k {
                        continue;
                    }
                    let sq: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| x[i] * x[i]).sum();
                    let t = sq.sqrt();
                    let d2: f64 =
                        (0..n).map(|i| if mask >> i & 1 == 1 { (x[i] - x[i] / t).powi(2) } else { x[i] * x[i] }).sum();
                    best = best.min(d2.sqrt());
                }
                let got = corrupt(fault, name, c.sparse_distance);
                if (got - best).abs() > 1e-12 || c.is_compressible != (best <= 0.4) {
                    bad += 1;
                }
            }
            (bad == 0, format!("300 vectors, {bad} mismatches"))
        }
        "projection-exact-ratio" => {
            let x = EnsembleSpec::iid(12, 1, ScalarDistribution::rademacher());
            let r = projection_moment_ratio(&x, 3, Subspace::Coordinate, 2.0, 100, 4)
                .map(|r| r.ratio)
                .unwrap_or(f64::NAN);
            let r = corrupt(fault, name, r);
            (r == 0.25, format!("rademacher coordinate ratio {r} vs 3/12"))
        }
        "uac-anchor" => {
            let m = corrupt(fault, name, derive_uac_constants(2.0, 3.0).map(|k| k.m).unwrap_or(f64::NAN));
            (rel(m, 48f64.sqrt()) <= 1e-3, format!("m(2, 3) = {m:.5} vs sqrt 48"))
        }
        "levy-exact" => {
            // dyadic grid: a closed window of width 0.5 holds exactly three points
            let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.25).collect();
            let q = levy_concentration(&xs, 0.25).map(|e| e.q_hat).unwrap_or(f64::NAN);
            let q = corrupt(fault, name, q);
            (q == 0.3, format!("Q = {q} on a 0.25 grid at radius 0.25"))
        }
        "sigma-examples" => {
            let b = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
            let s = corrupt(fault, name, smallest_singular_value(&b).unwrap_or(f64::NAN));
            let want = (5f64.sqrt() - 1.0) / 2.0;
            (rel(s, want) <= 1e-12, format!("sigma_2([[1,1],[0,1]]) = {s}"))
        }
        "wilson-reference" => {
            let (lo, hi) = wilson_interval(8, 10, Z_95_TWO_SIDED);
            let lo = corrupt(fault, name, lo);
            ((lo - 0.49016).abs() < 1e-4 && (hi - 0.94332).abs() < 1e-4, format!("8/10 -> ({lo:.5}, {hi:.5})"))
        }
        "determinism" => {
            let spec = EnsembleSpec::iid(8, 6, ScalarDistribution::gaussian(0.0, 1.0));
            let grid = [0.1, 0.5, 1.0];
            let a = sigma_tail_curve(&spec, &grid, 300, 5).map(|c| c.to_csv());
            let b = par::sequential(|| sigma_tail_curve(&spec, &grid, 300, 5).map(|c| c.to_csv()));
            let c = par::with_workers(4, || sigma_tail_curve(&spec, &grid, 300, 5).map(|c| c.to_csv()));
            let same = a.is_ok() && a == b && a == c && fault != Some(name);
            (same, format!("rerun / serial / 4 workers identical: {same}"))
        }
        _ => (false, "unknown check".to_string()),
    };
    CheckResult { name, pass, measured }
}

/// Runs every check; `fault` names a check whose result is corrupted.
pub fn selftest(fault: Option<&str>) -> Vec<CheckResult> {
    CHECKS.iter().map(|name| check(name, fault)).collect()
}

/// Prints the report and returns the exit code (0 or 1).
pub fn run_selftest(fault: Option<&str>, out: &mut impl std::io::Write) -> i32 {
    let start = Instant::now();
    let results = selftest(fault);
    let mut failed = Vec::new();
    for r in &results {
        let _ = writeln!(out, "{} {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.measured);
        if !r.pass {
            failed.push(r.name);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if failed.is_empty() {
        let _ = writeln!(out, "selftest: {} checks passed in {secs:.1}s", results.len());
        0
    } else {
        let _ = writeln!(out, "selftest: failed checks: {} ({secs:.1}s)", failed.join(", "));
        1
    }
}
