use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use sigmafloor_core::anticoncentration::levy_concentration;
use sigmafloor_core::bkappa::{oracle_subset, solve_weighted_min};
use sigmafloor_core::ensembles::{sample_matrix, EnsembleSpec, ScalarDistribution};
use sigmafloor_core::linalg::{
    distance_to_span, hs_norm_sq, project_onto_span, projected_submatrix, smallest_singular_value,
};
use sigmafloor_core::montecarlo::{distance_smallball_curve, sigma_tail_curve};
use sigmafloor_core::sphere::{classify, sample_sphere};
use sigmafloor_core::stats::{wilson_interval, Z_95_TWO_SIDED};
use sigmafloor_core::Stream;

fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    sample_matrix(&EnsembleSpec::iid(rows, cols, ScalarDistribution::gaussian(0.0, 1.0)), Stream::from_seed(seed))
        .unwrap()
}

fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    gaussian_matrix(n, n, seed).qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sigma_is_rotation_invariant(n in 1usize..8, extra in 0usize..5, seed in any::<u64>()) {
        let a = gaussian_matrix(n + extra, n, seed);
        let q = random_orthogonal(n + extra, seed ^ 1);
        let s = smallest_singular_value(&a).unwrap();
        let sq = smallest_singular_value(&(q * &a)).unwrap();
        prop_assert!((s - sq).abs() <= 1e-8 * s.max(1e-300) + 1e-12, "{} vs {}", s, sq);
    }

    #[test]
    fn sigma_below_mean_square(n in 1usize..8, extra in 0usize..5, seed in any::<u64>()) {
        let a = gaussian_matrix(n + extra, n, seed);
        let s = smallest_singular_value(&a).unwrap();
        prop_assert!(s * s <= hs_norm_sq(&a) / n as f64 * (1.0 + 1e-12));
    }

    #[test]
    fn pythagoras(rows in 2usize..10, cols in 1usize..5, seed in any::<u64>()) {
        let m = gaussian_matrix(rows, cols.min(rows), seed);
        let mut rng = Stream::from_seed(seed).tagged("x").rng();
        let x = DVector::from_fn(rows, |_, _| rng.sample::<f64, _>(StandardNormal));
        let d = distance_to_span(&x, &m).unwrap();
        let p = project_onto_span(&x, &m).unwrap().norm_squared();
        prop_assert!((d * d + p - x.norm_squared()).abs() <= 1e-10 * x.norm_squared());
    }

    #[test]
    fn complement_rank_for_continuous_entries(n in 2usize..7, extra in 0usize..4, d in 1usize..3, seed in any::<u64>()) {
        let d = d.min(n);
        let rows = n + extra;
        let a = gaussian_matrix(rows, n, seed);
        let cols: Vec<usize> = (0..d).collect();
        let p = projected_submatrix(&a, &cols, None).unwrap();
        prop_assert_eq!(p.complement_rank, rows - (n - d));
        // columns of W are orthogonal to every column outside J
        for j in d..n {
            let dots = p.w.transpose() * a.column(j);
            prop_assert!(dots.amax() <= 1e-9 * a.column(j).norm() * p.w.norm().max(1.0));
        }
    }

    #[test]
    fn solver_matches_subset_oracle(y in prop::collection::vec(0.0f64..50.0, 1..10), kappa in 1.01f64..20.0) {
        let w = kappa.powf(-2.0 * y.len() as f64);
        let fast = solve_weighted_min(&y, w).unwrap().value;
        let slow = oracle_subset(&y, w).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-10 * slow.max(1e-300), "{} vs {}", fast, slow);
    }

    #[test]
    fn compressibility_is_monotone(n in 4usize..30, seed in any::<u64>(), d1 in 0.1f64..0.5, r1 in 0.05f64..0.5) {
        let x = sample_sphere(n, Stream::from_seed(seed));
        let (d1, d2) = (d1, d1 + 0.3);
        let (r1, r2) = (r1, r1 + 0.3);
        if let Ok(a) = classify(&x, d1, r1) {
            if a.is_compressible {
                prop_assert!(classify(&x, d2, r1).unwrap().is_compressible);
                prop_assert!(classify(&x, d1, r2).unwrap().is_compressible);
            }
        }
    }

    #[test]
    fn levy_window_is_attained(xs in prop::collection::vec(-5.0f64..5.0, 2..60), a in 0.01f64..2.0) {
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        let est = levy_concentration(&xs, a).unwrap();
        // the reported count is realized by some window [l, l + 2a] anchored at a sample
        let best = xs.iter().map(|&l| xs.iter().filter(|&&x| x >= l && x <= l + 2.0 * a).count()).max().unwrap();
        prop_assert_eq!(est.max_count, best);
        prop_assert!(est.upper_99 >= est.q_hat);
    }
}

#[test]
fn wilson_coverage_is_nominal() {
    // 10^3 synthetic Bernoulli experiments per p; coverage 95% +- 2%.
    let mut rng = Stream::from_seed(31).rng();
    for p in [0.02, 0.1, 0.3, 0.5] {
        let mut covered = 0;
        for _ in 0..1000 {
            let trials = 400u64;
            let hits = (0..trials).filter(|_| rng.random::<f64>() < p).count() as u64;
            let (lo, hi) = wilson_interval(hits, trials, Z_95_TWO_SIDED);
            if lo <= p && p <= hi {
                covered += 1;
            }
        }
        let rate = covered as f64 / 1000.0;
        assert!((rate - 0.95).abs() <= 0.02, "p = {p}: coverage {rate}");
    }
}

#[test]
fn curves_are_monotone_in_threshold() {
    let spec = EnsembleSpec::iid(7, 5, ScalarDistribution::rademacher());
    let grid: Vec<f64> = (1..=20).map(|k| k as f64 * 0.1).collect();
    let c = sigma_tail_curve(&spec, &grid, 3000, 2).unwrap();
    assert!(c.rows.windows(2).all(|w| w[0].hits <= w[1].hits));
    let g = |r, c| EnsembleSpec::iid(r, c, ScalarDistribution::gaussian(0.0, 1.0));
    let d = distance_smallball_curve(&g(10, 1), &g(10, 8), &grid, 2000, 2).unwrap();
    assert!(d.centered.rows.windows(2).all(|w| w[0].hits <= w[1].hits));
    assert!(d.shifted.rows.windows(2).all(|w| w[0].hits <= w[1].hits));
}

#[test]
fn per_column_kurtosis() {
    let spec = EnsembleSpec::new(
        1000,
        2,
        sigmafloor_core::ensembles::Profile::per_column(vec![
            ScalarDistribution::gaussian(0.0, 1.0),
            ScalarDistribution::rademacher(),
        ]),
    );
    let a = sample_matrix(&spec, Stream::from_seed(12)).unwrap();
    let k = |j: usize| {
        let c = a.column(j);
        let m2 = c.iter().map(|x| x * x).sum::<f64>() / 1000.0;
        c.iter().map(|x| x.powi(4)).sum::<f64>() / 1000.0 / (m2 * m2)
    };
    assert_eq!(k(1), 1.0);
    // gaussian kurtosis 3, SE about sqrt(96 / 1000) = 0.31
    assert!((k(0) - 3.0).abs() < 1.3, "{}", k(0));
}
