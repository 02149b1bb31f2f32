//! Monte Carlo experiments: tail curves of `sigma_n`, exponent fits,
//! `B_kappa` deviation tables, projection moment ratios, distance small-ball
//! curves and the spread-infimum proxy.
//!
//! Every experiment derives trial `i` from `Stream::from_seed(seed)`, tagged
//! with the operation name, then `.trial(i)`. One draw per trial serves all
//! thresholds of a curve, so curves are exactly monotone.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::bkappa;
use crate::ensembles::{analytic_moment, sample_matrix_unchecked, EnsembleSpec, Family, ScalarDistribution};
use crate::error::{Error, Result};
use crate::linalg;
use crate::par;
use crate::rng::Stream;
use crate::sphere;
use crate::stats::{ols, quantile_sorted, wilson_interval, Z_95_TWO_SIDED};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fit window on `p_hat`: `[FIT_MIN_HITS / trials, FIT_MAX_P]`.
pub const FIT_MIN_HITS: f64 = 10.0;
pub const FIT_MAX_P: f64 = 0.5;

pub const CSV_HEADER: &str = "epsilon,trials,hits,p_hat,wilson_lo,wilson_hi";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub spec_digest: String,
    pub seed: u64,
    #[serde(rename = "N")]
    pub rows: usize,
    #[serde(rename = "n")]
    pub cols: usize,
    pub operation: String,
    pub version: String,
}

impl Metadata {
    pub fn new(spec: &EnsembleSpec, seed: u64, operation: &str) -> Self {
        Metadata {
            spec_digest: spec.digest(),
            seed,
            rows: spec.rows,
            cols: spec.cols,
            operation: operation.to_string(),
            version: VERSION.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata serializes")
    }
}

/// One threshold of a curve. `epsilon` holds the grid variable of the
/// experiment (`epsilon`, `kappa` or `t`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub epsilon: f64,
    pub trials: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

impl TailRow {
    pub fn new(epsilon: f64, hits: u64, trials: u64) -> Self {
        let (wilson_lo, wilson_hi) = wilson_interval(hits, trials, Z_95_TWO_SIDED);
        TailRow { epsilon, trials, hits, p_hat: hits as f64 / trials as f64, wilson_lo, wilson_hi }
    }

    fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.epsilon, self.trials, self.hits, self.p_hat, self.wilson_lo, self.wilson_hi
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub rows: Vec<TailRow>,
    pub metadata: Metadata,
}

impl TailCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_fields());
            s.push('\n');
        }
        s
    }
}

fn check_grid(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(format!("{what} grid is empty")));
    }
    if grid.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::invalid(format!("{what} grid must be finite and non-negative")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!("{what} grid must be strictly increasing")));
    }
    Ok(())
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        Err(Error::invalid("trials must be at least 1"))
    } else {
        Ok(())
    }
}

/// Rows `(thr_scale * g, #{stat <= thr_scale * g})` for each `g` in `grid`.
fn count_rows(mut stats: Vec<f64>, grid: &[f64], thr_scale: f64) -> Vec<TailRow> {
    let trials = stats.len() as u64;
    stats.sort_by(f64::total_cmp);
    grid.iter()
        .map(|&g| {
            let thr = g * thr_scale;
            TailRow::new(g, stats.partition_point(|&s| s <= thr) as u64, trials)
        })
        .collect()
}

/// `sqrt(N + 1) - sqrt(n)`.
pub fn sigma_scale(rows: usize, cols: usize) -> f64 {
    ((rows + 1) as f64).sqrt() - (cols as f64).sqrt()
}

/// `sigma_n(A)` for every trial.
pub fn sigma_samples(spec: &EnsembleSpec, trials: u64, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    check_trials(trials)?;
    let s = Stream::from_seed(seed).tagged("sigma_tail_curve");
    Ok(par::map_trials(trials, |i| {
        linalg::smallest_singular_value_unchecked(&sample_matrix_unchecked(spec, s.trial(i)))
    }))
}

/// Empirical `P(sigma_n(A) <= eps (sqrt(N+1) - sqrt(n)))` on `eps_grid`.
pub fn sigma_tail_curve(spec: &EnsembleSpec, eps_grid: &[f64], trials: u64, seed: u64) -> Result<TailCurve> {
    check_grid(eps_grid, "epsilon")?;
    let sig = sigma_samples(spec, trials, seed)?;
    if sig.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("singular value"));
    }
    Ok(TailCurve {
        rows: count_rows(sig, eps_grid, sigma_scale(spec.rows, spec.cols)),
        metadata: Metadata::new(spec, seed, "sigma_tail_curve"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Grid values of the rows inside the fit window.
    pub rows_used: Vec<f64>,
    pub residual_rms: f64,
}

/// OLS of `log p_hat` on `log epsilon` over rows with
/// `p_hat` in `[10 / trials, 0.5]`.
pub fn fit_exponent(rows: &[TailRow]) -> Result<ExponentFit> {
    let used: Vec<&TailRow> = rows
        .iter()
        .filter(|r| {
            r.epsilon > 0.0 && r.p_hat > 0.0 && r.p_hat >= FIT_MIN_HITS / r.trials as f64 && r.p_hat <= FIT_MAX_P
        })
        .collect();
    if used.len() < 3 {
        return Err(Error::InsufficientData { got: used.len(), need: 3 });
    }
    let xs: Vec<f64> = used.iter().map(|r| r.epsilon.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|r| r.p_hat.ln()).collect();
    let fit = ols(&xs, &ys).ok_or(Error::InsufficientData { got: used.len(), need: 3 })?;
    Ok(ExponentFit {
        slope: fit.slope,
        intercept: fit.intercept,
        rows_used: used.iter().map(|r| r.epsilon).collect(),
        residual_rms: fit.residual_rms,
    })
}

/// `E ||X||^p` for a vector of independent entries, when available in
/// closed form: all-gaussian mean-zero columns of equal variance (any `p`),
/// or any symmetric families with `p = 4` or `p = 2`.
pub fn column_norm_moment(entries: &[ScalarDistribution], p: f64) -> Result<f64> {
    let m2: Vec<f64> = entries.iter().map(|d| d.second_moment()).collect();
    if p == 2.0 {
        return Ok(m2.iter().sum());
    }
    if p == 4.0 {
        // E (sum x_i^2)^2 = sum E x_i^4 + sum_{i != k} E x_i^2 E x_k^2
        let mut fourth = 0.0;
        for d in entries {
            let c4 = analytic_moment(d, 4.0)
                .finite()
                .ok_or_else(|| Error::MomentUnavailable(format!("{:?} has no fourth moment", d.family)))?;
            // Symmetric families: odd central moments vanish.
            let mu = d.mean;
            fourth += mu.powi(4) + 6.0 * mu * mu * d.variance + c4;
        }
        let s: f64 = m2.iter().sum();
        let sq: f64 = m2.iter().map(|x| x * x).sum();
        return Ok(fourth + s * s - sq);
    }
    let first = entries.first().ok_or_else(|| Error::invalid("empty column"))?;
    if entries.iter().all(|d| d.family == Family::Gaussian && d.mean == 0.0 && d.variance == first.variance) {
        // sigma^p E chi_m^p = sigma^p 2^{p/2} Gamma((m+p)/2) / Gamma(m/2)
        let m = entries.len() as f64;
        let lg = 0.5 * p * std::f64::consts::LN_2 + ln_gamma(0.5 * (m + p)) - ln_gamma(0.5 * m);
        return Ok(first.variance.powf(0.5 * p) * lg.exp());
    }
    Err(Error::MomentUnavailable(format!("E||X||^{p} has no closed form for this column")))
}

/// `2^d e^{(1 + beta/2) d / e} kappa^{-(2 + beta) d}`.
pub fn bkappa_deviation_bound(d: usize, beta: f64, kappa: f64) -> f64 {
    let d = d as f64;
    (d * std::f64::consts::LN_2 + (1.0 + 0.5 * beta) * d / std::f64::consts::E - (2.0 + beta) * d * kappa.ln())
        .exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub row: TailRow,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationTable {
    pub rows: Vec<DeviationRow>,
    /// `E ||W||_HS^2` from the spec.
    pub expected_hs: f64,
    pub beta: f64,
    pub c_factor: f64,
    pub metadata: Metadata,
}

impl DeviationTable {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{CSV_HEADER},bound\n");
        for r in &self.rows {
            s.push_str(&format!("{},{}\n", r.row.csv_fields(), r.bound));
        }
        s
    }
}

/// Empirical `P(B_kappa(W) >= C E ||W||_HS^2)` for `W` drawn from `spec`
/// (`d = spec.cols` columns), next to the explicit bound. Every column must
/// satisfy `E ||W e_j||^{2+beta} <= (C E ||W e_j||^2)^{1 + beta/2}` in
/// closed form.
pub fn bkappa_deviation_curve(
    spec: &EnsembleSpec,
    kappa_grid: &[f64],
    trials: u64,
    c_factor: f64,
    beta: f64,
    seed: u64,
) -> Result<DeviationTable> {
    spec.validate()?;
    check_trials(trials)?;
    check_grid(kappa_grid, "kappa")?;
    if kappa_grid.iter().any(|k| *k <= 1.0) {
        return Err(Error::invalid("kappa must exceed 1"));
    }
    if !(c_factor > 0.0 && beta > 0.0 && c_factor.is_finite() && beta.is_finite()) {
        return Err(Error::invalid("C_factor and beta must be positive"));
    }
    for j in 0..spec.cols {
        let col: Vec<ScalarDistribution> = (0..spec.rows).map(|i| *spec.dist(i, j)).collect();
        let m2 = column_norm_moment(&col, 2.0)?;
        let mp = column_norm_moment(&col, 2.0 + beta)?;
        let rhs = (c_factor * m2).powf(1.0 + 0.5 * beta);
        if mp > rhs {
            return Err(Error::invalid(format!(
                "column {j} fails the moment hypothesis: E||W_j||^(2+beta) = {mp} > {rhs}"
            )));
        }
    }
    let expected_hs = spec.expected_hs_norm_sq();
    let level = c_factor * expected_hs;
    let s = Stream::from_seed(seed).tagged("bkappa_deviation_curve");
    let hits_per_trial = par::map_trials(trials, |i| {
        let w = sample_matrix_unchecked(spec, s.trial(i));
        let y = bkappa::column_norms_sq(&w);
        kappa_grid
            .iter()
            .map(|&k| {
                let log_w = -2.0 * y.len() as f64 * k.ln();
                bkappa::solve_weighted_min_log(&y, log_w).map(|sol| sol.value >= level)
            })
            .collect::<Result<Vec<bool>>>()
    });
    let mut hits = vec![0u64; kappa_grid.len()];
    for t in hits_per_trial {
        for (h, hit) in hits.iter_mut().zip(t?) {
            *h += hit as u64;
        }
    }
    let rows = kappa_grid
        .iter()
        .zip(hits)
        .map(|(&k, h)| DeviationRow {
            row: TailRow::new(k, h, trials),
            bound: bkappa_deviation_bound(spec.cols, beta, k),
        })
        .collect();
    Ok(DeviationTable {
        rows,
        expected_hs,
        beta,
        c_factor,
        metadata: Metadata::new(spec, seed, "bkappa_deviation_curve"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subspace {
    /// `H^perp = span{e_1, ..., e_d}`.
    Coordinate,
    /// `H^perp` spanned by `d` independent gaussian vectors, fresh per trial.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRatio {
    pub p: f64,
    pub d: usize,
    pub n: usize,
    pub trials: u64,
    pub ratio: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `d / n` for `p = 2`; the gaussian value of the normalized moment
    /// otherwise (`None` for non-gaussian `X`).
    pub reference: Option<f64>,
}

/// `E chi_d^{2q} / d^q`: normalized moment of a standard gaussian in `R^d`.
pub fn gaussian_projection_reference(d: usize, q: f64) -> f64 {
    let h = 0.5 * d as f64;
    (q * std::f64::consts::LN_2 + ln_gamma(h + q) - ln_gamma(h) - q * (d as f64).ln()).exp()
}

/// `||P_{H^perp} X||^2` samples. `x_spec` is an `n x 1` column.
fn projection_norms_sq(x_spec: &EnsembleSpec, d: usize, subspace: Subspace, trials: u64, seed: u64) -> Vec<f64> {
    let n = x_spec.rows;
    let s = Stream::from_seed(seed).tagged("projection_moment_ratio");
    par::map_trials(trials, |i| {
        let t = s.trial(i);
        let x = sample_matrix_unchecked(x_spec, t.tagged("x"));
        match subspace {
            Subspace::Coordinate => x.iter().take(d).map(|v| v * v).sum(),
            Subspace::Random => {
                if d == n {
                    return x.norm_squared();
                }
                let mut rng = t.tagged("h").rng();
                let g = DMatrix::<f64>::from_fn(n, d, |_, _| rng.sample(StandardNormal));
                let q = g.qr().q();
                (q.transpose() * &x).norm_squared()
            }
        }
    })
}

/// Moment ratio of `P_{H^perp} X` with `codim H = d`: for `p = 2`,
/// `E ||P X||^2 / E ||X||^2` (reference `d / n`); for `p > 2`,
/// `E ||P X||^p / (E ||P X||^2)^{p/2}`.
pub fn projection_moment_ratio(
    x_spec: &EnsembleSpec,
    d: usize,
    subspace: Subspace,
    p: f64,
    trials: u64,
    seed: u64,
) -> Result<ProjectionRatio> {
    x_spec.validate()?;
    if x_spec.cols != 1 {
        return Err(Error::invalid("X must be given as an n x 1 spec"));
    }
    let n = x_spec.rows;
    if d == 0 || d > n {
        return Err(Error::invalid(format!("codimension d = {d} must lie in 1..={n}")));
    }
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::invalid("p must be 2 or 2 + beta"));
    }
    if trials < 2 {
        return Err(Error::invalid("need at least two trials"));
    }
    let iso = x_spec.is_isotropic();
    if p == 2.0 && !iso {
        return Err(Error::invalid("the p = 2 equality needs an isotropic X"));
    }
    let sq = projection_norms_sq(x_spec, d, subspace, trials, seed);
    let nt = trials as f64;
    let (ratio, se) = if p == 2.0 {
        let denom = x_spec.expected_column_norm_sq(0);
        let (m, s) = crate::stats::mean_and_se(&sq);
        (m / denom, s / denom)
    } else {
        // Delta method on (mean of ||PX||^p, mean of ||PX||^2).
        let q = 0.5 * p;
        let up: Vec<f64> = sq.iter().map(|v| v.powf(q)).collect();
        let m_p = up.iter().sum::<f64>() / nt;
        let m_2 = sq.iter().sum::<f64>() / nt;
        let (mut vpp, mut v22, mut vp2) = (0.0, 0.0, 0.0);
        for (a, b) in up.iter().zip(&sq) {
            vpp += (a - m_p) * (a - m_p);
            v22 += (b - m_2) * (b - m_2);
            vp2 += (a - m_p) * (b - m_2);
        }
        let k = nt - 1.0;
        let (vpp, v22, vp2) = (vpp / k, v22 / k, vp2 / k);
        let r = m_p / m_2.powf(q);
        let ga = 1.0 / m_2.powf(q);
        let gb = -q * m_p / m_2.powf(q + 1.0);
        let var = ga * ga * vpp + gb * gb * v22 + 2.0 * ga * gb * vp2;
        (r, (var.max(0.0) / nt).sqrt())
    };
    let gaussian = x_spec
        .distinct_entries()
        .iter()
        .all(|e| e.family == Family::Gaussian && e.mean == 0.0);
    let reference = if p == 2.0 {
        Some(d as f64 / n as f64)
    } else if gaussian && iso {
        Some(gaussian_projection_reference(d, 0.5 * p))
    } else {
        None
    };
    Ok(ProjectionRatio {
        p,
        d,
        n,
        trials,
        ratio,
        se,
        ci_lo: ratio - Z_95_TWO_SIDED * se,
        ci_hi: ratio + Z_95_TWO_SIDED * se,
        reference,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceCurves {
    /// `v = 0`.
    pub centered: TailCurve,
    /// `v` drawn once, with i.i.d. `N(0, d / N)` entries.
    pub shifted: TailCurve,
    pub v: Vec<f64>,
    pub d: usize,
}

/// Empirical `P(||P_{H^perp} X - v|| <= t sqrt(d))` with `H = span(M)`,
/// `X ~ x_spec` (`N x 1`) and `M ~ m_spec` (`N x (N - d)`), for `v = 0` and
/// one random fixed `v`.
pub fn distance_smallball_curve(
    x_spec: &EnsembleSpec,
    m_spec: &EnsembleSpec,
    t_grid: &[f64],
    trials: u64,
    seed: u64,
) -> Result<DistanceCurves> {
    x_spec.validate()?;
    m_spec.validate()?;
    check_trials(trials)?;
    check_grid(t_grid, "t")?;
    let nr = x_spec.rows;
    if x_spec.cols != 1 || m_spec.rows != nr || m_spec.cols >= nr {
        return Err(Error::invalid("X must be N x 1 and M must be N x (N - d) with d >= 1"));
    }
    let d = nr - m_spec.cols;
    if 2 * d > nr {
        return Err(Error::invalid(format!("d = {d} exceeds N / 2")));
    }
    let s = Stream::from_seed(seed).tagged("distance_smallball_curve");
    let mut vrng = s.tagged("v").rng();
    let sd = (d as f64 / nr as f64).sqrt();
    let v: Vec<f64> = (0..nr).map(|_| sd * vrng.sample::<f64, _>(StandardNormal)).collect();
    let vv = DVector::from_column_slice(&v);
    let pairs = par::map_trials(trials, |i| {
        let t = s.trial(i);
        let x = sample_matrix_unchecked(x_spec, t.tagged("x"));
        let m = sample_matrix_unchecked(m_spec, t.tagged("m"));
        let basis = linalg::span_basis(&m);
        let xc = x.column(0);
        let r = xc - &basis * (basis.transpose() * xc);
        (r.norm(), (&r - &vv).norm())
    });
    let (c0, c1): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let scale = (d as f64).sqrt();
    let mut meta = Metadata::new(x_spec, seed, "distance_smallball_curve");
    meta.cols = m_spec.cols;
    Ok(DistanceCurves {
        centered: TailCurve { rows: count_rows(c0, t_grid, scale), metadata: meta.clone() },
        shifted: TailCurve { rows: count_rows(c1, t_grid, scale), metadata: meta },
        v,
        d,
    })
}

/// `min_x ||P_{H_{J^c}^perp} A_J x||` over `probes` spread vectors `x`
/// (entries of `|x_i| sqrt(d)` in `[low, high]`). An upper bound on the
/// infimum over all spread vectors.
pub fn spread_infimum_proxy_for(
    a: &DMatrix<f64>,
    columns: &[usize],
    probes: usize,
    low: f64,
    high: f64,
    stream: Stream,
) -> Result<f64> {
    if columns.is_empty() || probes == 0 {
        return Err(Error::invalid("need a non-empty J and at least one probe"));
    }
    let w = linalg::projected_submatrix(a, columns, None)?.w;
    let d = columns.len();
    let mut rng = stream.rng();
    let mut best = f64::INFINITY;
    for _ in 0..probes {
        let x = DVector::from_vec(sphere::sample_spread_with(d, low, high, &mut rng)?);
        best = best.min((&w * x).norm());
    }
    Ok(best)
}

/// Proxy for one matrix drawn from `spec`, default spread band.
pub fn spread_infimum_proxy(spec: &EnsembleSpec, columns: &[usize], probes: usize, stream: Stream) -> Result<f64> {
    let a = crate::ensembles::sample_matrix(spec, stream.tagged("a"))?;
    spread_infimum_proxy_for(
        &a,
        columns,
        probes,
        sphere::DEFAULT_SPREAD_LOW,
        sphere::DEFAULT_SPREAD_HIGH,
        stream.tagged("x"),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxySummary {
    pub trials: u64,
    pub min: f64,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
    pub max: f64,
    pub values: Vec<f64>,
}

/// Proxy over `trials` independent matrices, with quantiles.
pub fn spread_proxy_distribution(
    spec: &EnsembleSpec,
    columns: &[usize],
    probes: usize,
    trials: u64,
    seed: u64,
) -> Result<ProxySummary> {
    spec.validate()?;
    check_trials(trials)?;
    let s = Stream::from_seed(seed).tagged("spread_infimum_proxy");
    let values = par::map_trials(trials, |i| spread_infimum_proxy(spec, columns, probes, s.trial(i)))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(ProxySummary {
        trials,
        min: sorted[0],
        q10: quantile_sorted(&sorted, 0.1),
        median: quantile_sorted(&sorted, 0.5),
        q90: quantile_sorted(&sorted, 0.9),
        max: sorted[sorted.len() - 1],
        values,
    })
}
