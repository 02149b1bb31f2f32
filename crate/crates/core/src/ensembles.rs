//! Entry distributions with closed-form moments, inhomogeneous matrix
//! ensembles, and assumption checking.
//!
//! Every family is stored as a standardized variable `Z` (mean 0, variance
//! 1) plus an affine wrapper `X = mean + sqrt(variance) * Z`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::gamma::ln_gamma;

use crate::anticoncentration::{derive_uac_constants, levy_concentration};
use crate::error::{Error, Result};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Rademacher,
    UniformInterval,
    /// Uniform on {-1, 0, +1}.
    LatticeUniform,
    /// Uniform core on [-1, 1] with density proportional to |x|^(-alpha-1)
    /// outside it, continuous at |x| = 1.
    SymmetricPareto,
}

/// Value of an analytic moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    Finite(f64),
    Infinite,
    Unavailable,
}

impl Moment {
    pub fn finite(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            _ => None,
        }
    }
}

fn default_variance() -> f64 {
    1.0
}

/// A scalar entry law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarDistribution {
    pub family: Family,
    /// Tail index, only for `symmetric_pareto`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub mean: f64,
    #[serde(default = "default_variance")]
    pub variance: f64,
}

impl ScalarDistribution {
    pub fn standard(family: Family) -> Self {
        ScalarDistribution { family, alpha: None, mean: 0.0, variance: 1.0 }
    }

    pub fn gaussian(mean: f64, variance: f64) -> Self {
        Self::standard(Family::Gaussian).with_affine(mean, variance)
    }

    pub fn rademacher() -> Self {
        Self::standard(Family::Rademacher)
    }

    /// Uniform on `[lo, hi]`.
    pub fn uniform_interval(lo: f64, hi: f64) -> Self {
        let w = hi - lo;
        Self::standard(Family::UniformInterval).with_affine(0.5 * (lo + hi), w * w / 12.0)
    }

    pub fn lattice_uniform() -> Self {
        Self::standard(Family::LatticeUniform)
    }

    pub fn symmetric_pareto(alpha: f64) -> Self {
        ScalarDistribution { family: Family::SymmetricPareto, alpha: Some(alpha), mean: 0.0, variance: 1.0 }
    }

    pub fn with_affine(mut self, mean: f64, variance: f64) -> Self {
        self.mean = mean;
        self.variance = variance;
        self
    }

    /// The standardized (mean 0, variance 1) version of this law.
    pub fn normalized(self) -> Self {
        self.with_affine(0.0, 1.0)
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn second_moment(&self) -> f64 {
        self.variance + self.mean * self.mean
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean.is_finite() && self.variance.is_finite()) {
            return Err(Error::NonFinite("distribution parameters"));
        }
        if self.variance <= 0.0 {
            return Err(Error::invalid(format!("variance must be positive, got {}", self.variance)));
        }
        match (self.family, self.alpha) {
            (Family::SymmetricPareto, Some(a)) if a > 2.0 && a.is_finite() => Ok(()),
            (Family::SymmetricPareto, Some(a)) => {
                Err(Error::invalid(format!("symmetric_pareto needs tail index alpha > 2, got {a}")))
            }
            (Family::SymmetricPareto, None) => Err(Error::invalid("symmetric_pareto requires alpha")),
            (_, Some(_)) => Err(Error::invalid("alpha is only meaningful for symmetric_pareto")),
            (_, None) => Ok(()),
        }
    }

    /// `E|Z|^p` for the standardized variable.
    pub fn standardized_abs_moment(&self, p: f64) -> Moment {
        if !(p.is_finite() && p >= 1.0) {
            return Moment::Unavailable;
        }
        let m = match self.family {
            Family::Gaussian => {
                // 2^{p/2} Gamma((p+1)/2) / sqrt(pi)
                (0.5 * p * std::f64::consts::LN_2 + ln_gamma(0.5 * (p + 1.0))
                    - 0.5 * std::f64::consts::PI.ln())
                .exp()
            }
            Family::Rademacher => 1.0,
            Family::UniformInterval => 3f64.powf(0.5 * p) / (p + 1.0),
            Family::LatticeUniform => (2.0 / 3.0) * 1.5f64.powf(0.5 * p),
            Family::SymmetricPareto => {
                let alpha = match self.alpha {
                    Some(a) => a,
                    None => return Moment::Unavailable,
                };
                if p >= alpha {
                    return Moment::Infinite;
                }
                pareto_raw_abs_moment(alpha, p) / pareto_raw_abs_moment(alpha, 2.0).powf(0.5 * p)
            }
        };
        Moment::Finite(m)
    }

    /// Draws one standardized value.
    pub fn sample_standard<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            Family::Gaussian => rng.sample(StandardNormal),
            Family::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Family::UniformInterval => {
                let u: f64 = rng.random();
                3f64.sqrt() * (2.0 * u - 1.0)
            }
            Family::LatticeUniform => (rng.random_range(0..3u32) as f64 - 1.0) * 1.5f64.sqrt(),
            Family::SymmetricPareto => {
                let alpha = self.alpha.unwrap_or(f64::INFINITY);
                let u: f64 = rng.sample(Open01);
                pareto_inverse_cdf(alpha, u) / pareto_raw_abs_moment(alpha, 2.0).sqrt()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.mean + self.std_dev() * self.sample_standard(rng)
    }
}

/// `E|Y|^p` for the unnormalized symmetric Pareto `Y` (p < alpha).
fn pareto_raw_abs_moment(alpha: f64, p: f64) -> f64 {
    let core_density = alpha / (2.0 * (alpha + 1.0));
    2.0 * core_density * (1.0 / (p + 1.0) + 1.0 / (alpha - p))
}

/// Inverse CDF of the unnormalized symmetric Pareto on `u` in (0, 1).
pub fn pareto_inverse_cdf(alpha: f64, u: f64) -> f64 {
    // Each tail carries mass 1 / (2 (alpha + 1)); P(Y < -t) = tail * t^-alpha.
    let tail = 1.0 / (2.0 * (alpha + 1.0));
    if u < tail {
        -(u / tail).powf(-1.0 / alpha)
    } else if u > 1.0 - tail {
        ((1.0 - u) / tail).powf(-1.0 / alpha)
    } else {
        -1.0 + 2.0 * (u - tail) / (1.0 - 2.0 * tail)
    }
}

/// `E|X - EX|^p` in closed form.
///
/// `Infinite` for symmetric Pareto when `p >= alpha`; `Unavailable` for `p < 1`.
pub fn analytic_moment(dist: &ScalarDistribution, p: f64) -> Moment {
    match dist.standardized_abs_moment(p) {
        Moment::Finite(m) => Moment::Finite(dist.variance.powf(0.5 * p) * m),
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Constant,
    PerColumn,
    PerRow,
    /// Entry `(i, j)` uses `entries[(i + j) % entries.len()]`.
    Checkerboard,
}

/// Deterministic map from a matrix position to an entry law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub kind: ProfileKind,
    pub entries: Vec<ScalarDistribution>,
}

impl Profile {
    pub fn constant(dist: ScalarDistribution) -> Self {
        Profile { kind: ProfileKind::Constant, entries: vec![dist] }
    }

    pub fn per_column(entries: Vec<ScalarDistribution>) -> Self {
        Profile { kind: ProfileKind::PerColumn, entries }
    }

    pub fn per_row(entries: Vec<ScalarDistribution>) -> Self {
        Profile { kind: ProfileKind::PerRow, entries }
    }

    pub fn checkerboard(entries: Vec<ScalarDistribution>) -> Self {
        Profile { kind: ProfileKind::Checkerboard, entries }
    }

    fn index(&self, i: usize, j: usize) -> usize {
        match self.kind {
            ProfileKind::Constant => 0,
            ProfileKind::PerColumn => j,
            ProfileKind::PerRow => i,
            ProfileKind::Checkerboard => (i + j) % self.entries.len(),
        }
    }
}

/// Declared hypotheses on an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Assumption {
    /// Uniform anti-concentration: `sup_z P(|X - z| <= a) <= b` for every entry.
    #[serde(rename = "UAC")]
    Uac { a: f64, b: f64 },
    /// Every entry has variance `>= r` and `E|X-EX|^{2+beta} <= (R var)^{1+beta/2}`.
    #[serde(rename = "MOM")]
    Moment {
        beta: f64,
        r: f64,
        #[serde(rename = "R")]
        big_r: f64,
    },
    /// Columns are scaled isotropic, `E A_i A_i^T = c I`.
    #[serde(rename = "ISO")]
    Isotropic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<f64>,
    },
    /// Column second moment `E|A_i|^2 <= c N^2`.
    #[serde(rename = "VEC2")]
    VectorVariance {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<f64>,
    },
    /// `E ||A||_HS^2 <= K N n`.
    #[serde(rename = "HS")]
    HilbertSchmidt {
        #[serde(rename = "K")]
        k: f64,
    },
}

/// `N x n` random matrix with independent entries drawn from a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    #[serde(rename = "N")]
    pub rows: usize,
    #[serde(rename = "n")]
    pub cols: usize,
    pub profile: Profile,
    #[serde(default)]
    pub assumptions: Vec<Assumption>,
}

impl EnsembleSpec {
    pub fn new(rows: usize, cols: usize, profile: Profile) -> Self {
        EnsembleSpec { rows, cols, profile, assumptions: Vec::new() }
    }

    /// Identically distributed entries.
    pub fn iid(rows: usize, cols: usize, dist: ScalarDistribution) -> Self {
        Self::new(rows, cols, Profile::constant(dist))
    }

    pub fn with_assumption(mut self, a: Assumption) -> Self {
        self.assumptions.push(a);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.cols == 0 || self.rows < self.cols {
            return Err(Error::Shape { rows: self.rows, cols: self.cols });
        }
        let want = match self.profile.kind {
            ProfileKind::Constant => Some(1),
            ProfileKind::PerColumn => Some(self.cols),
            ProfileKind::PerRow => Some(self.rows),
            ProfileKind::Checkerboard => None,
        };
        let got = self.profile.entries.len();
        match want {
            Some(w) if w != got => {
                return Err(Error::invalid(format!(
                    "{:?} profile needs {w} entries, got {got}",
                    self.profile.kind
                )))
            }
            None if got == 0 => return Err(Error::invalid("checkerboard profile needs entries")),
            _ => {}
        }
        for d in &self.profile.entries {
            d.validate()?;
        }
        Ok(())
    }

    pub fn dist(&self, i: usize, j: usize) -> &ScalarDistribution {
        &self.profile.entries[self.profile.index(i, j)]
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// `sum_{ij} E a_ij^2`.
    pub fn expected_hs_norm_sq(&self) -> f64 {
        (0..self.cols).map(|j| self.expected_column_norm_sq(j)).sum()
    }

    /// `E ||A e_j||^2`.
    pub fn expected_column_norm_sq(&self, j: usize) -> f64 {
        (0..self.rows).map(|i| self.dist(i, j).second_moment()).sum()
    }

    /// Distinct entry laws in profile order.
    pub fn distinct_entries(&self) -> Vec<ScalarDistribution> {
        let mut out: Vec<ScalarDistribution> = Vec::new();
        for d in &self.profile.entries {
            if !out.contains(d) {
                out.push(*d);
            }
        }
        out
    }

    /// True when every column is mean zero with equal entry variances.
    pub fn is_isotropic(&self) -> bool {
        isotropy_constant(self).is_some()
    }
}

/// Draws one matrix. Entries are filled row by row from `stream`.
pub fn sample_matrix(spec: &EnsembleSpec, stream: Stream) -> Result<DMatrix<f64>> {
    spec.validate()?;
    Ok(sample_matrix_unchecked(spec, stream))
}

pub(crate) fn sample_matrix_unchecked(spec: &EnsembleSpec, stream: Stream) -> DMatrix<f64> {
    let mut rng = stream.rng();
    let (rows, cols) = (spec.rows, spec.cols);
    let mut data = Vec::with_capacity(rows * cols);
    if spec.profile.kind == ProfileKind::Constant {
        let d = spec.profile.entries[0];
        for _ in 0..rows * cols {
            data.push(d.sample(&mut rng));
        }
    } else {
        for i in 0..rows {
            for j in 0..cols {
                data.push(spec.dist(i, j).sample(&mut rng));
            }
        }
    }
    DMatrix::from_row_slice(rows, cols, &data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AssumptionStatus {
    VerifiedAnalytic,
    /// Holds on the sample; `upper_99` is the one-sided 99% bound on the
    /// estimated concentration.
    VerifiedEmpirical { upper_99: f64 },
    Violated,
    Unverifiable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    #[serde(flatten)]
    pub status: AssumptionStatus,
    pub witness: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn status_of(&self, pred: impl Fn(&Assumption) -> bool) -> Option<&AssumptionStatus> {
        self.checks.iter().find(|c| pred(&c.assumption)).map(|c| &c.status)
    }
}

const REL_TOL: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Common diagonal of `E A_i A_i^T` if every column is isotropic.
fn isotropy_constant(spec: &EnsembleSpec) -> Option<f64> {
    let c = spec.dist(0, 0).second_moment();
    for j in 0..spec.cols {
        let mut nonzero_means = 0;
        for i in 0..spec.rows {
            let d = spec.dist(i, j);
            if !close(d.second_moment(), c) {
                return None;
            }
            if d.mean != 0.0 {
                nonzero_means += 1;
            }
        }
        // Off-diagonal entries of E A_i A_i^T are products of means.
        if nonzero_means > 1 {
            return None;
        }
    }
    Some(c)
}

/// Checks every declared assumption of `spec`.
///
/// ISO, HS, VEC2 and MOM are decided from closed-form moments. UAC is
/// decided analytically when the moment-derived constants already cover the
/// declared `(a, b)`, and otherwise empirically with `trials` samples per
/// distinct entry law.
pub fn check_assumptions(spec: &EnsembleSpec, trials: usize, stream: Stream) -> Result<AssumptionReport> {
    spec.validate()?;
    let mut checks = Vec::with_capacity(spec.assumptions.len());
    for (idx, assumption) in spec.assumptions.iter().enumerate() {
        let mut witness = BTreeMap::new();
        let status = match *assumption {
            Assumption::Isotropic { c } => match isotropy_constant(spec) {
                Some(measured) => {
                    witness.insert("c".into(), measured);
                    match c {
                        Some(declared) if !close(declared, measured) => AssumptionStatus::Violated,
                        _ => AssumptionStatus::VerifiedAnalytic,
                    }
                }
                None => AssumptionStatus::Violated,
            },
            Assumption::HilbertSchmidt { k } => {
                let total = spec.expected_hs_norm_sq();
                let needed = total / (spec.rows * spec.cols) as f64;
                witness.insert("expected_hs_norm_sq".into(), total);
                witness.insert("K_measured".into(), needed);
                if needed <= k * (1.0 + REL_TOL) {
                    AssumptionStatus::VerifiedAnalytic
                } else {
                    AssumptionStatus::Violated
                }
            }
            Assumption::VectorVariance { c } => {
                let n2 = (spec.rows * spec.rows) as f64;
                let measured = (0..spec.cols)
                    .map(|j| spec.expected_column_norm_sq(j) / n2)
                    .fold(0.0, f64::max);
                witness.insert("c_measured".into(), measured);
                match c {
                    Some(declared) if measured > declared * (1.0 + REL_TOL) => AssumptionStatus::Violated,
                    _ => AssumptionStatus::VerifiedAnalytic,
                }
            }
            Assumption::Moment { beta, r, big_r } => check_moment(spec, beta, r, big_r, &mut witness),
            Assumption::Uac { a, b } => {
                check_uac(spec, a, b, trials, stream.child(idx as u64), &mut witness)?
            }
        };
        checks.push(AssumptionCheck { assumption: *assumption, status, witness });
    }
    Ok(AssumptionReport { checks })
}

fn check_moment(
    spec: &EnsembleSpec,
    beta: f64,
    r: f64,
    big_r: f64,
    witness: &mut BTreeMap<String, f64>,
) -> AssumptionStatus {
    let mut min_var = f64::INFINITY;
    let mut r_needed: f64 = 0.0;
    for d in spec.distinct_entries() {
        min_var = min_var.min(d.variance);
        match analytic_moment(&d, 2.0 + beta) {
            Moment::Finite(m) => {
                r_needed = r_needed.max(m.powf(1.0 / (1.0 + 0.5 * beta)) / d.variance);
            }
            Moment::Infinite => r_needed = f64::INFINITY,
            Moment::Unavailable => return AssumptionStatus::Unverifiable,
        }
    }
    witness.insert("min_variance".into(), min_var);
    if r_needed.is_finite() {
        witness.insert("R_measured".into(), r_needed);
    }
    if min_var >= r && r_needed <= big_r * (1.0 + REL_TOL) {
        AssumptionStatus::VerifiedAnalytic
    } else {
        AssumptionStatus::Violated
    }
}

fn check_uac(
    spec: &EnsembleSpec,
    a: f64,
    b: f64,
    trials: usize,
    stream: Stream,
    witness: &mut BTreeMap<String, f64>,
) -> Result<AssumptionStatus> {
    if !(a > 0.0 && (0.0..1.0).contains(&b)) {
        return Err(Error::invalid("UAC needs a > 0 and b in [0, 1)"));
    }
    let mut any_empirical = false;
    let mut worst_upper: f64 = 0.0;
    let mut worst_q: f64 = 0.0;
    for (k, d) in spec.distinct_entries().into_iter().enumerate() {
        // Necessary: UAC(a, b) forces variance >= a^2 (1 - b).
        if d.variance < a * a * (1.0 - b) {
            witness.insert("variance_floor".into(), a * a * (1.0 - b));
            return Ok(AssumptionStatus::Violated);
        }
        // Sufficient: the moment-derived constants at radius sd/4.
        let beta = match d.family {
            Family::SymmetricPareto => ((d.alpha.unwrap_or(2.0) - 2.0) / 2.0).min(2.0),
            _ => 2.0,
        };
        if let Moment::Finite(c_moment) = d.standardized_abs_moment(2.0 + beta) {
            let consts = derive_uac_constants(beta, c_moment.max(1.0))?;
            if a <= d.std_dev() / 4.0 && b >= consts.b {
                continue;
            }
        }
        if trials < 2 {
            return Ok(AssumptionStatus::Unverifiable);
        }
        let mut rng = stream.child(k as u64).rng();
        let mut xs: Vec<f64> = (0..trials).map(|_| d.sample(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let est = levy_concentration(&xs, a)?;
        any_empirical = true;
        worst_upper = worst_upper.max(est.upper_99);
        worst_q = worst_q.max(est.q_hat);
    }
    if !any_empirical {
        return Ok(AssumptionStatus::VerifiedAnalytic);
    }
    witness.insert("a".into(), a);
    witness.insert("b".into(), b);
    witness.insert("q_hat".into(), worst_q);
    witness.insert("upper_99".into(), worst_upper);
    Ok(if worst_upper <= b {
        AssumptionStatus::VerifiedEmpirical { upper_99: worst_upper }
    } else {
        AssumptionStatus::Violated
    })
}
