//! Dense kernels: smallest singular value, Hilbert-Schmidt norm, projection
//! onto the orthogonal complement of a column span.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Singular values below `RANK_TOL * sigma_max` count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Default perturbation, relative to the RMS entry size.
pub const DEFAULT_PERTURB_SCALE: f64 = 1e-9;

fn check_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `sigma_n(A)` for an `N x n` matrix with `N >= n >= 1`.
pub fn smallest_singular_value(a: &DMatrix<f64>) -> Result<f64> {
    let (rows, cols) = a.shape();
    if cols == 0 || rows < cols {
        return Err(Error::Shape { rows, cols });
    }
    check_finite(a, "matrix")?;
    Ok(smallest_singular_value_unchecked(a))
}

pub(crate) fn smallest_singular_value_unchecked(a: &DMatrix<f64>) -> f64 {
    a.singular_values().iter().copied().fold(f64::INFINITY, f64::min).max(0.0)
}

/// `sum_{ij} a_ij^2`.
pub fn hs_norm_sq(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Orthonormal basis (as columns) of `span(M)`, rank decided by [`RANK_TOL`].
pub fn span_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if cols == 0 || rows == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(rows, 0);
    }
    let keep: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > RANK_TOL * smax).collect();
    u.select_columns(keep.iter())
}

/// Numerical rank of `M`.
pub fn rank(m: &DMatrix<f64>) -> usize {
    span_basis(m).ncols()
}

/// `N x (N - r)` orthonormal basis of `span(M)^perp`, `r = rank(M)`.
pub fn complement_projector(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_finite(m, "matrix")?;
    let n = m.nrows();
    let basis = span_basis(m);
    let r = basis.ncols();
    if r == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    if r >= n {
        return Ok(DMatrix::zeros(n, 0));
    }
    // The projector I - U U^T has eigenvalues 1 (complement) and 0 (span).
    let mut p = DMatrix::identity(n, n) - &basis * basis.transpose();
    p = (&p + p.transpose()) * 0.5;
    let eig = SymmetricEigen::new(p);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    Ok(eig.eigenvectors.select_columns(order[..n - r].iter()))
}

/// `P_{span(M)} x`.
pub fn project_onto_span(x: &DVector<f64>, m: &DMatrix<f64>) -> Result<DVector<f64>> {
    if x.len() != m.nrows() {
        return Err(Error::invalid(format!("vector length {} vs {} rows", x.len(), m.nrows())));
    }
    let basis = span_basis(m);
    Ok(&basis * (basis.transpose() * x))
}

/// `P_{span(M)^perp} x`.
pub fn residual_from_span(x: &DVector<f64>, m: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(x - project_onto_span(x, m)?)
}

/// `dist(x, span(M)) = ||P_{span(M)^perp} x||_2`.
pub fn distance_to_span(x: &DVector<f64>, m: &DMatrix<f64>) -> Result<f64> {
    Ok(residual_from_span(x, m)?.norm())
}

/// `W = P_{H^perp} A_J` with `H` the span of the columns outside `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedSubmatrix {
    pub w: DMatrix<f64>,
    pub columns: Vec<usize>,
    /// `dim H^perp = N - rank(A_{J^c})`.
    pub complement_rank: usize,
}

/// Gaussian perturbation applied to `A` before projecting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub magnitude: f64,
    pub stream: Stream,
}

impl Perturbation {
    /// [`DEFAULT_PERTURB_SCALE`] times the RMS entry of `a`.
    pub fn default_for(a: &DMatrix<f64>, stream: Stream) -> Self {
        let rms = (hs_norm_sq(a) / a.len().max(1) as f64).sqrt();
        let scale = if rms > 0.0 { rms } else { 1.0 };
        Perturbation { magnitude: DEFAULT_PERTURB_SCALE * scale, stream }
    }
}

/// Projects the columns `J` (0-based) of `A` onto the complement of the
/// span of the remaining columns.
pub fn projected_submatrix(
    a: &DMatrix<f64>,
    columns: &[usize],
    perturb: Option<Perturbation>,
) -> Result<ProjectedSubmatrix> {
    check_finite(a, "matrix")?;
    let n = a.ncols();
    let mut sel = columns.to_vec();
    sel.sort_unstable();
    sel.dedup();
    if sel.len() != columns.len() || sel.iter().any(|&j| j >= n) {
        return Err(Error::invalid(format!("column set {columns:?} is not a subset of 0..{n}")));
    }
    let mut a = a.clone();
    if let Some(p) = perturb {
        let mut rng = p.stream.rng();
        for x in a.iter_mut() {
            let g: f64 = StandardNormal.sample(&mut rng);
            *x += p.magnitude * g;
        }
    }
    let rest: Vec<usize> = (0..n).filter(|j| !sel.contains(j)).collect();
    let a_j = a.select_columns(columns.iter());
    let a_rest = a.select_columns(rest.iter());
    let basis = span_basis(&a_rest);
    let w = &a_j - &basis * (basis.transpose() * &a_j);
    Ok(ProjectedSubmatrix { w, columns: columns.to_vec(), complement_rank: a.nrows() - basis.ncols() })
}
