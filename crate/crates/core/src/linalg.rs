//! Dense numerical kernels shared by every estimator: SVD-based
//! pseudoinverse, minimum-norm least squares, range membership and a few
//! symmetric positive definite helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative singular-value cutoff used for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Tolerance for deciding whether a functional is representable.
pub const DEFAULT_RANGE_TOL: f64 = 1e-8;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolveResult {
    pub solution: Vector,
    /// `|A x - b|` as actually computed from `solution`.
    pub residual_norm: f64,
    pub rank_estimate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RangeMembership {
    Member { coefficients: Vector },
    NotMember { residual: f64 },
}

impl RangeMembership {
    pub fn is_member(&self) -> bool {
        matches!(self, RangeMembership::Member { .. })
    }
}

pub(crate) fn ensure_finite_matrix(a: &Matrix, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

pub(crate) fn ensure_finite_vector(v: &Vector, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

/// Full singular value decomposition `A = U diag(s) V'`, singular values in
/// decreasing order. nalgebra's own SVD returns wrong factors for some
/// nearly rank-deficient inputs, so this goes through faer.
struct Svd {
    u: Matrix,
    singular_values: Vector,
    v_t: Matrix,
}

fn svd(a: &Matrix) -> Result<Svd> {
    let (rows, cols) = a.shape();
    let fa = faer::Mat::<f64>::from_fn(rows, cols, |i, j| a[(i, j)]);
    let dec = fa.svd().map_err(|e| Error::NumericalBreakdown(format!("SVD failed: {e:?}")))?;
    let (u, s, v) = (dec.U(), dec.S().column_vector(), dec.V());
    let mut order: Vec<usize> = (0..rows.min(cols)).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    // Columns beyond min(rows, cols) span the complements and keep their place.
    let perm = |k: usize| if k < order.len() { order[k] } else { k };
    Ok(Svd {
        u: Matrix::from_fn(rows, rows, |i, j| u[(i, perm(j))]),
        singular_values: Vector::from_iterator(order.len(), order.iter().map(|&k| s[k])),
        v_t: Matrix::from_fn(cols, cols, |i, j| v[(j, perm(i))]),
    })
}

/// Singular values in decreasing order.
pub fn singular_values(a: &Matrix) -> Result<Vector> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vector::zeros(0));
    }
    Ok(svd(a)?.singular_values)
}

fn cutoff(singular_values: &Vector, tol: f64) -> f64 {
    let largest = singular_values.iter().cloned().fold(0.0_f64, f64::max);
    tol * largest
}

/// Moore-Penrose pseudoinverse. Singular values at or below
/// `tol * sigma_max` are treated as zero.
pub fn pseudo_inverse(a: &Matrix, tol: f64) -> Result<Matrix> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    ensure_finite_matrix(a, "matrix")?;
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Matrix::zeros(a.ncols(), a.nrows()));
    }
    let dec = svd(a)?;
    let (u, v_t) = (&dec.u, &dec.v_t);
    let cut = cutoff(&dec.singular_values, tol);
    let mut out = Matrix::zeros(a.ncols(), a.nrows());
    for (i, &s) in dec.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            // out += v_i u_i' / s
            out += (v_t.row(i).transpose() / s) * u.column(i).transpose();
        }
    }
    Ok(out)
}

/// Numerical rank at relative tolerance `tol`.
pub fn numerical_rank(a: &Matrix, tol: f64) -> Result<usize> {
    ensure_finite_matrix(a, "matrix")?;
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0);
    }
    let s = singular_values(a)?;
    let cut = cutoff(&s, tol);
    Ok(s.iter().filter(|&&v| v > cut && v > 0.0).count())
}

/// Minimum-norm least-squares solution `A^+ b`.
pub fn solve_least_squares(a: &Matrix, b: &Vector) -> Result<LinearSolveResult> {
    solve_least_squares_tol(a, b, DEFAULT_RANK_TOL)
}

pub fn solve_least_squares_tol(a: &Matrix, b: &Vector, tol: f64) -> Result<LinearSolveResult> {
    if a.nrows() != b.len() {
        return Err(Error::InvalidInput(format!(
            "system has {} rows but right-hand side has length {}",
            a.nrows(),
            b.len()
        )));
    }
    ensure_finite_matrix(a, "system matrix")?;
    ensure_finite_vector(b, "right-hand side")?;
    if a.ncols() == 0 {
        return Ok(LinearSolveResult { solution: Vector::zeros(0), residual_norm: b.norm(), rank_estimate: 0 });
    }
    let dec = svd(a)?;
    let (u, v_t) = (&dec.u, &dec.v_t);
    let cut = cutoff(&dec.singular_values, tol);
    let mut x = Vector::zeros(a.ncols());
    let mut rank = 0;
    for (i, &s) in dec.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            rank += 1;
            let coeff = u.column(i).dot(b) / s;
            x += v_t.row(i).transpose() * coeff;
        }
    }
    let residual_norm = (a * &x - b).norm();
    Ok(LinearSolveResult { solution: x, residual_norm, rank_estimate: rank })
}

/// Decides whether `target` lies in the column space of `columns`.
///
/// Membership means the least-squares residual is at most
/// `tol * (1 + |target|)`; a coefficient vector is returned on success.
pub fn range_membership(columns: &Matrix, target: &Vector, tol: f64) -> Result<RangeMembership> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let ls = solve_least_squares(columns, target)?;
    if ls.residual_norm <= tol * (1.0 + target.norm()) {
        Ok(RangeMembership::Member { coefficients: ls.solution })
    } else {
        Ok(RangeMembership::NotMember { residual: ls.residual_norm })
    }
}

/// Orthonormal basis of the null space of `a` (columns), at relative
/// tolerance `tol`.
pub fn null_space(a: &Matrix, tol: f64) -> Result<Matrix> {
    let cut = if a.nrows() == 0 || a.ncols() == 0 { 0.0 } else { cutoff(&singular_values(a)?, tol) };
    null_space_with_cutoff(a, cut)
}

/// Null space basis treating singular values `<= cut` as zero.
pub fn null_space_with_cutoff(a: &Matrix, cut: f64) -> Result<Matrix> {
    ensure_finite_matrix(a, "matrix")?;
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return Ok(Matrix::identity(n, n));
    }
    let dec = svd(a)?;
    let v_t = &dec.v_t;
    let rank = dec.singular_values.iter().filter(|&&v| v > cut && v > 0.0).count();
    let kept: Vec<usize> = (rank..n).collect();
    let mut basis = Matrix::zeros(n, kept.len());
    for (j, &i) in kept.iter().enumerate() {
        basis.set_column(j, &v_t.row(i).transpose());
    }
    Ok(basis)
}

pub fn is_symmetric(a: &Matrix, tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = 1.0 + a.amax();
    (a - a.transpose()).amax() <= tol * scale
}

/// Checks that `a` is symmetric positive definite (symmetry to a relative
/// 1e-10, positivity through a successful Cholesky factorisation).
pub fn check_spd(a: &Matrix, what: &str) -> Result<()> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::InvalidBounds(format!("{what} must be a non-empty square matrix")));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidBounds(format!("{what} has non-finite entries")));
    }
    if !is_symmetric(a, 1e-10) {
        return Err(Error::InvalidBounds(format!("{what} is not symmetric")));
    }
    if a.clone().cholesky().is_none() {
        return Err(Error::InvalidBounds(format!("{what} is not positive definite")));
    }
    Ok(())
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(a: &Matrix, what: &str) -> Result<Matrix> {
    a.clone()
        .cholesky()
        .map(|c| symmetrize(&c.inverse()))
        .ok_or_else(|| Error::InvalidBounds(format!("{what} is not positive definite")))
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

pub fn min_eigenvalue(a: &Matrix) -> f64 {
    SymmetricEigen::new(symmetrize(a)).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    singular_values(a).map(|s| s.iter().cloned().fold(0.0, f64::max)).unwrap_or(f64::NAN)
}

/// Block-diagonal matrix from the given blocks.
pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Concatenates vectors end to end.
pub fn stack(parts: &[Vector]) -> Vector {
    let len = parts.iter().map(|v| v.len()).sum();
    let mut out = Vector::zeros(len);
    let mut at = 0;
    for p in parts {
        out.rows_mut(at, p.len()).copy_from(p);
        at += p.len();
    }
    out
}

/// Splits `v` into consecutive blocks of the given sizes.
pub fn split(v: &Vector, sizes: &[usize]) -> Vec<Vector> {
    let mut at = 0;
    sizes
        .iter()
        .map(|&s| {
            let part = v.rows(at, s).into_owned();
            at += s;
            part
        })
        .collect()
}
