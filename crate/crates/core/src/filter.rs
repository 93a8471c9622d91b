//! Recursive minimax filter for discrete descriptor systems.
//!
//! For `B_k = I` and `[F_k; H_k]` of full column rank the a posteriori
//! estimate of `(l, x_k)` from `y_0..y_k` is `(l, x_{k|k})` with
//!
//! ```text
//! W_k     = (Q1_{k-1}^{-1} + C_{k-1} P_{k-1|k-1} C_{k-1}')^{-1}
//! P_{k|k} = (F_k' W_k F_k + H_k' Q2_k H_k)^{-1}
//! x_{k|k} = P_{k|k} (F_k' W_k C_{k-1} x_{k-1|k-1} + H_k' Q2_k y_k)
//! ```
//!
//! started from `P_{0|0} = (F_0' Q0 F_0 + H_0' Q2_0 H_0)^{-1}`,
//! `x_{0|0} = P_{0|0} H_0' Q2_0 y_0`.

use crate::discrete_dae::{DaeEllipsoid, DiscreteDae};
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, numerical_rank, symmetrize, Matrix, Vector, DEFAULT_RANK_TOL};

/// Inner matrices with an eigenvalue below this are treated as singular.
pub const BREAKDOWN_EIGENVALUE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub k: usize,
    pub x_hat: Vector,
    /// Symmetric positive definite `P_{k|k}`.
    pub p: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    pub estimate: f64,
    pub last: FilterState,
}

/// Whether the stacked `[F; H]` has full column rank.
pub fn rank_precondition(f: &Matrix, h: &Matrix, tol: f64) -> bool {
    if f.ncols() != h.ncols() {
        return false;
    }
    let n = f.ncols();
    let mut stacked = Matrix::zeros(f.nrows() + h.nrows(), n);
    stacked.view_mut((0, 0), f.shape()).copy_from(f);
    stacked.view_mut((f.nrows(), 0), h.shape()).copy_from(h);
    numerical_rank(&stacked, tol).map(|r| r == n).unwrap_or(false)
}

fn is_identity(a: &Matrix) -> bool {
    a.is_square() && (a - Matrix::identity(a.nrows(), a.ncols())).amax() <= 1e-14
}

/// Weight `Q` of `f` re-expressed for `B f`: `B^{-T} Q B^{-1}`. Only square
/// invertible `B` is accepted, since anything else would change the set.
fn pulled_back_weight(b: &Matrix, q: &Matrix, what: &str) -> Result<Matrix> {
    if is_identity(b) {
        return Ok(q.clone());
    }
    if !b.is_square() {
        return Err(Error::Precondition(format!("{what} must be the identity or square invertible")));
    }
    let b_inv = b
        .clone()
        .try_inverse()
        .filter(|_| numerical_rank(b, DEFAULT_RANK_TOL).map(|r| r == b.nrows()).unwrap_or(false))
        .ok_or_else(|| Error::Precondition(format!("{what} is singular")))?;
    Ok(symmetrize(&(b_inv.transpose() * q * b_inv)))
}

fn check_filter_shape(dae: &DiscreteDae, bounds: &DaeEllipsoid) -> Result<()> {
    bounds.check_against(dae)?;
    if dae.observed_steps() != dae.horizon() + 1 {
        return Err(Error::Precondition("the filter needs an observation at every step".into()));
    }
    Ok(())
}

fn spd_inverse_or_rank_error(a: &Matrix, k: usize) -> Result<Matrix> {
    a.clone()
        .cholesky()
        .map(|c| symmetrize(&c.inverse()))
        .ok_or_else(|| Error::RankDeficient(format!("information matrix at step {k} is singular")))
}

fn check_rank(dae: &DiscreteDae, k: usize) -> Result<()> {
    if rank_precondition(&dae.f_seq()[k], &dae.h_seq()[k], DEFAULT_RANK_TOL) {
        Ok(())
    } else {
        Err(Error::RankDeficient(format!("[F_{k}; H_{k}] does not have full column rank")))
    }
}

fn check_observation(dae: &DiscreteDae, y: &Vector) -> Result<()> {
    if y.len() != dae.observation_dim() {
        return Err(Error::InvalidInput(format!(
            "observation has length {} but H has {} rows",
            y.len(),
            dae.observation_dim()
        )));
    }
    Ok(())
}

pub fn filter_init(dae: &DiscreteDae, bounds: &DaeEllipsoid, y0: &Vector) -> Result<FilterState> {
    check_filter_shape(dae, bounds)?;
    check_observation(dae, y0)?;
    check_rank(dae, 0)?;
    let q0 = pulled_back_weight(dae.s(), bounds.q0(), "S")?;
    let (f, h, q2) = (&dae.f_seq()[0], &dae.h_seq()[0], &bounds.q2_seq()[0]);
    let info = f.transpose() * q0 * f + h.transpose() * q2 * h;
    let p = spd_inverse_or_rank_error(&symmetrize(&info), 0)?;
    let x_hat = &p * h.transpose() * q2 * y0;
    Ok(FilterState { k: 0, x_hat, p })
}

pub fn filter_step(
    state: &FilterState,
    dae: &DiscreteDae,
    bounds: &DaeEllipsoid,
    y_next: &Vector,
) -> Result<FilterState> {
    check_filter_shape(dae, bounds)?;
    check_observation(dae, y_next)?;
    let k = state.k + 1;
    if k > dae.horizon() {
        return Err(Error::InvalidInput(format!("step {k} is past the horizon {}", dae.horizon())));
    }
    check_rank(dae, k)?;
    let q1 = pulled_back_weight(&dae.b_seq()[k - 1], &bounds.q1_seq()[k - 1], "B_k")?;
    let q1_inv = q1
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::InvalidBounds(format!("Q1[{}] is not positive definite", k - 1)))?;
    let c = &dae.c_seq()[k - 1];
    let inner = symmetrize(&(q1_inv + c * &state.p * c.transpose()));
    let smallest = min_eigenvalue(&inner);
    if smallest < BREAKDOWN_EIGENVALUE {
        return Err(Error::NumericalBreakdown(format!("inner matrix at step {k} has eigenvalue {smallest:e}")));
    }
    let w = inner
        .cholesky()
        .map(|ch| symmetrize(&ch.inverse()))
        .ok_or_else(|| Error::NumericalBreakdown(format!("inner matrix at step {k}")))?;
    let (f, h, q2) = (&dae.f_seq()[k], &dae.h_seq()[k], &bounds.q2_seq()[k]);
    let info = f.transpose() * &w * f + h.transpose() * q2 * h;
    let p = spd_inverse_or_rank_error(&symmetrize(&info), k)?;
    let x_hat = &p * (f.transpose() * &w * c * &state.x_hat + h.transpose() * q2 * y_next);
    Ok(FilterState { k, x_hat, p })
}

/// Runs the filter over `y_0..y_T` and returns `(l, x_{T|T})`.
pub fn filter_run(dae: &DiscreteDae, bounds: &DaeEllipsoid, y_seq: &[Vector], ell: &Vector) -> Result<FilterRun> {
    if y_seq.len() != dae.horizon() + 1 {
        return Err(Error::InvalidInput(format!("expected {} observations, got {}", dae.horizon() + 1, y_seq.len())));
    }
    if ell.len() != dae.state_dim() {
        return Err(Error::InvalidInput("functional length must match the state dimension".into()));
    }
    let mut state = filter_init(dae, bounds, &y_seq[0])?;
    for y in &y_seq[1..] {
        state = filter_step(&state, dae, bounds, y)?;
    }
    Ok(FilterRun { estimate: ell.dot(&state.x_hat), last: state })
}
