use super::model::{ContinuousDae, ContinuousEllipsoid, TimeGrid};
use crate::error::{Error, Result};
use crate::linalg::{
    ensure_finite_vector, pseudo_inverse, range_membership, solve_least_squares, spd_inverse, spectral_norm,
    symmetrize, Matrix, Vector, DEFAULT_RANGE_TOL, DEFAULT_RANK_TOL,
};

/// `|K|` beyond this is treated as finite escape.
pub const RICCATI_BLOWUP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiReport {
    /// `(F x_hat(c), F^+' l0)`; `None` without observations or when `l0`
    /// is not in the range of `F'`.
    pub estimate: Option<f64>,
    /// `(F K(c) F^+' l0, F^+' l0)`, or `+inf` when `l0` is not in the range
    /// of `F'`.
    pub sigma_hat: f64,
    pub feasible: bool,
    /// Gains `K(t_k)` at every node.
    pub gains: Vec<Matrix>,
    /// Filtered states at every node; empty without observations.
    pub x_hat: Vec<Vector>,
}

/// Descriptor Riccati filter for the terminal functional `(l0, x(c))`.
///
/// `M = F K` obeys `M' = C K + K'C' - K'H'Q2HK + Q1^{-1}` with
/// `M(a) = F F^+ Q0^{-1} F F^+`, and is advanced by a linearly implicit
/// Euler step. `K` is recovered as `F^+ M`. The state equation
/// `d/dt F x = C x + K'H'Q2 (y - H x)`, `F x(a) = 0`, uses implicit Euler
/// with observations at `t_1..t_M`.
pub fn riccati_filter(
    sys: &ContinuousDae,
    bounds: &ContinuousEllipsoid,
    ell0: &Vector,
    y: Option<&[Vector]>,
    grid: &TimeGrid,
) -> Result<RiccatiReport> {
    bounds.check_against(sys)?;
    grid.check_within(sys)?;
    let (m, n) = (sys.equation_dim(), sys.state_dim());
    if ell0.len() != n {
        return Err(Error::InvalidInput(format!("l0 must have length {n}")));
    }
    ensure_finite_vector(ell0, "l0")?;
    if let Some(y) = y {
        if y.len() != grid.steps() + 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} observation samples, got {}",
                grid.steps() + 1,
                y.len()
            )));
        }
        for v in y {
            if v.len() != sys.observation_dim() {
                return Err(Error::InvalidInput("observation sample length mismatch".into()));
            }
            ensure_finite_vector(v, "observation")?;
        }
    }

    let f = sys.f();
    let f_pinv = pseudo_inverse(f, DEFAULT_RANK_TOL)?;
    let proj = f * &f_pinv;
    let h = grid.step();
    let t = grid.nodes();
    let eye_m = Matrix::identity(m, m);

    let mut big_m = symmetrize(&(&proj * spd_inverse(bounds.q0(), "Q0")? * &proj));
    let mut gains = vec![&f_pinv * &big_m];
    for k in 0..grid.steps() {
        let t1 = t[k + 1];
        let k_now = &gains[k];
        let c = sys.c().at(t1);
        let hm = sys.h().at(t1);
        let hqh = hm.transpose() * bounds.q2().at(t1) * &hm;
        let q1_inv = spd_inverse(&bounds.q1().at(t1), "Q1")?;

        let phi = &c * k_now + k_now.transpose() * c.transpose() - k_now.transpose() * &hqh * k_now + q1_inv;
        let g = f_pinv.transpose() * &hqh * &f_pinv;
        let a_lin = &c * &f_pinv - &big_m * &g;
        // (I/2 - h A) D + D (I/2 - h A)' = h Phi, via vec(X D + D X') = (I (x) X + X (x) I) vec D.
        let x = &eye_m * 0.5 - a_lin * h;
        let op = eye_m.kronecker(&x) + x.kronecker(&eye_m);
        let rhs = Vector::from_column_slice((phi * h).as_slice());
        let delta = op
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::RankDeficient(format!("Riccati step matrix is singular at t = {t1}")))?;
        big_m = symmetrize(&(big_m + Matrix::from_column_slice(m, m, delta.as_slice())));
        let k_next = &f_pinv * &big_m;
        let norm = spectral_norm(&k_next);
        if !norm.is_finite() || norm > RICCATI_BLOWUP {
            return Err(Error::RiccatiBlowup { t: t1, norm });
        }
        gains.push(k_next);
    }

    let mut x_hat = Vec::new();
    if let Some(y) = y {
        x_hat.reserve(grid.steps() + 1);
        x_hat.push(Vector::zeros(n));
        for k in 0..grid.steps() {
            let t1 = t[k + 1];
            let kt = gains[k + 1].transpose();
            let hm = sys.h().at(t1);
            let q2 = bounds.q2().at(t1);
            let step = f - sys.c().at(t1) * h + &kt * hm.transpose() * &q2 * &hm * h;
            let rhs = f * &x_hat[k] + &kt * hm.transpose() * &q2 * &y[k + 1] * h;
            let ls = solve_least_squares(&step, &rhs)?;
            if ls.rank_estimate < n {
                return Err(Error::RankDeficient(format!(
                    "state step matrix has rank {} < {n} at t = {t1}",
                    ls.rank_estimate
                )));
            }
            x_hat.push(ls.solution);
        }
    }

    let feasible = range_membership(&f.transpose(), ell0, DEFAULT_RANGE_TOL)?.is_member();
    let w = f_pinv.transpose() * ell0;
    let (sigma_hat, estimate) = if feasible {
        let sigma = (&big_m * &w).dot(&w).max(0.0);
        (sigma, x_hat.last().map(|x| (f * x).dot(&w)))
    } else {
        (f64::INFINITY, None)
    };
    Ok(RiccatiReport { estimate, sigma_hat, feasible, gains, x_hat })
}
