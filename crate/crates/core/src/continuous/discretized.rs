use super::model::{ContinuousDae, ContinuousEllipsoid, TimeGrid, TimeVector};
use crate::discrete_dae::{DaeEllipsoid, DiscreteDae};
use crate::error::{Error, Result};
use crate::linalg::{
    ensure_finite_vector, pseudo_inverse, solve_least_squares, spd_inverse, split, stack, Matrix, Vector,
    DEFAULT_RANGE_TOL, DEFAULT_RANK_TOL,
};
use crate::static_estimation::{apriori_estimate, representable, EstimateKind};

/// Implicit Euler reduction to a discrete descriptor system.
///
/// Step `k` reads `(F - h C(t_{k+1})) x_{k+1} - F x_k = w_k` where `w_k`
/// is the input increment over `[t_k, t_{k+1}]`; it carries the weight
/// `Q1(t_{k+1}) / h` so that `sum_k (Q1k w_k, w_k)` is the Riemann sum of
/// `int (Q1 f, f) dt`. Observations enter at `t_0..t_{M-1}` with weight
/// `h Q2(t_k)`; the terminal node is left unobserved.
pub fn discretize(
    sys: &ContinuousDae,
    bounds: &ContinuousEllipsoid,
    grid: &TimeGrid,
) -> Result<(DiscreteDae, DaeEllipsoid)> {
    bounds.check_against(sys)?;
    grid.check_within(sys)?;
    let h = grid.step();
    let t = grid.nodes();
    let steps = grid.steps();
    let m = sys.equation_dim();
    let f = sys.f();

    let mut f_seq = vec![f.clone()];
    f_seq.extend((1..=steps).map(|k| f - sys.c().at(t[k]) * h));
    let c_seq = vec![f.clone(); steps];
    let b_seq = vec![Matrix::identity(m, m); steps];
    let h_seq = (0..steps).map(|k| sys.h().at(t[k])).collect();
    let dae = DiscreteDae::new(f_seq, c_seq, b_seq, Matrix::identity(m, m), h_seq)?;

    let q1_seq = (1..=steps).map(|k| bounds.q1().at(t[k]) / h).collect();
    let q2_seq = (0..steps).map(|k| bounds.q2().at(t[k]) * h).collect();
    let weights = DaeEllipsoid::new(bounds.q0().clone(), q1_seq, q2_seq)?;
    Ok((dae, weights))
}

/// Grid samples of the continuous a priori estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousEstimate {
    /// Quadrature of `(l(t), p(t))`; `+inf` when the functional is not
    /// representable.
    pub sigma_hat: f64,
    /// `Q2 H p` at `t_0..t_{M-1}`.
    pub u_hat: Vec<Vector>,
    /// `p` at `t_0..t_M`.
    pub p: Vec<Vector>,
    /// `sum_k h (u_hat_k, y_k)` when observations were supplied.
    pub estimate: Option<f64>,
}

impl ContinuousEstimate {
    pub fn feasible(&self) -> bool {
        self.sigma_hat.is_finite()
    }

    fn infeasible() -> Self {
        Self { sigma_hat: f64::INFINITY, u_hat: Vec::new(), p: Vec::new(), estimate: None }
    }
}

fn sample_functional(sys: &ContinuousDae, ell: &TimeVector, grid: &TimeGrid) -> Result<Vec<Vector>> {
    ell.check_len(sys.state_dim())?;
    let mut out: Vec<Vector> = grid.nodes()[..grid.steps()].iter().map(|&t| ell.at(t)).collect();
    for v in &out {
        ensure_finite_vector(v, "functional")?;
    }
    out.push(Vector::zeros(sys.state_dim()));
    Ok(out)
}

/// Observations at the nodes; either `M` or `M + 1` samples, the terminal
/// one being ignored.
fn check_samples<'a>(sys: &ContinuousDae, grid: &TimeGrid, y: &'a [Vector]) -> Result<&'a [Vector]> {
    let steps = grid.steps();
    if y.len() != steps && y.len() != steps + 1 {
        return Err(Error::InvalidInput(format!(
            "expected {} or {} observation samples, got {}",
            steps,
            steps + 1,
            y.len()
        )));
    }
    for v in y {
        if v.len() != sys.observation_dim() {
            return Err(Error::InvalidInput("observation sample length mismatch".into()));
        }
        ensure_finite_vector(v, "observation")?;
    }
    Ok(&y[..steps])
}

fn weighted_sum(h: f64, a: &[Vector], b: &[Vector]) -> f64 {
    a.iter().zip(b).map(|(a, b)| h * a.dot(b)).sum()
}

/// A priori estimate of `int (l(t), x(t)) dt`, solved as the flattened
/// static problem of the discretized system.
pub fn apriori_estimate_continuous(
    sys: &ContinuousDae,
    bounds: &ContinuousEllipsoid,
    ell: &TimeVector,
    y: Option<&[Vector]>,
    grid: &TimeGrid,
) -> Result<ContinuousEstimate> {
    let (dae, weights) = discretize(sys, bounds, grid)?;
    let h = grid.step();
    let y = y.map(|y| check_samples(sys, grid, y)).transpose()?;
    let ell_disc: Vec<Vector> = sample_functional(sys, ell, grid)?.into_iter().map(|v| v * h).collect();

    let model = dae.flatten();
    let report = apriori_estimate(&model, &weights.flatten(EstimateKind::Apriori)?, &stack(&ell_disc), None)?;
    let Some(sol) = report.solution else {
        return Ok(ContinuousEstimate::infeasible());
    };
    let steps = grid.steps();
    let p = split(&sol.p, &vec![sys.state_dim(); steps + 1]);
    let u_hat: Vec<Vector> =
        split(&sol.u_hat, &vec![sys.observation_dim(); steps]).into_iter().map(|u| u / h).collect();
    Ok(ContinuousEstimate { sigma_hat: report.sigma_hat, estimate: y.map(|y| weighted_sum(h, &u_hat, y)), u_hat, p })
}

/// Unknowns `(p_0..p_M, z_0..z_M, d)` of the discretized boundary value
/// problem
///
/// ```text
/// F p_0 - a Q0^{-1} (F F^+ z_0 + d)                    = 0,   F'd = 0
/// A_{k+1} p_{k+1} - F p_k - a h Q1^{-1} z_{k+1}        = 0
/// A_k' z_k - F' z_{k+1} + (h/a) H'Q2H p_k + e h p_k    = h l_k
/// A_M' z_M + e h p_M                                   = 0
/// ```
///
/// with `A_k = F - h C(t_k)` and `A_0 = F`. `a = 1, e = 0` is the plain
/// problem; `e = 1` adds the Tikhonov term.
struct BvpSolution {
    p: Vec<Vector>,
    z: Vec<Vector>,
    residual: f64,
    rhs_norm: f64,
}

fn solve_bvp(
    sys: &ContinuousDae,
    bounds: &ContinuousEllipsoid,
    ell_nodes: &[Vector],
    grid: &TimeGrid,
    alpha: f64,
    eps: f64,
) -> Result<BvpSolution> {
    let (m, n) = (sys.equation_dim(), sys.state_dim());
    let steps = grid.steps();
    let h = grid.step();
    let t = grid.nodes();
    let f = sys.f();
    let ft = f.transpose();

    let p_col = |k: usize| k * n;
    let z_col = |k: usize| (steps + 1) * n + k * m;
    let d_col = (steps + 1) * (n + m);
    let cols = d_col + m;

    let e1 = 0;
    let e2 = m;
    let e3 = |k: usize| m + n + k * m;
    let e4 = |k: usize| m + n + steps * m + k * n;
    let rows = m + n + steps * m + (steps + 1) * n;

    let a_mat = |k: usize| if k == 0 { f.clone() } else { f - sys.c().at(t[k]) * h };
    let q0_inv = spd_inverse(bounds.q0(), "Q0")?;
    let proj = f * pseudo_inverse(f, DEFAULT_RANK_TOL)?;

    let mut sys_mat = Matrix::zeros(rows, cols);
    let mut rhs = Vector::zeros(rows);

    sys_mat.view_mut((e1, p_col(0)), (m, n)).copy_from(f);
    sys_mat.view_mut((e1, z_col(0)), (m, m)).copy_from(&(&q0_inv * &proj * -alpha));
    sys_mat.view_mut((e1, d_col), (m, m)).copy_from(&(&q0_inv * -alpha));
    sys_mat.view_mut((e2, d_col), (n, m)).copy_from(&ft);

    for k in 0..steps {
        let q1_inv = spd_inverse(&bounds.q1().at(t[k + 1]), "Q1")?;
        let r = e3(k);
        sys_mat.view_mut((r, p_col(k + 1)), (m, n)).copy_from(&a_mat(k + 1));
        sys_mat.view_mut((r, p_col(k)), (m, n)).copy_from(&(-f));
        sys_mat.view_mut((r, z_col(k + 1)), (m, m)).copy_from(&(q1_inv * (-alpha * h)));
    }
    for k in 0..=steps {
        let r = e4(k);
        sys_mat.view_mut((r, z_col(k)), (n, m)).copy_from(&a_mat(k).transpose());
        let mut diag = Matrix::identity(n, n) * (eps * h);
        if k < steps {
            sys_mat.view_mut((r, z_col(k + 1)), (n, m)).copy_from(&(-&ft));
            let hk = sys.h().at(t[k]);
            diag += hk.transpose() * bounds.q2().at(t[k]) * &hk * (h / alpha);
            rhs.rows_mut(r, n).copy_from(&(&ell_nodes[k] * h));
        }
        sys_mat.view_mut((r, p_col(k)), (n, n)).copy_from(&diag);
    }

    let ls = solve_least_squares(&sys_mat, &rhs)?;
    let x = ls.solution;
    Ok(BvpSolution {
        p: (0..=steps).map(|k| x.rows(p_col(k), n).into_owned()).collect(),
        z: (0..=steps).map(|k| x.rows(z_col(k), m).into_owned()).collect(),
        residual: ls.residual_norm,
        rhs_norm: rhs.norm(),
    })
}

/// Same contract as [`apriori_estimate_continuous`], solved as the
/// discretized two-point boundary value problem.
pub fn apriori_estimate_bvp(
    sys: &ContinuousDae,
    bounds: &ContinuousEllipsoid,
    ell: &TimeVector,
    y: Option<&[Vector]>,
    grid: &TimeGrid,
) -> Result<ContinuousEstimate> {
    let (dae, _) = discretize(sys, bounds, grid)?;
    let h = grid.step();
    let y = y.map(|y| check_samples(sys, grid, y)).transpose()?;
    let ell_nodes = sample_functional(sys, ell, grid)?;
    if !representable(&dae.flatten(), &stack(&ell_nodes), DEFAULT_RANGE_TOL)? {
        return Ok(ContinuousEstimate::infeasible());
    }
    let sol = solve_bvp(sys, bounds, &ell_nodes, grid, 1.0, 0.0)?;
    let steps = grid.steps();
    let u_hat: Vec<Vector> =
        (0..steps).map(|k| bounds.q2().at(grid.nodes()[k]) * sys.h().at(grid.nodes()[k]) * &sol.p[k]).collect();
    let sigma_hat = weighted_sum(h, &ell_nodes[..steps], &sol.p[..steps]).max(0.0);
    Ok(ContinuousEstimate { sigma_hat, estimate: y.map(|y| weighted_sum(h, &u_hat, y)), u_hat, p: sol.p })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TikhonovIterate {
    pub alpha: f64,
    /// `(1/alpha) Q2 H p` at `t_0..t_{M-1}`.
    pub u_hat: Vec<Vector>,
    pub z: Vec<Vector>,
    /// `|l - D*z - H*u| / |l|` in the discrete `L2` norm; zero when `l = 0`.
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TikhonovRun {
    pub iterates: Vec<TikhonovIterate>,
    /// `|u_{k+1} - u_k|` in the discrete `L2` norm.
    pub residuals: Vec<f64>,
}

/// Discrete `L2` norm `(sum_k h |v_k|^2)^{1/2}`.
pub fn grid_norm(h: f64, v: &[Vector]) -> f64 {
    v.iter().map(|x| h * x.norm_squared()).sum::<f64>().sqrt()
}

/// Regularized approximations of the a priori estimate, one per `alpha`.
///
/// For a representable functional the iterates converge to the a priori
/// weights and the defect vanishes; otherwise the defect stays bounded
/// away from zero.
pub fn tikhonov_approximate(
    sys: &ContinuousDae,
    bounds: &ContinuousEllipsoid,
    ell: &TimeVector,
    grid: &TimeGrid,
    alpha_seq: &[f64],
) -> Result<TikhonovRun> {
    if alpha_seq.is_empty() {
        return Err(Error::InvalidInput("empty regularization sequence".into()));
    }
    if alpha_seq.iter().any(|a| !(a.is_finite() && *a > 0.0)) || alpha_seq.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("regularization parameters must be positive and strictly decreasing".into()));
    }
    bounds.check_against(sys)?;
    grid.check_within(sys)?;
    let h = grid.step();
    let steps = grid.steps();
    let ell_nodes = sample_functional(sys, ell, grid)?;
    let ell_norm = grid_norm(h, &ell_nodes[..steps]);

    let mut iterates = Vec::with_capacity(alpha_seq.len());
    for &alpha in alpha_seq {
        let sol = solve_bvp(sys, bounds, &ell_nodes, grid, alpha, 1.0)?;
        if sol.residual > 1e-8 * (1.0 + sol.rhs_norm) {
            return Err(Error::SolveFailure(format!(
                "regularized system with alpha = {alpha:e} left residual {:e}",
                sol.residual
            )));
        }
        let u_hat = (0..steps)
            .map(|k| {
                let t = grid.nodes()[k];
                bounds.q2().at(t) * sys.h().at(t) * &sol.p[k] / alpha
            })
            .collect();
        // The defect at each node is the regularized dual itself.
        let defect = if ell_norm > 0.0 { grid_norm(h, &sol.p) / ell_norm } else { 0.0 };
        iterates.push(TikhonovIterate { alpha, u_hat, z: sol.z, defect });
    }
    let residuals = iterates
        .windows(2)
        .map(|w| {
            let diff: Vec<Vector> = w[1].u_hat.iter().zip(&w[0].u_hat).map(|(a, b)| a - b).collect();
            grid_norm(h, &diff)
        })
        .collect();
    Ok(TikhonovRun { iterates, residuals })
}
