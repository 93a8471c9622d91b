//! Discrete-time descriptor systems
//!
//! ```text
//! F_0 x_0             = S x0g
//! F_{k+1} x_{k+1} - C_k x_k = B_k f_k,   k = 0..T-1
//! y_k = H_k x_k + g_k
//! ```
//!
//! The horizon `T` counts transitions, so the state is `(x_0, ..., x_T)`.
//! Observations are taken either at every state (`T + 1` matrices `H_k`) or
//! at every state but the last (`T` matrices), the latter leaving the
//! terminal state observation-free.

use crate::error::{Error, Result};
use crate::linalg::{
    block_diag, check_spd, ensure_finite_matrix, ensure_finite_vector, solve_least_squares, spd_inverse, split, stack,
    Matrix, Vector, DEFAULT_RANGE_TOL,
};
use crate::static_estimation::{aposteriori_estimate, EstimateKind, StaticEllipsoid, StaticModel, BRACKET_CLAMP};

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDae {
    f_seq: Vec<Matrix>,
    c_seq: Vec<Matrix>,
    b_seq: Vec<Matrix>,
    s: Matrix,
    h_seq: Vec<Matrix>,
}

impl DiscreteDae {
    pub fn new(
        f_seq: Vec<Matrix>,
        c_seq: Vec<Matrix>,
        b_seq: Vec<Matrix>,
        s: Matrix,
        h_seq: Vec<Matrix>,
    ) -> Result<Self> {
        let horizon = c_seq.len();
        if f_seq.len() != horizon + 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} matrices F_k for horizon {horizon}, got {}",
                horizon + 1,
                f_seq.len()
            )));
        }
        if b_seq.len() != horizon {
            return Err(Error::InvalidInput(format!("expected {horizon} matrices B_k, got {}", b_seq.len())));
        }
        let observed = h_seq.len();
        if observed != horizon + 1 && !(horizon >= 1 && observed == horizon) {
            return Err(Error::InvalidInput(format!(
                "expected {} (or {horizon}) matrices H_k, got {observed}",
                horizon + 1
            )));
        }
        let (m, n) = f_seq[0].shape();
        if m == 0 || n == 0 {
            return Err(Error::InvalidInput("F_0 must be non-empty".into()));
        }
        for (k, f) in f_seq.iter().enumerate() {
            if f.shape() != (m, n) {
                return Err(Error::InvalidInput(format!("F_{k} is not {m}x{n}")));
            }
            ensure_finite_matrix(f, "F_k")?;
        }
        for (k, c) in c_seq.iter().enumerate() {
            if c.shape() != (m, n) {
                return Err(Error::InvalidInput(format!("C_{k} is not {m}x{n}")));
            }
            ensure_finite_matrix(c, "C_k")?;
        }
        let p = b_seq.first().map(|b| b.ncols()).unwrap_or(1);
        for (k, b) in b_seq.iter().enumerate() {
            if b.shape() != (m, p) || p == 0 {
                return Err(Error::InvalidInput(format!("B_{k} is not {m}x{p}")));
            }
            ensure_finite_matrix(b, "B_k")?;
        }
        if s.nrows() != m || s.ncols() == 0 {
            return Err(Error::InvalidInput(format!("S must have {m} rows")));
        }
        ensure_finite_matrix(&s, "S")?;
        let l = h_seq[0].nrows();
        for (k, h) in h_seq.iter().enumerate() {
            if h.shape() != (l, n) || l == 0 {
                return Err(Error::InvalidInput(format!("H_{k} is not {l}x{n}")));
            }
            ensure_finite_matrix(h, "H_k")?;
        }
        Ok(Self { f_seq, c_seq, b_seq, s, h_seq })
    }

    /// Number of transitions `T`.
    pub fn horizon(&self) -> usize {
        self.c_seq.len()
    }
    pub fn state_dim(&self) -> usize {
        self.f_seq[0].ncols()
    }
    pub fn equation_dim(&self) -> usize {
        self.f_seq[0].nrows()
    }
    pub fn input_dim(&self) -> usize {
        self.b_seq.first().map(|b| b.ncols()).unwrap_or(0)
    }
    pub fn initial_dim(&self) -> usize {
        self.s.ncols()
    }
    pub fn observation_dim(&self) -> usize {
        self.h_seq[0].nrows()
    }
    /// Number of observed time instants.
    pub fn observed_steps(&self) -> usize {
        self.h_seq.len()
    }
    pub fn f_seq(&self) -> &[Matrix] {
        &self.f_seq
    }
    pub fn c_seq(&self) -> &[Matrix] {
        &self.c_seq
    }
    pub fn b_seq(&self) -> &[Matrix] {
        &self.b_seq
    }
    pub fn s(&self) -> &Matrix {
        &self.s
    }
    pub fn h_seq(&self) -> &[Matrix] {
        &self.h_seq
    }

    /// Assembles the equivalent static model over the stacked state
    /// `(x_0..x_T)`, input `(x0g, f_0..f_{T-1})` and noise `(g_0..)`.
    pub fn flatten(&self) -> StaticModel {
        let t = self.horizon();
        let (m, n) = (self.equation_dim(), self.state_dim());
        let (p, q, l) = (self.input_dim(), self.initial_dim(), self.observation_dim());
        let mut f = Matrix::zeros(m * (t + 1), n * (t + 1));
        f.view_mut((0, 0), (m, n)).copy_from(&self.f_seq[0]);
        for k in 0..t {
            f.view_mut((m * (k + 1), n * k), (m, n)).copy_from(&(-&self.c_seq[k]));
            f.view_mut((m * (k + 1), n * (k + 1)), (m, n)).copy_from(&self.f_seq[k + 1]);
        }
        let mut b = Matrix::zeros(m * (t + 1), q + p * t);
        b.view_mut((0, 0), (m, q)).copy_from(&self.s);
        for k in 0..t {
            b.view_mut((m * (k + 1), q + p * k), (m, p)).copy_from(&self.b_seq[k]);
        }
        let obs = self.observed_steps();
        let mut h = Matrix::zeros(l * obs, n * (t + 1));
        for (k, hk) in self.h_seq.iter().enumerate() {
            h.view_mut((l * k, n * k), (l, n)).copy_from(hk);
        }
        StaticModel::new(f, b, h).expect("flattened blocks are consistent by construction")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DaeEllipsoid {
    q0: Matrix,
    q1_seq: Vec<Matrix>,
    q2_seq: Vec<Matrix>,
}

impl DaeEllipsoid {
    pub fn new(q0: Matrix, q1_seq: Vec<Matrix>, q2_seq: Vec<Matrix>) -> Result<Self> {
        check_spd(&q0, "Q0")?;
        for (k, q) in q1_seq.iter().enumerate() {
            check_spd(q, &format!("Q1[{k}]"))?;
        }
        for (k, q) in q2_seq.iter().enumerate() {
            check_spd(q, &format!("Q2[{k}]"))?;
        }
        Ok(Self { q0, q1_seq, q2_seq })
    }

    pub fn q0(&self) -> &Matrix {
        &self.q0
    }
    pub fn q1_seq(&self) -> &[Matrix] {
        &self.q1_seq
    }
    pub fn q2_seq(&self) -> &[Matrix] {
        &self.q2_seq
    }

    pub fn check_against(&self, dae: &DiscreteDae) -> Result<()> {
        if self.q0.nrows() != dae.initial_dim() {
            return Err(Error::InvalidInput(format!(
                "Q0 is {0}x{0} but S has {1} columns",
                self.q0.nrows(),
                dae.initial_dim()
            )));
        }
        if self.q1_seq.len() != dae.horizon() {
            return Err(Error::InvalidInput(format!(
                "expected {} matrices Q1, got {}",
                dae.horizon(),
                self.q1_seq.len()
            )));
        }
        if self.q1_seq.iter().any(|q| q.nrows() != dae.input_dim()) {
            return Err(Error::InvalidInput("Q1 blocks must match the input dimension".into()));
        }
        if self.q2_seq.len() != dae.observed_steps() {
            return Err(Error::InvalidInput(format!(
                "expected {} matrices Q2, got {}",
                dae.observed_steps(),
                self.q2_seq.len()
            )));
        }
        if self.q2_seq.iter().any(|q| q.nrows() != dae.observation_dim()) {
            return Err(Error::InvalidInput("Q2 blocks must match the observation dimension".into()));
        }
        Ok(())
    }

    /// Block-diagonal weights of the flattened model; `Q0` leads the input block.
    pub fn flatten(&self, kind: EstimateKind) -> Result<StaticEllipsoid> {
        let mut q1_blocks = vec![self.q0.clone()];
        q1_blocks.extend(self.q1_seq.iter().cloned());
        StaticEllipsoid::new(block_diag(&q1_blocks), block_diag(&self.q2_seq), kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySolution {
    pub x_hat: Vec<Vector>,
    /// Dual trajectory whose pairing with the functional gives `sigma^2` factor.
    pub p: Vec<Vector>,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEstimate {
    pub sigma_hat: f64,
    pub solution: Option<TrajectorySolution>,
}

impl TrajectoryEstimate {
    pub fn feasible(&self) -> bool {
        self.solution.is_some()
    }
    pub fn estimate(&self) -> Option<f64> {
        self.solution.as_ref().map(|s| s.estimate)
    }
}

fn check_sequences(dae: &DiscreteDae, ell_seq: &[Vector], y_seq: &[Vector]) -> Result<()> {
    if ell_seq.len() != dae.horizon() + 1 {
        return Err(Error::InvalidInput(format!(
            "expected {} functional blocks, got {}",
            dae.horizon() + 1,
            ell_seq.len()
        )));
    }
    if ell_seq.iter().any(|l| l.len() != dae.state_dim()) {
        return Err(Error::InvalidInput("functional blocks must match the state dimension".into()));
    }
    if y_seq.len() != dae.observed_steps() {
        return Err(Error::InvalidInput(format!(
            "expected {} observations, got {}",
            dae.observed_steps(),
            y_seq.len()
        )));
    }
    if y_seq.iter().any(|y| y.len() != dae.observation_dim()) {
        return Err(Error::InvalidInput("observation length mismatch".into()));
    }
    for v in ell_seq.iter().chain(y_seq) {
        ensure_finite_vector(v, "sequence entry")?;
    }
    Ok(())
}

/// Minimax a posteriori estimate of `sum_k (l_k, x_k)`, computed through
/// the flattened static model.
pub fn variational_estimate(
    dae: &DiscreteDae,
    bounds: &DaeEllipsoid,
    ell_seq: &[Vector],
    y_seq: &[Vector],
) -> Result<TrajectoryEstimate> {
    bounds.check_against(dae)?;
    check_sequences(dae, ell_seq, y_seq)?;
    let model = dae.flatten();
    let weights = bounds.flatten(EstimateKind::Aposteriori)?;
    let report = aposteriori_estimate(&model, &weights, &stack(ell_seq), &stack(y_seq))?;
    let sizes = vec![dae.state_dim(); dae.horizon() + 1];
    Ok(TrajectoryEstimate {
        sigma_hat: report.sigma_hat,
        solution: report.solution.map(|s| TrajectorySolution {
            x_hat: split(s.x_hat.as_ref().expect("a posteriori centre"), &sizes),
            p: split(&s.p, &sizes),
            estimate: s.estimate.expect("a posteriori estimate"),
        }),
    })
}

/// Same contract as [`variational_estimate`], but the saddle system is
/// assembled time step by time step from the forward/adjoint recursions,
/// with unknowns interleaved as `(x_0, p_0, x_1, p_1, ...)`.
pub fn estimate_from_block(
    dae: &DiscreteDae,
    bounds: &DaeEllipsoid,
    ell_seq: &[Vector],
    y_seq: &[Vector],
) -> Result<TrajectoryEstimate> {
    bounds.check_against(dae)?;
    check_sequences(dae, ell_seq, y_seq)?;
    let t = dae.horizon();
    let (m, n) = (dae.equation_dim(), dae.state_dim());
    let w = n + m;
    let x_at = |k: usize| k * w;
    let p_at = |k: usize| k * w + n;
    let primal_row = |k: usize| k * w;
    let adjoint_row = |k: usize| k * w + m;

    let q0_inv = spd_inverse(bounds.q0(), "Q0")?;
    let mut sys = Matrix::zeros(w * (t + 1), w * (t + 1));
    for k in 0..=t {
        // F_k x_k - C_{k-1} x_{k-1} - R_k p_k = 0
        let r_k = if k == 0 {
            dae.s() * &q0_inv * dae.s().transpose()
        } else {
            let b = &dae.b_seq()[k - 1];
            b * spd_inverse(&bounds.q1_seq()[k - 1], "Q1")? * b.transpose()
        };
        sys.view_mut((primal_row(k), x_at(k)), (m, n)).copy_from(&dae.f_seq()[k]);
        sys.view_mut((primal_row(k), p_at(k)), (m, m)).copy_from(&(-r_k));
        if k > 0 {
            sys.view_mut((primal_row(k), x_at(k - 1)), (m, n)).copy_from(&(-&dae.c_seq()[k - 1]));
        }
        // F_k' p_k - C_k' p_{k+1} + H_k' Q2_k H_k x_k = rhs_k
        sys.view_mut((adjoint_row(k), p_at(k)), (n, m)).copy_from(&dae.f_seq()[k].transpose());
        if k < t {
            sys.view_mut((adjoint_row(k), p_at(k + 1)), (n, m)).copy_from(&(-dae.c_seq()[k].transpose()));
        }
        if k < dae.observed_steps() {
            let h = &dae.h_seq()[k];
            sys.view_mut((adjoint_row(k), x_at(k)), (n, n)).copy_from(&(h.transpose() * &bounds.q2_seq()[k] * h));
        }
    }

    let rhs_from = |blocks: &dyn Fn(usize) -> Vector| {
        let mut rhs = Vector::zeros(w * (t + 1));
        for k in 0..=t {
            rhs.rows_mut(adjoint_row(k), n).copy_from(&blocks(k));
        }
        rhs
    };

    let prior = solve_least_squares(&sys, &rhs_from(&|k| ell_seq[k].clone()))?;
    let ell_norm = ell_seq.iter().map(|l| l.norm_squared()).sum::<f64>().sqrt();
    if prior.residual_norm > DEFAULT_RANGE_TOL * (1.0 + ell_norm) {
        return Ok(TrajectoryEstimate { sigma_hat: f64::INFINITY, solution: None });
    }
    let posterior = solve_least_squares(
        &sys,
        &rhs_from(&|k| {
            if k < dae.observed_steps() {
                dae.h_seq()[k].transpose() * &bounds.q2_seq()[k] * &y_seq[k]
            } else {
                Vector::zeros(n)
            }
        }),
    )?;

    let x_hat: Vec<Vector> = (0..=t).map(|k| posterior.solution.rows(x_at(k), n).into_owned()).collect();
    let p: Vec<Vector> = (0..=t).map(|k| prior.solution.rows(x_at(k), n).into_owned()).collect();
    let bracket = 1.0
        - (0..dae.observed_steps())
            .map(|k| {
                let q2 = &bounds.q2_seq()[k];
                (&y_seq[k] - &dae.h_seq()[k] * &x_hat[k]).dot(&(q2 * &y_seq[k]))
            })
            .sum::<f64>();
    if bracket < BRACKET_CLAMP {
        return Err(Error::InconsistentData { bracket });
    }
    let ell_p: f64 = ell_seq.iter().zip(&p).map(|(l, p)| l.dot(p)).sum();
    let estimate = ell_seq.iter().zip(&x_hat).map(|(l, x)| l.dot(x)).sum();
    Ok(TrajectoryEstimate {
        sigma_hat: bracket.max(0.0).sqrt() * ell_p.max(0.0).sqrt(),
        solution: Some(TrajectorySolution { x_hat, p, estimate }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }
    fn v(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    fn scalar_chain(t: usize) -> (DiscreteDae, DaeEllipsoid) {
        let dae = DiscreteDae::new(vec![s(1.0); t + 1], vec![s(1.0); t], vec![s(1.0); t], s(1.0), vec![s(1.0); t + 1])
            .unwrap();
        let bounds = DaeEllipsoid::new(s(1.0), vec![s(1.0); t], vec![s(1.0); t + 1]).unwrap();
        (dae, bounds)
    }

    #[test]
    fn flatten_single_step() {
        let (dae, _) = scalar_chain(0);
        let m = dae.flatten();
        assert_eq!(m.f(), &s(1.0));
        assert_eq!(m.b(), &s(1.0));
        assert_eq!(m.h(), &s(1.0));
    }

    #[test]
    fn flatten_two_steps() {
        let (dae, _) = scalar_chain(1);
        let m = dae.flatten();
        assert_eq!(m.f(), &Matrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0]));
        assert_eq!(m.b(), &Matrix::identity(2, 2));
        assert_eq!(m.h(), &Matrix::identity(2, 2));
    }

    #[test]
    fn flatten_zero_blocks() {
        let z = Matrix::zeros(2, 2);
        let dae =
            DiscreteDae::new(vec![z.clone(); 3], vec![z.clone(); 2], vec![z.clone(); 2], z.clone(), vec![z.clone(); 3])
                .unwrap();
        let m = dae.flatten();
        assert_eq!(m.f(), &Matrix::zeros(6, 6));
        assert_eq!(m.b(), &Matrix::zeros(6, 6));
        assert_eq!(m.h(), &Matrix::zeros(6, 6));
    }

    #[test]
    fn flatten_with_unobserved_terminal_state() {
        let dae = DiscreteDae::new(vec![s(1.0); 3], vec![s(2.0); 2], vec![s(1.0); 2], s(1.0), vec![s(1.0); 2]).unwrap();
        let m = dae.flatten();
        assert_eq!(m.h(), &Matrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn shape_mismatch() {
        let r = DiscreteDae::new(vec![s(1.0); 2], vec![s(1.0); 1], vec![], s(1.0), vec![s(1.0); 2]);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
        let r =
            DiscreteDae::new(vec![s(1.0), Matrix::zeros(2, 1)], vec![s(1.0)], vec![s(1.0)], s(1.0), vec![s(1.0); 2]);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
        let r = DiscreteDae::new(vec![s(1.0)], vec![], vec![], s(1.0), vec![]);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn single_step_matches_static() {
        let (dae, bounds) = scalar_chain(0);
        for est in [variational_estimate, estimate_from_block] {
            let r = est(&dae, &bounds, &[v(1.0)], &[v(1.0)]).unwrap();
            let sol = r.solution.unwrap();
            assert!((sol.x_hat[0][0] - 0.5).abs() < 1e-14);
            assert!((r.sigma_hat - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_functional() {
        let (dae, bounds) = scalar_chain(2);
        let ys = vec![v(0.3), v(-0.1), v(0.2)];
        for est in [variational_estimate, estimate_from_block] {
            let r = est(&dae, &bounds, &[v(0.0), v(0.0), v(0.0)], &ys).unwrap();
            assert_eq!(r.sigma_hat, 0.0);
            assert!(r.estimate().unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn two_step_chain_against_quadratic_oracle() {
        // Centre of {x0^2 + (x1-x0)^2 + (1-x0)^2 + (1-x1)^2 <= 1} is (0.6, 0.8),
        // minimum 0.6; half-width along x1 is sqrt(0.4 * 0.6).
        let (dae, bounds) = scalar_chain(1);
        for est in [variational_estimate, estimate_from_block] {
            let r = est(&dae, &bounds, &[v(0.0), v(1.0)], &[v(1.0), v(1.0)]).unwrap();
            let sol = r.solution.as_ref().unwrap();
            assert!((sol.x_hat[0][0] - 0.6).abs() < 1e-13);
            assert!((sol.estimate - 0.8).abs() < 1e-13);
            assert!((r.sigma_hat - 0.24f64.sqrt()).abs() < 1e-13);
        }
    }

    #[test]
    fn non_representable_functional() {
        // x_1 is neither constrained nor observed: F_1 = 0, H_1 = 0.
        let dae =
            DiscreteDae::new(vec![s(1.0), s(0.0)], vec![s(0.0)], vec![s(1.0)], s(1.0), vec![s(1.0), s(0.0)]).unwrap();
        let bounds = DaeEllipsoid::new(s(1.0), vec![s(1.0)], vec![s(1.0); 2]).unwrap();
        for est in [variational_estimate, estimate_from_block] {
            let r = est(&dae, &bounds, &[v(0.0), v(1.0)], &[v(0.5), v(0.0)]).unwrap();
            assert!(!r.feasible());
            assert_eq!(r.sigma_hat, f64::INFINITY);
        }
    }
}
