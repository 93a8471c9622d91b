//! Minimax estimation of a linear functional `(l, x)` for the algebraic
//! model `F x = B f` observed through `y = H x + noise`, with ellipsoidal
//! bounds on the uncertain input and on the noise.
//!
//! Both estimators reduce to the same saddle-point system
//!
//! ```text
//! F a       - B Q1^{-1} B' b = 0
//! H'Q2H a   + F' b           = r
//! ```
//!
//! solved in minimum-norm least-squares form: with `r = l` it yields the
//! dual pair `(p, z)` of the a priori problem, with `r = H'Q2 y` it yields
//! the a posteriori centre `(x, p)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{
    check_spd, ensure_finite_vector, null_space_with_cutoff, range_membership, solve_least_squares, spd_inverse,
    Matrix, Vector, DEFAULT_RANGE_TOL, DEFAULT_RANK_TOL,
};

/// Brackets this far below zero are rounding; anything lower means the
/// data cannot be explained by any admissible disturbance.
pub const BRACKET_CLAMP: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct StaticModel {
    f: Matrix,
    b: Matrix,
    h: Matrix,
}

impl StaticModel {
    pub fn new(f: Matrix, b: Matrix, h: Matrix) -> Result<Self> {
        for (m, name) in [(&f, "F"), (&b, "B"), (&h, "H")] {
            if m.nrows() == 0 || m.ncols() == 0 {
                return Err(Error::InvalidInput(format!("{name} must be non-empty")));
            }
            crate::linalg::ensure_finite_matrix(m, name)?;
        }
        if f.ncols() != h.ncols() {
            return Err(Error::InvalidInput(format!("F has {} columns but H has {}", f.ncols(), h.ncols())));
        }
        if f.nrows() != b.nrows() {
            return Err(Error::InvalidInput(format!("F has {} rows but B has {}", f.nrows(), b.nrows())));
        }
        Ok(Self { f, b, h })
    }

    pub fn f(&self) -> &Matrix {
        &self.f
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn h(&self) -> &Matrix {
        &self.h
    }
    /// `n`
    pub fn state_dim(&self) -> usize {
        self.f.ncols()
    }
    /// `m`
    pub fn equation_dim(&self) -> usize {
        self.f.nrows()
    }
    /// `p`
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    /// `l`
    pub fn observation_dim(&self) -> usize {
        self.h.nrows()
    }

    /// `[F' | H']`, whose column space is the set of representable functionals.
    pub fn dual_columns(&self) -> Matrix {
        let n = self.state_dim();
        let (m, l) = (self.equation_dim(), self.observation_dim());
        let mut cols = Matrix::zeros(n, m + l);
        cols.view_mut((0, 0), (n, m)).copy_from(&self.f.transpose());
        cols.view_mut((0, m), (n, l)).copy_from(&self.h.transpose());
        cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKind {
    /// `(Q1 f, f) <= 1` and `tr(Q2 R) <= 1` separately; noise is random.
    Apriori,
    /// `(Q1 f, f) + (Q2 g, g) <= 1` jointly; noise is deterministic.
    Aposteriori,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticEllipsoid {
    q1: Matrix,
    q2: Matrix,
    kind: EstimateKind,
}

impl StaticEllipsoid {
    pub fn new(q1: Matrix, q2: Matrix, kind: EstimateKind) -> Result<Self> {
        check_spd(&q1, "Q1")?;
        check_spd(&q2, "Q2")?;
        Ok(Self { q1, q2, kind })
    }

    pub fn q1(&self) -> &Matrix {
        &self.q1
    }
    pub fn q2(&self) -> &Matrix {
        &self.q2
    }
    pub fn kind(&self) -> EstimateKind {
        self.kind
    }

    pub fn with_kind(&self, kind: EstimateKind) -> Self {
        Self { kind, ..self.clone() }
    }

    fn check_against(&self, model: &StaticModel) -> Result<()> {
        if self.q1.nrows() != model.input_dim() {
            return Err(Error::InvalidInput(format!(
                "Q1 is {0}x{0} but B has {1} columns",
                self.q1.nrows(),
                model.input_dim()
            )));
        }
        if self.q2.nrows() != model.observation_dim() {
            return Err(Error::InvalidInput(format!(
                "Q2 is {0}x{0} but H has {1} rows",
                self.q2.nrows(),
                model.observation_dim()
            )));
        }
        Ok(())
    }
}

/// Everything produced by a feasible estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticSolution {
    /// Optimal observation weights `Q2 H p`.
    pub u_hat: Vector,
    pub p: Vector,
    pub z_hat: Vector,
    /// A posteriori centre; `None` for a priori estimates.
    pub x_hat: Option<Vector>,
    pub p_hat: Option<Vector>,
    /// Value of the estimate; `None` when no observation was supplied.
    pub estimate: Option<f64>,
    /// Residual of the saddle-point solve for `(p, z)`.
    pub system_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticEstimateReport {
    /// Minimax error; `+inf` exactly when the functional is not representable.
    pub sigma_hat: f64,
    pub solution: Option<StaticSolution>,
}

impl StaticEstimateReport {
    pub fn feasible(&self) -> bool {
        self.solution.is_some()
    }

    fn infeasible() -> Self {
        Self { sigma_hat: f64::INFINITY, solution: None }
    }

    pub fn estimate(&self) -> Option<f64> {
        self.solution.as_ref().and_then(|s| s.estimate)
    }
}

fn check_ell(model: &StaticModel, ell: &Vector) -> Result<()> {
    if ell.len() != model.state_dim() {
        return Err(Error::InvalidInput(format!(
            "functional has length {} but the state has dimension {}",
            ell.len(),
            model.state_dim()
        )));
    }
    ensure_finite_vector(ell, "functional")
}

fn check_y(model: &StaticModel, y: &Vector) -> Result<()> {
    if y.len() != model.observation_dim() {
        return Err(Error::InvalidInput(format!(
            "observation has length {} but H has {} rows",
            y.len(),
            model.observation_dim()
        )));
    }
    ensure_finite_vector(y, "observation")
}

/// Whether `ell = F'z + H'u` for some `z`, `u`.
pub fn representable(model: &StaticModel, ell: &Vector, tol: f64) -> Result<bool> {
    check_ell(model, ell)?;
    Ok(range_membership(&model.dual_columns(), ell, tol)?.is_member())
}

/// Solves `[F, -B Q1^{-1} B'; H'Q2H, F'] (a, b) = (0, rhs)`.
pub(crate) fn solve_saddle(
    model: &StaticModel,
    q1_inv: &Matrix,
    q2: &Matrix,
    rhs: &Vector,
) -> Result<(Vector, Vector, f64)> {
    let (n, m) = (model.state_dim(), model.equation_dim());
    let r = model.b() * q1_inv * model.b().transpose();
    let hqh = model.h().transpose() * q2 * model.h();
    let mut system = DMatrix::zeros(m + n, n + m);
    system.view_mut((0, 0), (m, n)).copy_from(model.f());
    system.view_mut((0, n), (m, m)).copy_from(&(-r));
    system.view_mut((m, 0), (n, n)).copy_from(&hqh);
    system.view_mut((m, n), (n, m)).copy_from(&model.f().transpose());
    let mut full_rhs = Vector::zeros(m + n);
    full_rhs.rows_mut(m, n).copy_from(rhs);
    let ls = solve_least_squares(&system, &full_rhs)?;
    let a = ls.solution.rows(0, n).into_owned();
    let b = ls.solution.rows(n, m).into_owned();
    Ok((a, b, ls.residual_norm))
}

/// Minimax a priori estimate `(u_hat, y)` of `(l, x)`.
///
/// The reported `sigma_hat` is the mean-squared error `(l, p)` itself (no
/// square root). The affine constant of the estimate is zero for centred
/// ellipsoids.
pub fn apriori_estimate(
    model: &StaticModel,
    bounds: &StaticEllipsoid,
    ell: &Vector,
    y: Option<&Vector>,
) -> Result<StaticEstimateReport> {
    if bounds.kind() != EstimateKind::Apriori {
        return Err(Error::InvalidBounds("a priori estimation needs a priori bounds".into()));
    }
    bounds.check_against(model)?;
    check_ell(model, ell)?;
    if let Some(y) = y {
        check_y(model, y)?;
    }
    if !representable(model, ell, DEFAULT_RANGE_TOL)? {
        return Ok(StaticEstimateReport::infeasible());
    }
    let q1_inv = spd_inverse(bounds.q1(), "Q1")?;
    let (p, z_hat, residual) = solve_saddle(model, &q1_inv, bounds.q2(), ell)?;
    let u_hat = bounds.q2() * model.h() * &p;
    let sigma_hat = ell.dot(&p).max(0.0);
    Ok(StaticEstimateReport {
        sigma_hat,
        solution: Some(StaticSolution {
            estimate: y.map(|y| u_hat.dot(y)),
            u_hat,
            p,
            z_hat,
            x_hat: None,
            p_hat: None,
            system_residual: residual,
        }),
    })
}

/// Minimax a posteriori estimate: `(l, x_hat)` where `x_hat` is the centre
/// of the reachability set, with worst-case error
/// `[1 - (y - H x_hat, Q2 y)]^{1/2} (l, p)^{1/2}`.
pub fn aposteriori_estimate(
    model: &StaticModel,
    bounds: &StaticEllipsoid,
    ell: &Vector,
    y: &Vector,
) -> Result<StaticEstimateReport> {
    if bounds.kind() != EstimateKind::Aposteriori {
        return Err(Error::InvalidBounds("a posteriori estimation needs a posteriori bounds".into()));
    }
    bounds.check_against(model)?;
    check_ell(model, ell)?;
    check_y(model, y)?;
    if !representable(model, ell, DEFAULT_RANGE_TOL)? {
        return Ok(StaticEstimateReport::infeasible());
    }
    let q1_inv = spd_inverse(bounds.q1(), "Q1")?;
    let q2 = bounds.q2();
    let hq2y = model.h().transpose() * q2 * y;
    let (x_hat, p_hat, _) = solve_saddle(model, &q1_inv, q2, &hq2y)?;
    let (p, z_hat, residual) = solve_saddle(model, &q1_inv, q2, ell)?;

    let bracket = 1.0 - (y - model.h() * &x_hat).dot(&(q2 * y));
    if bracket < BRACKET_CLAMP {
        return Err(Error::InconsistentData { bracket });
    }
    let sigma_hat = bracket.max(0.0).sqrt() * ell.dot(&p).max(0.0).sqrt();
    let u_hat = q2 * model.h() * &p;
    Ok(StaticEstimateReport {
        sigma_hat,
        solution: Some(StaticSolution {
            estimate: Some(ell.dot(&x_hat)),
            u_hat,
            p,
            z_hat,
            x_hat: Some(x_hat),
            p_hat: Some(p_hat),
            system_residual: residual,
        }),
    })
}

/// A priori worst-case mean-squared error of the arbitrary affine estimate
/// `(u, y) + c`:
///
/// `sup { ((l - H'u, x) - c)^2 : F x in B(G) } + (Q2^{-1} u, u)`.
///
/// The supremum of a linear functional over the ellipsoid section is
/// evaluated in closed form; it is `+inf` when `l - H'u` is not orthogonal
/// to `ker F`.
pub fn worst_case_error_of(
    model: &StaticModel,
    bounds: &StaticEllipsoid,
    ell: &Vector,
    u: &Vector,
    c: f64,
) -> Result<f64> {
    bounds.check_against(model)?;
    check_ell(model, ell)?;
    check_y(model, u)?;
    let q2_inv = spd_inverse(bounds.q2(), "Q2")?;
    let noise_part = u.dot(&(&q2_inv * u));

    let a = ell - model.h().transpose() * u;
    let z = match range_membership(&model.f().transpose(), &a, DEFAULT_RANGE_TOL)? {
        crate::linalg::RangeMembership::Member { coefficients } => coefficients,
        crate::linalg::RangeMembership::NotMember { .. } => return Ok(f64::INFINITY),
    };
    // For x with F x = B f we have (a, x) = (z, B f); f is restricted to the
    // inputs whose image lies in range F.
    let f_pinv = crate::linalg::pseudo_inverse(model.f(), DEFAULT_RANK_TOL)?;
    let m = model.equation_dim();
    let outside = (Matrix::identity(m, m) - model.f() * &f_pinv) * model.b();
    // `outside` is often zero up to rounding, so the rank cutoff is taken
    // relative to B rather than to `outside` itself.
    let cut = DEFAULT_RANK_TOL * crate::linalg::spectral_norm(model.b());
    let basis = null_space_with_cutoff(&outside, cut)?;
    let sup = if basis.ncols() == 0 {
        0.0
    } else {
        let g = basis.transpose() * model.b().transpose() * &z;
        let reduced = basis.transpose() * bounds.q1() * &basis;
        let w = reduced
            .cholesky()
            .ok_or_else(|| Error::InvalidBounds("Q1 restricted to admissible inputs".into()))?
            .solve(&g);
        g.dot(&w).max(0.0).sqrt()
    };
    Ok((sup + c.abs()).powi(2) + noise_part)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }
    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }
    fn scalar_model() -> StaticModel {
        StaticModel::new(s(1.0), s(1.0), s(1.0)).unwrap()
    }
    fn unit_bounds(kind: EstimateKind) -> StaticEllipsoid {
        StaticEllipsoid::new(s(1.0), s(1.0), kind).unwrap()
    }

    #[test]
    fn representability_examples() {
        assert!(representable(&scalar_model(), &v(&[7.0]), 1e-8).unwrap());
        let zero = StaticModel::new(s(0.0), s(1.0), s(0.0)).unwrap();
        assert!(!representable(&zero, &v(&[1.0]), 1e-8).unwrap());
        let obs_only = StaticModel::new(s(0.0), s(1.0), s(1.0)).unwrap();
        assert!(representable(&obs_only, &v(&[2.0]), 1e-8).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let f = Matrix::zeros(2, 3);
        let h = Matrix::zeros(2, 2);
        assert!(matches!(StaticModel::new(f, Matrix::zeros(2, 1), h), Err(Error::InvalidInput(_))));
        assert!(matches!(representable(&scalar_model(), &v(&[1.0, 2.0]), 1e-8), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn scalar_apriori() {
        let r = apriori_estimate(&scalar_model(), &unit_bounds(EstimateKind::Apriori), &v(&[1.0]), None).unwrap();
        let sol = r.solution.unwrap();
        assert!((sol.p[0] - 0.5).abs() < 1e-14);
        assert!((sol.z_hat[0] - 0.5).abs() < 1e-14);
        assert!((sol.u_hat[0] - 0.5).abs() < 1e-14);
        assert!((r.sigma_hat - 0.5).abs() < 1e-14);
        assert!(sol.estimate.is_none());
    }

    #[test]
    fn apriori_zero_functional() {
        let r = apriori_estimate(&scalar_model(), &unit_bounds(EstimateKind::Apriori), &v(&[0.0]), Some(&v(&[3.0])))
            .unwrap();
        assert_eq!(r.sigma_hat, 0.0);
        assert_eq!(r.estimate(), Some(0.0));
    }

    #[test]
    fn apriori_infinite_error() {
        let m = StaticModel::new(s(0.0), s(1.0), s(0.0)).unwrap();
        let r = apriori_estimate(&m, &unit_bounds(EstimateKind::Apriori), &v(&[1.0]), None).unwrap();
        assert!(!r.feasible());
        assert_eq!(r.sigma_hat, f64::INFINITY);
    }

    #[test]
    fn indefinite_bounds_rejected() {
        assert!(matches!(StaticEllipsoid::new(s(-1.0), s(1.0), EstimateKind::Apriori), Err(Error::InvalidBounds(_))));
    }

    #[test]
    fn kind_mismatch_rejected() {
        let r = apriori_estimate(&scalar_model(), &unit_bounds(EstimateKind::Aposteriori), &v(&[1.0]), None);
        assert!(matches!(r, Err(Error::InvalidBounds(_))));
    }

    #[test]
    fn scalar_aposteriori() {
        let b = unit_bounds(EstimateKind::Aposteriori);
        let r = aposteriori_estimate(&scalar_model(), &b, &v(&[1.0]), &v(&[1.0])).unwrap();
        let sol = r.solution.as_ref().unwrap();
        assert!((sol.x_hat.as_ref().unwrap()[0] - 0.5).abs() < 1e-14);
        assert!((r.sigma_hat - 0.5).abs() < 1e-14);

        // y = 0: X = {2x^2 <= 1}, centre 0, half-width 1/sqrt(2).
        let r = aposteriori_estimate(&scalar_model(), &b, &v(&[1.0]), &v(&[0.0])).unwrap();
        assert!(r.estimate().unwrap().abs() < 1e-15);
        assert!((r.sigma_hat - 0.5f64.sqrt()).abs() < 1e-14);

        let r = aposteriori_estimate(&scalar_model(), &b, &v(&[0.0]), &v(&[1.0])).unwrap();
        assert_eq!(r.estimate(), Some(0.0));
        assert_eq!(r.sigma_hat, 0.0);
    }

    #[test]
    fn aposteriori_inconsistent_data() {
        // X = {x: x^2 + (y - x)^2 <= 1} is empty for y = 2.
        let b = unit_bounds(EstimateKind::Aposteriori);
        let r = aposteriori_estimate(&scalar_model(), &b, &v(&[1.0]), &v(&[2.0]));
        assert!(matches!(r, Err(Error::InconsistentData { .. })));
        // y = sqrt(2) is exactly the boundary case: single point, zero error.
        let r = aposteriori_estimate(&scalar_model(), &b, &v(&[1.0]), &v(&[2f64.sqrt()])).unwrap();
        assert!(r.sigma_hat < 1e-7);
    }

    #[test]
    fn worst_case_error_examples() {
        let m = scalar_model();
        let b = unit_bounds(EstimateKind::Apriori);
        let r = apriori_estimate(&m, &b, &v(&[1.0]), None).unwrap();
        let u_hat = r.solution.unwrap().u_hat;
        assert!((worst_case_error_of(&m, &b, &v(&[1.0]), &u_hat, 0.0).unwrap() - 0.5).abs() < 1e-14);
        assert!((worst_case_error_of(&m, &b, &v(&[1.0]), &v(&[0.0]), 0.0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(worst_case_error_of(&m, &b, &v(&[0.0]), &v(&[0.0]), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn worst_case_error_unbounded_direction() {
        // F = 0: x is unconstrained, any l - H'u != 0 gives infinite error.
        let m = StaticModel::new(s(0.0), s(1.0), s(1.0)).unwrap();
        let b = unit_bounds(EstimateKind::Apriori);
        assert_eq!(worst_case_error_of(&m, &b, &v(&[1.0]), &v(&[0.5]), 0.0).unwrap(), f64::INFINITY);
        assert!((worst_case_error_of(&m, &b, &v(&[1.0]), &v(&[1.0]), 0.0).unwrap() - 1.0).abs() < 1e-14);
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        let a = random_matrix(rng, n, n);
        &a * a.transpose() + Matrix::identity(n, n) * 0.5
    }

    #[test]
    fn apriori_estimate_is_optimal_among_affine_estimates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (n, m, l, p) =
                (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3));
            let model = StaticModel::new(
                random_matrix(&mut rng, m, n),
                random_matrix(&mut rng, m, p),
                random_matrix(&mut rng, l, n),
            )
            .unwrap();
            let bounds =
                StaticEllipsoid::new(random_spd(&mut rng, p), random_spd(&mut rng, l), EstimateKind::Apriori).unwrap();
            let ell = model.f().transpose() * random_matrix(&mut rng, m, 1).column(0)
                + model.h().transpose() * random_matrix(&mut rng, l, 1).column(0);
            let r = apriori_estimate(&model, &bounds, &ell, None).unwrap();
            let u_hat = r.solution.unwrap().u_hat;
            let best = worst_case_error_of(&model, &bounds, &ell, &u_hat, 0.0).unwrap();
            assert!(
                (best - r.sigma_hat).abs() <= 1e-9 * (1.0 + r.sigma_hat),
                "n{n} m{m} l{l} p{p} best {best} sigma {}",
                r.sigma_hat
            );
            for _ in 0..1000 {
                let scale = 10f64.powf(rng.random_range(-4.0..0.0));
                let du = random_matrix(&mut rng, l, 1).column(0) * scale;
                let c = rng.random_range(-1.0..1.0) * scale;
                let other = worst_case_error_of(&model, &bounds, &ell, &(&u_hat + du), c).unwrap();
                assert!(best <= other + 1e-8, "best {best} > perturbed {other}");
            }
        }
    }

    #[test]
    fn duality_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let (n, m, l) = (rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(1..=4));
            let p = rng.random_range(1..=4);
            let model = StaticModel::new(
                random_matrix(&mut rng, m, n),
                random_matrix(&mut rng, m, p),
                random_matrix(&mut rng, l, n),
            )
            .unwrap();
            let bounds =
                StaticEllipsoid::new(random_spd(&mut rng, p), random_spd(&mut rng, l), EstimateKind::Aposteriori)
                    .unwrap();
            let ell = random_matrix(&mut rng, n, 1).column(0).into_owned();
            let y = random_matrix(&mut rng, l, 1).column(0) * 0.1;
            let r = match aposteriori_estimate(&model, &bounds, &ell, &y) {
                Ok(r) => r,
                Err(Error::InconsistentData { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            if let Some(sol) = r.solution {
                let lhs = ell.dot(sol.x_hat.as_ref().unwrap());
                let rhs = sol.u_hat.dot(&y);
                assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn singular_f_estimates_do_not_depend_on_dual_solution() {
        // Rank-one F leaves (p, z) non-unique; u_hat and sigma_hat must not move
        // when an arbitrary kernel component is added to the dual solution.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 3, 1);
            let f = &a * random_matrix(&mut rng, 1, 3);
            let model = StaticModel::new(f, random_matrix(&mut rng, 3, 1), random_matrix(&mut rng, 1, 3)).unwrap();
            let bounds = StaticEllipsoid::new(s(1.5), s(0.7), EstimateKind::Apriori).unwrap();
            let ell = model.f().transpose() * v(&[0.3, -0.2, 0.8]) + model.h().transpose() * v(&[0.4]);
            let r = apriori_estimate(&model, &bounds, &ell, None).unwrap();
            let sol = r.solution.unwrap();

            let q1_inv = spd_inverse(bounds.q1(), "Q1").unwrap();
            let rr = model.b() * &q1_inv * model.b().transpose();
            let hqh = model.h().transpose() * bounds.q2() * model.h();
            let mut sys = Matrix::zeros(6, 6);
            sys.view_mut((0, 0), (3, 3)).copy_from(model.f());
            sys.view_mut((0, 3), (3, 3)).copy_from(&(-rr));
            sys.view_mut((3, 0), (3, 3)).copy_from(&hqh);
            sys.view_mut((3, 3), (3, 3)).copy_from(&model.f().transpose());
            let kernel = crate::linalg::null_space(&sys, 1e-10).unwrap();
            assert!(kernel.ncols() > 0);
            let shift = &kernel * random_matrix(&mut rng, kernel.ncols(), 1).column(0) * 3.0;
            let p_alt = &sol.p + shift.rows(0, 3);
            let u_alt = bounds.q2() * model.h() * &p_alt;
            assert!((u_alt - &sol.u_hat).amax() < 1e-9);
            assert!((ell.dot(&p_alt) - r.sigma_hat).abs() < 1e-9);
        }
    }

    #[test]
    fn apriori_scaling_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = StaticModel::new(
            random_matrix(&mut rng, 2, 3),
            random_matrix(&mut rng, 2, 2),
            random_matrix(&mut rng, 2, 3),
        )
        .unwrap();
        let bounds =
            StaticEllipsoid::new(random_spd(&mut rng, 2), random_spd(&mut rng, 2), EstimateKind::Apriori).unwrap();
        let ell = random_matrix(&mut rng, 3, 1).column(0).into_owned();
        let base = apriori_estimate(&model, &bounds, &ell, None).unwrap();
        for alpha in [0.5, 2.0, 10.0] {
            let scaled = apriori_estimate(&model, &bounds, &(&ell * alpha), None).unwrap();
            let want = alpha * alpha * base.sigma_hat;
            assert!((scaled.sigma_hat - want).abs() <= 1e-10 * want);
            let du = scaled.solution.unwrap().u_hat - base.solution.as_ref().unwrap().u_hat.clone() * alpha;
            assert!(du.amax() < 1e-10 * alpha);
        }
    }
}
