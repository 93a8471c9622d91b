//! Brute-force ground truth for the estimators: sampling of the
//! reachability set
//!
//! ```text
//! X = { x : F x = B f,  (Q1 f, f) + (Q2 (y - H x), y - H x) <= 1 }
//! ```
//!
//! and an independent normal-equations solver for its centre.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{null_space, Matrix, Vector, DEFAULT_RANK_TOL};
use crate::static_estimation::{StaticEllipsoid, StaticModel};

/// Largest stacked state dimension accepted by [`sample_reachability`].
pub const MAX_SAMPLING_DIM: usize = 64;

/// Every `INTERIOR_EVERY`-th sample is drawn from the interior.
const INTERIOR_EVERY: usize = 4;
const CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilitySample {
    pub x: Vector,
    pub f: Vector,
    /// On the boundary of the bounding set rather than inside it.
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilitySet {
    pub samples: Vec<ReachabilitySample>,
    /// The data admit no realization at all.
    pub empty: bool,
    /// Dimension of the bounded part of the parameter space.
    pub reduced_dim: usize,
}

/// `(Q1 f, f) + (Q2 (y - H x), y - H x)`.
pub fn quadratic_form(model: &StaticModel, bounds: &StaticEllipsoid, y: &Vector, x: &Vector, f: &Vector) -> f64 {
    let g = y - model.h() * x;
    f.dot(&(bounds.q1() * f)) + g.dot(&(bounds.q2() * &g))
}

/// Seeded samples of the reachability set.
///
/// `(x, f)` is written as `N xi` with `N` a basis of `ker [F, -B]`, which
/// turns the bounding set into an ellipsoid in `xi`. Directions along which
/// the quadratic form is flat (states in `ker F` and `ker H`) leave the set
/// unbounded; they are held at zero, which does not affect any
/// representable functional. Boundary points are the centre plus a uniform
/// direction scaled to the ellipsoid surface; every fourth sample is
/// instead drawn uniformly from the solid ellipsoid.
pub fn sample_reachability(
    model: &StaticModel,
    bounds: &StaticEllipsoid,
    y: &Vector,
    count: usize,
    seed: u64,
) -> Result<ReachabilitySet> {
    let (n, m, p) = (model.state_dim(), model.equation_dim(), model.input_dim());
    if n > MAX_SAMPLING_DIM {
        return Err(Error::DimensionTooLarge { dim: n, max: MAX_SAMPLING_DIM });
    }
    if count == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    if y.len() != model.observation_dim() || bounds.q1().nrows() != p || bounds.q2().nrows() != y.len() {
        return Err(Error::InvalidInput("data and bounds do not match the model".into()));
    }

    let mut constraint = Matrix::zeros(m, n + p);
    constraint.view_mut((0, 0), (m, n)).copy_from(model.f());
    constraint.view_mut((0, n), (m, p)).copy_from(&(-model.b()));
    let basis = null_space(&constraint, DEFAULT_RANK_TOL)?;
    let nx = basis.rows(0, n).into_owned();
    let nf = basis.rows(n, p).into_owned();

    let hn = model.h() * &nx;
    let a = hn.transpose() * bounds.q2() * &hn + nf.transpose() * bounds.q1() * &nf;
    let b = hn.transpose() * bounds.q2() * y;
    let c = y.dot(&(bounds.q2() * y));

    let eig = SymmetricEigen::new((&a + a.transpose()) * 0.5);
    let top = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > DEFAULT_RANK_TOL * top && eig.eigenvalues[i] > 0.0)
        .collect();
    let d = keep.len();
    let vecs = Matrix::from_fn(basis.ncols(), d, |i, j| eig.eigenvectors[(i, keep[j])]);
    let lambda = Vector::from_iterator(d, keep.iter().map(|&i| eig.eigenvalues[i]));
    let beta = vecs.transpose() * &b;
    let centre = beta.component_div(&lambda);
    let j_min = c - beta.dot(&centre);
    let r2 = 1.0 - j_min;
    if r2 < 0.0 {
        return Ok(ReachabilitySet { samples: Vec::new(), empty: true, reduced_dim: d });
    }
    let r = r2.sqrt();
    let semi_axes = lambda.map(|l| r / l.sqrt());

    let to_sample = |eta: &Vector, boundary: bool| {
        let w = &basis * (&vecs * eta);
        ReachabilitySample { x: w.rows(0, n).into_owned(), f: w.rows(n, p).into_owned(), boundary }
    };

    let chunks = count.div_ceil(CHUNK);
    let samples = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(count);
            (start..end)
                .map(|i| {
                    let interior = i % INTERIOR_EVERY == INTERIOR_EVERY - 1;
                    if d == 0 {
                        return to_sample(&centre, !interior);
                    }
                    let mut dir = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let norm = dir.norm();
                    if norm > 0.0 {
                        dir /= norm;
                    }
                    let scale = if interior { rng.random::<f64>().powf(1.0 / d as f64) } else { 1.0 };
                    let eta = &centre + dir.component_mul(&semi_axes) * scale;
                    to_sample(&eta, !interior)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(ReachabilitySet { samples, empty: false, reduced_dim: d })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebyshevCheck {
    /// Largest `|(l, x) - estimate|` over the samples.
    pub max_dev: f64,
    /// Samples with deviation above `sigma_hat (1 + 1e-9)`.
    pub violations: usize,
}

pub fn chebyshev_check(
    samples: &[ReachabilitySample],
    ell: &Vector,
    estimate: f64,
    sigma_hat: f64,
) -> Result<ChebyshevCheck> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples to check".into()));
    }
    let limit = sigma_hat * (1.0 + 1e-9);
    let mut max_dev = 0.0_f64;
    let mut violations = 0;
    for s in samples {
        if s.x.len() != ell.len() {
            return Err(Error::InvalidInput("sample and functional lengths differ".into()));
        }
        let dev = (ell.dot(&s.x) - estimate).abs();
        max_dev = max_dev.max(dev);
        if dev > limit {
            violations += 1;
        }
    }
    Ok(ChebyshevCheck { max_dev, violations })
}

/// Minimizer of `(Q1 f, f) + (Q2 (y - H x), y - H x)` with `f = B^{-1} F x`,
/// from the normal equations
/// `(F'B^{-T} Q1 B^{-1} F + H'Q2H) x = H'Q2 y`.
///
/// Written directly against nalgebra so that it shares nothing with the
/// estimators it is used to check.
pub fn quadratic_center_oracle(model: &StaticModel, bounds: &StaticEllipsoid, y: &Vector) -> Result<Vector> {
    let (f, b, h) = (model.f(), model.b(), model.h());
    if !b.is_square() {
        return Err(Error::Precondition("B must be square and invertible".into()));
    }
    if y.len() != h.nrows() || bounds.q2().nrows() != h.nrows() || bounds.q1().nrows() != b.ncols() {
        return Err(Error::InvalidInput("data and bounds do not match the model".into()));
    }
    let b_inv: DMatrix<f64> = b.clone().try_inverse().ok_or_else(|| Error::Precondition("B is singular".into()))?;
    let g = &b_inv * f;
    let normal = g.transpose() * bounds.q1() * &g + h.transpose() * bounds.q2() * h;
    let normal = (&normal + normal.transpose()) * 0.5;
    let rhs: DVector<f64> = h.transpose() * bounds.q2() * y;
    let chol = normal.clone().cholesky().ok_or(Error::SingularNormalEquations)?;
    let largest = normal.diagonal().max();
    let smallest_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, &v| a.min(v * v));
    if !(largest > 0.0) || smallest_pivot <= 1e-12 * largest {
        return Err(Error::SingularNormalEquations);
    }
    Ok(chol.solve(&rhs))
}
