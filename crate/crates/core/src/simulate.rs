//! Forward simulation of discrete descriptor systems with disturbances
//! drawn from the joint bounding set
//!
//! ```text
//! (Q0 f0, f0) + sum_k (Q1k f_k, f_k) + sum_k (Q2k g_k, g_k) <= 1
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::discrete_dae::{DaeEllipsoid, DiscreteDae};
use crate::error::{Error, Result};
use crate::linalg::{singular_values, Matrix, Vector};

/// Step matrices with `sigma_min <= STEP_RCOND * sigma_max` are singular.
const STEP_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disturbance {
    /// On the boundary of the bounding set.
    Boundary,
    /// Uniform in the solid ellipsoid.
    Uniform,
    Zero,
}

impl std::str::FromStr for Disturbance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boundary" => Ok(Self::Boundary),
            "uniform" => Ok(Self::Uniform),
            "zero" => Ok(Self::Zero),
            other => Err(Error::InvalidInput(format!("unknown disturbance '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub x: Vec<Vector>,
    pub y: Vec<Vector>,
    pub f0: Vector,
    pub f: Vec<Vector>,
    pub g: Vec<Vector>,
    /// Realized value of the bounding quadratic form.
    pub quadratic_form: f64,
}

fn weighted(q: &Matrix, v: &Vector) -> f64 {
    v.dot(&(q * v))
}

fn step_solve(a: &Matrix, rhs: &Vector, step: usize) -> Result<Vector> {
    if !a.is_square() {
        return Err(Error::SingularStep { step });
    }
    let sv = singular_values(a)?;
    let (top, bottom) = (sv.max(), sv.min());
    if !(top > 0.0) || bottom <= STEP_RCOND * top {
        return Err(Error::SingularStep { step });
    }
    a.clone().lu().solve(rhs).ok_or(Error::SingularStep { step })
}

/// Draws disturbances and solves the system forward.
pub fn simulate(dae: &DiscreteDae, bounds: &DaeEllipsoid, disturbance: Disturbance, seed: u64) -> Result<Simulation> {
    bounds.check_against(dae)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |len: usize| -> Vector {
        match disturbance {
            Disturbance::Zero => Vector::zeros(len),
            _ => Vector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal)),
        }
    };
    let mut f0 = draw(dae.initial_dim());
    let mut f: Vec<Vector> = (0..dae.horizon()).map(|_| draw(dae.input_dim())).collect();
    let mut g: Vec<Vector> = (0..dae.observed_steps()).map(|_| draw(dae.observation_dim())).collect();

    let form = |f0: &Vector, f: &[Vector], g: &[Vector]| {
        weighted(bounds.q0(), f0)
            + f.iter().zip(bounds.q1_seq()).map(|(v, q)| weighted(q, v)).sum::<f64>()
            + g.iter().zip(bounds.q2_seq()).map(|(v, q)| weighted(q, v)).sum::<f64>()
    };
    let raw = form(&f0, &f, &g);
    if disturbance != Disturbance::Zero && raw > 0.0 {
        let dim = f0.len() + f.iter().map(|v| v.len()).sum::<usize>() + g.iter().map(|v| v.len()).sum::<usize>();
        let radius = match disturbance {
            Disturbance::Uniform => rng.random::<f64>().powf(1.0 / dim as f64),
            _ => 1.0,
        };
        let scale = radius / raw.sqrt();
        f0 *= scale;
        f.iter_mut().for_each(|v| *v *= scale);
        g.iter_mut().for_each(|v| *v *= scale);
    }
    let quadratic_form = form(&f0, &f, &g);

    let mut x = Vec::with_capacity(dae.horizon() + 1);
    x.push(step_solve(&dae.f_seq()[0], &(dae.s() * &f0), 0)?);
    for k in 0..dae.horizon() {
        let rhs = &dae.c_seq()[k] * &x[k] + &dae.b_seq()[k] * &f[k];
        x.push(step_solve(&dae.f_seq()[k + 1], &rhs, k + 1)?);
    }
    let y = (0..dae.observed_steps()).map(|k| &dae.h_seq()[k] * &x[k] + &g[k]).collect();
    Ok(Simulation { x, y, f0, f, g, quadratic_form })
}
