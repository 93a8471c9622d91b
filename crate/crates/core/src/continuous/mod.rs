//! Continuous-time descriptor systems
//!
//! ```text
//! d/dt (F x) = C(t) x + f,   F x(a) = f_0,   y = H(t) x + noise
//! ```
//!
//! on `[a, c]`, handled through implicit Euler discretization on a uniform
//! grid, the associated two-point boundary value problem, its Tikhonov
//! regularization, and the descriptor Riccati filter.

mod discretized;
mod model;
mod riccati;

pub use discretized::{
    apriori_estimate_bvp, apriori_estimate_continuous, discretize, grid_norm, tikhonov_approximate, ContinuousEstimate,
    TikhonovIterate, TikhonovRun,
};
pub use model::{ContinuousDae, ContinuousEllipsoid, TimeFunction, TimeGrid, TimeMatrix, TimeVector};
pub use riccati::{riccati_filter, RiccatiReport, RICCATI_BLOWUP};
