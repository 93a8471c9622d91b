use std::ops::{AddAssign, Mul};

use crate::error::{Error, Result};
use crate::linalg::{check_spd, ensure_finite_matrix, Matrix, Vector};

/// A matrix- or vector-valued function of time.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeFunction<T> {
    Constant(T),
    /// Piecewise constant: `values[j]` holds on `[times[j], times[j+1])`;
    /// the first value also covers times before `times[0]`.
    Table {
        times: Vec<f64>,
        values: Vec<T>,
    },
    /// `sum_i coefficients[i] * t^i`.
    Polynomial(Vec<T>),
}

pub type TimeMatrix = TimeFunction<Matrix>;
pub type TimeVector = TimeFunction<Vector>;

impl<T> TimeFunction<T>
where
    T: Clone + AddAssign<T> + Mul<f64, Output = T>,
{
    pub fn table(times: Vec<f64>, values: Vec<T>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidInput("table needs matching, non-empty times and values".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("table times must be finite and increasing".into()));
        }
        Ok(Self::Table { times, values })
    }

    pub fn polynomial(coefficients: Vec<T>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidInput("polynomial needs at least one coefficient".into()));
        }
        Ok(Self::Polynomial(coefficients))
    }

    pub fn at(&self, t: f64) -> T {
        match self {
            Self::Constant(v) => v.clone(),
            Self::Table { times, values } => {
                let idx = times.partition_point(|&s| s <= t).saturating_sub(1);
                values[idx].clone()
            }
            Self::Polynomial(coeffs) => {
                // Horner
                let mut acc = coeffs[coeffs.len() - 1].clone();
                for c in coeffs[..coeffs.len() - 1].iter().rev() {
                    acc = acc * t;
                    acc += c.clone();
                }
                acc
            }
        }
    }

    fn first(&self) -> &T {
        match self {
            Self::Constant(v) => v,
            Self::Table { values, .. } => &values[0],
            Self::Polynomial(c) => &c[0],
        }
    }

    fn all(&self) -> Vec<&T> {
        match self {
            Self::Constant(v) => vec![v],
            Self::Table { values, .. } => values.iter().collect(),
            Self::Polynomial(c) => c.iter().collect(),
        }
    }
}

impl TimeMatrix {
    pub fn shape(&self) -> (usize, usize) {
        self.first().shape()
    }

    fn check_shapes(&self, name: &str) -> Result<()> {
        let shape = self.shape();
        for m in self.all() {
            if m.shape() != shape {
                return Err(Error::InvalidInput(format!("{name}: inconsistent shapes over time")));
            }
            ensure_finite_matrix(m, name)?;
        }
        Ok(())
    }
}

impl TimeVector {
    pub fn len(&self) -> usize {
        self.first().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.all().iter().any(|v| v.len() != n) {
            return Err(Error::InvalidInput(format!("functional must have length {n}")));
        }
        Ok(())
    }
}

/// `d/dt (F x) = C(t) x + f`, `F x(a) = f_0`, observed as
/// `y(t) = H(t) x(t) + noise` on `[a, c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousDae {
    f: Matrix,
    c: TimeMatrix,
    h: TimeMatrix,
    start: f64,
    end: f64,
}

impl ContinuousDae {
    pub fn new(f: Matrix, c: TimeMatrix, h: TimeMatrix, interval: (f64, f64)) -> Result<Self> {
        let (start, end) = interval;
        if !(start.is_finite() && end.is_finite() && start < end) {
            return Err(Error::InvalidInput(format!("invalid interval [{start}, {end}]")));
        }
        if f.nrows() == 0 || f.ncols() == 0 {
            return Err(Error::InvalidInput("F must be non-empty".into()));
        }
        ensure_finite_matrix(&f, "F")?;
        c.check_shapes("C")?;
        h.check_shapes("H")?;
        if c.shape() != f.shape() {
            return Err(Error::InvalidInput(format!("C must be {}x{}", f.nrows(), f.ncols())));
        }
        if h.shape().1 != f.ncols() || h.shape().0 == 0 {
            return Err(Error::InvalidInput(format!("H must have {} columns", f.ncols())));
        }
        Ok(Self { f, c, h, start, end })
    }

    pub fn f(&self) -> &Matrix {
        &self.f
    }
    pub fn c(&self) -> &TimeMatrix {
        &self.c
    }
    pub fn h(&self) -> &TimeMatrix {
        &self.h
    }
    pub fn interval(&self) -> (f64, f64) {
        (self.start, self.end)
    }
    pub fn state_dim(&self) -> usize {
        self.f.ncols()
    }
    pub fn equation_dim(&self) -> usize {
        self.f.nrows()
    }
    pub fn observation_dim(&self) -> usize {
        self.h.shape().0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousEllipsoid {
    q0: Matrix,
    q1: TimeMatrix,
    q2: TimeMatrix,
}

impl ContinuousEllipsoid {
    pub fn new(q0: Matrix, q1: TimeMatrix, q2: TimeMatrix) -> Result<Self> {
        check_spd(&q0, "Q0")?;
        q1.check_shapes("Q1")?;
        q2.check_shapes("Q2")?;
        Ok(Self { q0, q1, q2 })
    }

    pub fn q0(&self) -> &Matrix {
        &self.q0
    }
    pub fn q1(&self) -> &TimeMatrix {
        &self.q1
    }
    pub fn q2(&self) -> &TimeMatrix {
        &self.q2
    }

    pub(crate) fn check_against(&self, sys: &ContinuousDae) -> Result<()> {
        let m = sys.equation_dim();
        if self.q0.nrows() != m || self.q1.shape() != (m, m) {
            return Err(Error::InvalidInput(format!("Q0 and Q1 must be {m}x{m}")));
        }
        let l = sys.observation_dim();
        if self.q2.shape() != (l, l) {
            return Err(Error::InvalidInput(format!("Q2 must be {l}x{l}")));
        }
        Ok(())
    }
}

/// Uniform grid `a = t_0 < ... < t_M = c`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    step: f64,
}

impl TimeGrid {
    pub fn uniform(start: f64, end: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(start < end) || !start.is_finite() || !end.is_finite() {
            return Err(Error::InvalidGrid(format!("cannot split [{start}, {end}] into {steps} steps")));
        }
        let step = (end - start) / steps as f64;
        let nodes = (0..=steps).map(|k| if k == steps { end } else { start + step * k as f64 }).collect();
        Ok(Self { nodes, step })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidGrid("a grid needs at least two nodes".into()));
        }
        let step = (nodes[nodes.len() - 1] - nodes[0]) / (nodes.len() - 1) as f64;
        if !(step > 0.0) {
            return Err(Error::InvalidGrid("nodes must be increasing".into()));
        }
        let scale = 1.0 + nodes[0].abs().max(nodes[nodes.len() - 1].abs());
        if nodes.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-12 * scale) {
            return Err(Error::InvalidGrid("nodes are not uniformly spaced".into()));
        }
        Ok(Self { nodes, step })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    /// Number of intervals `M`.
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub(crate) fn check_within(&self, sys: &ContinuousDae) -> Result<()> {
        let (a, c) = sys.interval();
        let tol = 1e-12 * (1.0 + a.abs().max(c.abs()));
        let (first, last) = (self.nodes[0], self.nodes[self.nodes.len() - 1]);
        if first < a - tol || last > c + tol {
            return Err(Error::InvalidGrid(format!("grid [{first}, {last}] leaves the interval [{a}, {c}]")));
        }
        Ok(())
    }
}
