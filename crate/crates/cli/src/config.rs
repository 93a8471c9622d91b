//! Problem configuration: a JSON document with top-level keys `kind`,
//! `model`, `bounds`, `estimation`, `grid` and `seed`.
//!
//! Matrices are nested row-major arrays. Discrete sequences accept either
//! one matrix (repeated over the horizon) or a list. Time-varying
//! continuous coefficients are a plain matrix (constant) or an object
//! tagged with `type`: `constant`, `table` or `polynomial`.

use std::path::Path;

use descriptor_minimax::continuous::{
    ContinuousDae, ContinuousEllipsoid, TimeFunction, TimeGrid, TimeMatrix, TimeVector,
};
use descriptor_minimax::discrete_dae::{DaeEllipsoid, DiscreteDae};
use descriptor_minimax::static_estimation::{EstimateKind, StaticEllipsoid, StaticModel};
use descriptor_minimax::{Error as CoreError, Matrix, Vector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub type RawMatrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Static,
    DiscreteDae,
    ContinuousDae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Apriori,
    Aposteriori,
    Filter,
    Riccati,
    Tikhonov,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Apriori => "apriori",
            Mode::Aposteriori => "aposteriori",
            Mode::Filter => "filter",
            Mode::Riccati => "riccati",
            Mode::Tikhonov => "tikhonov",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        serde_json::from_value(Value::String(s.to_string())).map_err(|_| CliError::Usage(format!("unknown mode '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSeq {
    One(RawMatrix),
    Many(Vec<RawMatrix>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum TaggedTime<T> {
    Constant { value: T },
    Table { times: Vec<f64>, values: Vec<T> },
    Polynomial { coefficients: Vec<T> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeSpec<T> {
    Plain(T),
    Tagged(TaggedTime<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticModelSpec {
    #[serde(rename = "F")]
    pub f: RawMatrix,
    #[serde(rename = "B")]
    pub b: RawMatrix,
    #[serde(rename = "H")]
    pub h: RawMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticBoundsSpec {
    #[serde(rename = "Q1")]
    pub q1: RawMatrix,
    #[serde(rename = "Q2")]
    pub q2: RawMatrix,
}

fn default_true() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteModelSpec {
    /// Number of transitions `T`.
    pub horizon: usize,
    #[serde(rename = "F")]
    pub f: MatrixSeq,
    #[serde(rename = "C")]
    pub c: MatrixSeq,
    #[serde(rename = "B")]
    pub b: MatrixSeq,
    #[serde(rename = "S")]
    pub s: RawMatrix,
    #[serde(rename = "H")]
    pub h: MatrixSeq,
    /// Whether the terminal state is observed.
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub observe_terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteBoundsSpec {
    #[serde(rename = "Q0")]
    pub q0: RawMatrix,
    #[serde(rename = "Q1")]
    pub q1: MatrixSeq,
    #[serde(rename = "Q2")]
    pub q2: MatrixSeq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousModelSpec {
    pub interval: [f64; 2],
    #[serde(rename = "F")]
    pub f: RawMatrix,
    #[serde(rename = "C")]
    pub c: TimeSpec<RawMatrix>,
    #[serde(rename = "H")]
    pub h: TimeSpec<RawMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousBoundsSpec {
    #[serde(rename = "Q0")]
    pub q0: RawMatrix,
    #[serde(rename = "Q1")]
    pub q1: TimeSpec<RawMatrix>,
    #[serde(rename = "Q2")]
    pub q2: TimeSpec<RawMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Static { model: StaticModelSpec, bounds: StaticBoundsSpec },
    Discrete { model: DiscreteModelSpec, bounds: DiscreteBoundsSpec },
    Continuous { model: ContinuousModelSpec, bounds: ContinuousBoundsSpec },
}

/// Functional to estimate.
///
/// * static: a vector;
/// * discrete: a list of `T + 1` vectors, or one vector acting on the
///   terminal state;
/// * continuous a priori / Tikhonov: a vector function of time;
/// * continuous Riccati: a vector acting on the terminal state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EllSpec {
    Vector(Vec<f64>),
    Sequence(Vec<Vec<f64>>),
    Timed(TaggedTime<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSpec {
    pub mode: Mode,
    pub ell: EllSpec,
    /// Regularization parameters for `tikhonov`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct ProblemConfig {
    pub problem: ProblemSpec,
    pub estimation: EstimationSpec,
    pub grid: Option<GridSpec>,
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Kind,
    model: Value,
    bounds: Value,
    estimation: EstimationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

fn block<T: serde::de::DeserializeOwned>(value: Value, name: &str) -> Result<T, String> {
    serde_json::from_value(value).map_err(|e| format!("{name}: {e}"))
}

impl TryFrom<RawConfig> for ProblemConfig {
    type Error = String;

    fn try_from(raw: RawConfig) -> Result<Self, String> {
        let problem = match raw.kind {
            Kind::Static => {
                ProblemSpec::Static { model: block(raw.model, "model")?, bounds: block(raw.bounds, "bounds")? }
            }
            Kind::DiscreteDae => {
                ProblemSpec::Discrete { model: block(raw.model, "model")?, bounds: block(raw.bounds, "bounds")? }
            }
            Kind::ContinuousDae => {
                ProblemSpec::Continuous { model: block(raw.model, "model")?, bounds: block(raw.bounds, "bounds")? }
            }
        };
        Ok(Self { problem, estimation: raw.estimation, grid: raw.grid, seed: raw.seed })
    }
}

impl From<ProblemConfig> for RawConfig {
    fn from(c: ProblemConfig) -> Self {
        let to_value = |v: Result<Value, serde_json::Error>| v.expect("spec types serialize");
        let (kind, model, bounds) = match c.problem {
            ProblemSpec::Static { model, bounds } => {
                (Kind::Static, to_value(serde_json::to_value(model)), to_value(serde_json::to_value(bounds)))
            }
            ProblemSpec::Discrete { model, bounds } => {
                (Kind::DiscreteDae, to_value(serde_json::to_value(model)), to_value(serde_json::to_value(bounds)))
            }
            ProblemSpec::Continuous { model, bounds } => {
                (Kind::ContinuousDae, to_value(serde_json::to_value(model)), to_value(serde_json::to_value(bounds)))
            }
        };
        RawConfig { kind, model, bounds, estimation: c.estimation, grid: c.grid, seed: c.seed }
    }
}

/// Validated numerical problem.
#[derive(Debug, Clone)]
pub enum Problem {
    Static { model: StaticModel, q1: Matrix, q2: Matrix },
    Discrete { dae: DiscreteDae, bounds: DaeEllipsoid },
    Continuous { sys: ContinuousDae, bounds: ContinuousEllipsoid },
}

impl Problem {
    pub fn static_bounds(q1: &Matrix, q2: &Matrix, kind: EstimateKind) -> Result<StaticEllipsoid, CliError> {
        StaticEllipsoid::new(q1.clone(), q2.clone(), kind).map_err(|e| schema_or_dimension(e, "bounds"))
    }
}

/// Functional after validation against the problem.
#[derive(Debug, Clone)]
pub enum Functional {
    Vector(Vector),
    Sequence(Vec<Vector>),
    Timed(TimeVector),
}

fn schema_or_dimension(e: CoreError, block: &str) -> CliError {
    match e {
        CoreError::InvalidBounds(msg) => CliError::Schema(vec![format!("{block}: {msg}")]),
        CoreError::InvalidInput(msg) | CoreError::InvalidGrid(msg) => {
            CliError::Dimension(vec![format!("{block}: {msg}")])
        }
        other => CliError::Core(other),
    }
}

pub fn to_matrix(raw: &RawMatrix, path: &str) -> Result<Matrix, String> {
    let rows = raw.len();
    let cols = raw.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return Err(format!("{path}: matrix must be non-empty"));
    }
    if raw.iter().any(|r| r.len() != cols) {
        return Err(format!("{path}: rows have different lengths"));
    }
    Ok(Matrix::from_fn(rows, cols, |i, j| raw[i][j]))
}

pub fn from_matrix(m: &Matrix) -> RawMatrix {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

fn to_seq(raw: &MatrixSeq, len: usize, path: &str) -> Result<Vec<Matrix>, String> {
    match raw {
        MatrixSeq::One(m) => Ok(vec![to_matrix(m, path)?; len]),
        MatrixSeq::Many(ms) => {
            if ms.len() != len {
                return Err(format!("{path}: expected {len} matrices, got {}", ms.len()));
            }
            ms.iter().enumerate().map(|(k, m)| to_matrix(m, &format!("{path}[{k}]"))).collect()
        }
    }
}

fn to_time<T: Clone>(
    spec: &TimeSpec<T>,
    path: &str,
    convert: impl Fn(&T, &str) -> Result<Matrix, String>,
) -> Result<TimeMatrix, String> {
    let tagged = match spec {
        TimeSpec::Plain(m) => return Ok(TimeFunction::Constant(convert(m, path)?)),
        TimeSpec::Tagged(t) => t,
    };
    let convert_all = |vs: &[T]| -> Result<Vec<Matrix>, String> {
        vs.iter().enumerate().map(|(k, v)| convert(v, &format!("{path}[{k}]"))).collect()
    };
    match tagged {
        TaggedTime::Constant { value } => Ok(TimeFunction::Constant(convert(value, path)?)),
        TaggedTime::Table { times, values } => {
            TimeMatrix::table(times.clone(), convert_all(values)?).map_err(|e| format!("{path}: {e}"))
        }
        TaggedTime::Polynomial { coefficients } => {
            TimeMatrix::polynomial(convert_all(coefficients)?).map_err(|e| format!("{path}: {e}"))
        }
    }
}

fn time_vector(spec: &TaggedTime<Vec<f64>>) -> Result<TimeVector, String> {
    let vecs = |vs: &[Vec<f64>]| vs.iter().map(|v| Vector::from_column_slice(v)).collect::<Vec<_>>();
    match spec {
        TaggedTime::Constant { value } => Ok(TimeFunction::Constant(Vector::from_column_slice(value))),
        TaggedTime::Table { times, values } => {
            TimeVector::table(times.clone(), vecs(values)).map_err(|e| format!("estimation.ell: {e}"))
        }
        TaggedTime::Polynomial { coefficients } => {
            TimeVector::polynomial(vecs(coefficients)).map_err(|e| format!("estimation.ell: {e}"))
        }
    }
}

/// Collects conversion errors so that a malformed block is reported in full.
struct Collector(Vec<String>);

impl Collector {
    fn take<T>(&mut self, r: Result<T, String>) -> Option<T> {
        r.map_err(|e| self.0.push(e)).ok()
    }
}

impl ProblemConfig {
    pub fn kind(&self) -> Kind {
        match self.problem {
            ProblemSpec::Static { .. } => Kind::Static,
            ProblemSpec::Discrete { .. } => Kind::DiscreteDae,
            ProblemSpec::Continuous { .. } => Kind::ContinuousDae,
        }
    }

    /// Converts and cross-checks every block.
    pub fn build(&self) -> Result<Problem, CliError> {
        let mut c = Collector(Vec::new());
        match &self.problem {
            ProblemSpec::Static { model, bounds } => {
                let f = c.take(to_matrix(&model.f, "model.F"));
                let b = c.take(to_matrix(&model.b, "model.B"));
                let h = c.take(to_matrix(&model.h, "model.H"));
                let q1 = c.take(to_matrix(&bounds.q1, "bounds.Q1"));
                let q2 = c.take(to_matrix(&bounds.q2, "bounds.Q2"));
                let (Some(f), Some(b), Some(h), Some(q1), Some(q2)) = (f, b, h, q1, q2) else {
                    return Err(CliError::Schema(c.0));
                };
                let model = StaticModel::new(f, b, h).map_err(|e| schema_or_dimension(e, "model"))?;
                // Shape and definiteness are checked for both estimate kinds alike.
                StaticEllipsoid::new(q1.clone(), q2.clone(), EstimateKind::Apriori)
                    .map_err(|e| schema_or_dimension(e, "bounds"))?;
                let mut dims = Vec::new();
                if q1.nrows() != model.input_dim() {
                    dims.push(format!("bounds.Q1: must be {0}x{0} to match B", model.input_dim()));
                }
                if q2.nrows() != model.observation_dim() {
                    dims.push(format!("bounds.Q2: must be {0}x{0} to match H", model.observation_dim()));
                }
                if !dims.is_empty() {
                    return Err(CliError::Dimension(dims));
                }
                Ok(Problem::Static { model, q1, q2 })
            }
            ProblemSpec::Discrete { model, bounds } => {
                let t = model.horizon;
                let observed = if model.observe_terminal { t + 1 } else { t };
                let f = c.take(to_seq(&model.f, t + 1, "model.F"));
                let cc = c.take(to_seq(&model.c, t, "model.C"));
                let b = c.take(to_seq(&model.b, t, "model.B"));
                let s = c.take(to_matrix(&model.s, "model.S"));
                let h = c.take(to_seq(&model.h, observed, "model.H"));
                let q0 = c.take(to_matrix(&bounds.q0, "bounds.Q0"));
                let q1 = c.take(to_seq(&bounds.q1, t, "bounds.Q1"));
                let q2 = c.take(to_seq(&bounds.q2, observed, "bounds.Q2"));
                let (Some(f), Some(cc), Some(b), Some(s), Some(h), Some(q0), Some(q1), Some(q2)) =
                    (f, cc, b, s, h, q0, q1, q2)
                else {
                    return Err(CliError::Schema(c.0));
                };
                let dae = DiscreteDae::new(f, cc, b, s, h).map_err(|e| schema_or_dimension(e, "model"))?;
                let weights = DaeEllipsoid::new(q0, q1, q2).map_err(|e| schema_or_dimension(e, "bounds"))?;
                weights.check_against(&dae).map_err(|e| schema_or_dimension(e, "bounds"))?;
                Ok(Problem::Discrete { dae, bounds: weights })
            }
            ProblemSpec::Continuous { model, bounds } => {
                let f = c.take(to_matrix(&model.f, "model.F"));
                let cm = c.take(to_time(&model.c, "model.C", to_matrix));
                let h = c.take(to_time(&model.h, "model.H", to_matrix));
                let q0 = c.take(to_matrix(&bounds.q0, "bounds.Q0"));
                let q1 = c.take(to_time(&bounds.q1, "bounds.Q1", to_matrix));
                let q2 = c.take(to_time(&bounds.q2, "bounds.Q2", to_matrix));
                let (Some(f), Some(cm), Some(h), Some(q0), Some(q1), Some(q2)) = (f, cm, h, q0, q1, q2) else {
                    return Err(CliError::Schema(c.0));
                };
                let interval = (model.interval[0], model.interval[1]);
                let sys = ContinuousDae::new(f, cm, h, interval).map_err(|e| schema_or_dimension(e, "model"))?;
                let weights = ContinuousEllipsoid::new(q0, q1, q2).map_err(|e| schema_or_dimension(e, "bounds"))?;
                let m = sys.equation_dim();
                let l = sys.observation_dim();
                let mut dims = Vec::new();
                if weights.q0().nrows() != m || weights.q1().shape() != (m, m) {
                    dims.push(format!("bounds: Q0 and Q1 must be {m}x{m}"));
                }
                if weights.q2().shape() != (l, l) {
                    dims.push(format!("bounds.Q2: must be {l}x{l}"));
                }
                if !dims.is_empty() {
                    return Err(CliError::Dimension(dims));
                }
                // Definiteness of the time-varying weights on the grid nodes.
                if let Ok(grid) = self.grid(None) {
                    for &t in grid.nodes() {
                        for (name, q) in [("bounds.Q1", weights.q1().at(t)), ("bounds.Q2", weights.q2().at(t))] {
                            descriptor_minimax::linalg::check_spd(&q, &format!("{name}(t = {t})"))
                                .map_err(|e| schema_or_dimension(e, "bounds"))?;
                        }
                    }
                }
                Ok(Problem::Continuous { sys, bounds: weights })
            }
        }
    }

    /// Grid for continuous problems; `steps` overrides the configured count.
    pub fn grid(&self, steps: Option<usize>) -> Result<TimeGrid, CliError> {
        let ProblemSpec::Continuous { model, .. } = &self.problem else {
            return Err(CliError::Usage("only continuous problems have a grid".into()));
        };
        let steps = steps
            .or(self.grid.map(|g| g.steps))
            .ok_or_else(|| CliError::Schema(vec!["grid.steps: required for continuous_dae".into()]))?;
        TimeGrid::uniform(model.interval[0], model.interval[1], steps)
            .map_err(|e| CliError::Schema(vec![format!("grid: {e}")]))
    }

    /// The functional, checked against the problem and mode.
    pub fn functional(&self, problem: &Problem, mode: Mode) -> Result<Functional, CliError> {
        let dim = |msg: String| CliError::Dimension(vec![format!("estimation.ell: {msg}")]);
        let schema = |msg: &str| CliError::Schema(vec![format!("estimation.ell: {msg}")]);
        let ell = &self.estimation.ell;
        match problem {
            Problem::Static { model, .. } => match ell {
                EllSpec::Vector(v) if v.len() == model.state_dim() => {
                    Ok(Functional::Vector(Vector::from_column_slice(v)))
                }
                EllSpec::Vector(v) => {
                    Err(dim(format!("length {} but the state has dimension {}", v.len(), model.state_dim())))
                }
                _ => Err(schema("expected a vector")),
            },
            Problem::Discrete { dae, .. } => {
                let n = dae.state_dim();
                match ell {
                    EllSpec::Vector(v) if v.len() == n => Ok(Functional::Vector(Vector::from_column_slice(v))),
                    EllSpec::Vector(v) => Err(dim(format!("length {} but the state has dimension {n}", v.len()))),
                    EllSpec::Sequence(_) if mode == Mode::Filter => {
                        Err(schema("the filter estimates a terminal functional; give a single vector"))
                    }
                    EllSpec::Sequence(vs) => {
                        if vs.len() != dae.horizon() + 1 {
                            return Err(dim(format!("expected {} blocks, got {}", dae.horizon() + 1, vs.len())));
                        }
                        if vs.iter().any(|v| v.len() != n) {
                            return Err(dim(format!("every block must have length {n}")));
                        }
                        Ok(Functional::Sequence(vs.iter().map(|v| Vector::from_column_slice(v)).collect()))
                    }
                    EllSpec::Timed(_) => Err(schema("time functions apply to continuous problems only")),
                }
            }
            Problem::Continuous { sys, .. } => {
                let n = sys.state_dim();
                let f = match (mode, ell) {
                    (Mode::Riccati, EllSpec::Vector(v)) => Functional::Vector(Vector::from_column_slice(v)),
                    (Mode::Riccati, _) => return Err(schema("riccati needs a vector acting on x(c)")),
                    (_, EllSpec::Vector(v)) => Functional::Timed(TimeFunction::Constant(Vector::from_column_slice(v))),
                    (_, EllSpec::Timed(t)) => Functional::Timed(time_vector(t).map_err(|e| CliError::Schema(vec![e]))?),
                    (_, EllSpec::Sequence(_)) => return Err(schema("expected a vector or a time function")),
                };
                let ok = match &f {
                    Functional::Vector(v) => v.len() == n,
                    Functional::Timed(t) => match t {
                        TimeFunction::Constant(v) => v.len() == n,
                        TimeFunction::Table { values, .. } => values.iter().all(|v| v.len() == n),
                        TimeFunction::Polynomial(cs) => cs.iter().all(|v| v.len() == n),
                    },
                    Functional::Sequence(_) => unreachable!("not produced for continuous problems"),
                };
                if !ok {
                    return Err(dim(format!("entries must have length {n}")));
                }
                Ok(f)
            }
        }
    }

    /// Modes available for this kind of problem.
    pub fn check_mode(&self, mode: Mode) -> Result<(), CliError> {
        let allowed: &[Mode] = match self.kind() {
            Kind::Static => &[Mode::Apriori, Mode::Aposteriori],
            Kind::DiscreteDae => &[Mode::Apriori, Mode::Aposteriori, Mode::Filter],
            Kind::ContinuousDae => &[Mode::Apriori, Mode::Riccati, Mode::Tikhonov],
        };
        if allowed.contains(&mode) {
            Ok(())
        } else {
            Err(CliError::Schema(vec![format!("estimation.mode: '{}' is not available for this kind", mode.name())]))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and fully validates a configuration document.
pub fn parse_config_str(text: &str) -> Result<ProblemConfig, CliError> {
    let config: ProblemConfig = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Syntax | serde_json::error::Category::Eof => {
            CliError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
        }
        _ => CliError::Schema(vec![e.to_string()]),
    })?;
    let problem = config.build()?;
    config.check_mode(config.estimation.mode)?;
    config.functional(&problem, config.estimation.mode)?;
    if let Problem::Continuous { .. } = problem {
        config.grid(None)?;
    }
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<ProblemConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}
