use std::time::Instant;

use descriptor_minimax::continuous::{
    apriori_estimate_continuous, discretize, riccati_filter, tikhonov_approximate, ContinuousDae, ContinuousEllipsoid,
    TimeGrid,
};
use descriptor_minimax::discrete_dae::{variational_estimate, DaeEllipsoid, DiscreteDae};
use descriptor_minimax::filter::filter_run;
use descriptor_minimax::linalg::stack;
use descriptor_minimax::oracle::{chebyshev_check, quadratic_center_oracle, sample_reachability};
use descriptor_minimax::simulate::{simulate, Disturbance};
use descriptor_minimax::static_estimation::{
    aposteriori_estimate, apriori_estimate, EstimateKind, StaticEllipsoid, StaticModel,
};
use descriptor_minimax::{Error as CoreError, Vector};

use crate::config::{Functional, Mode, Problem, ProblemConfig};
use crate::error::CliError;
use crate::report::{OracleSummary, ResultReport, Sigma, TikhonovSummary};

/// Exit status for a functional whose minimax error is infinite.
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_ERROR: i32 = 1;

pub const DEFAULT_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    /// `mode` overrides the configured estimation mode.
    Estimate {
        mode: Option<Mode>,
    },
    Filter,
    Riccati,
    Tikhonov,
    Simulate {
        disturbance: Disturbance,
    },
    /// Checks an a posteriori report (computed afresh when absent) against
    /// reachability samples.
    Validate {
        report: Option<Box<ResultReport>>,
    },
    Check,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Estimate { .. } => "estimate",
            Command::Filter => "filter",
            Command::Riccati => "riccati",
            Command::Tikhonov => "tikhonov",
            Command::Simulate { .. } => "simulate",
            Command::Validate { .. } => "validate",
            Command::Check => "check",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Observation rows, `y_0, y_1, ...`.
    pub observations: Option<Vec<Vector>>,
    /// Overrides the configured seed.
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub grid_steps: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Trajectories {
    pub states: Vec<Vector>,
    pub observations: Vec<Vector>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: ResultReport,
    pub exit_code: i32,
    /// Produced by `simulate`.
    pub trajectories: Option<Trajectories>,
}

impl Outcome {
    fn from_report(report: ResultReport) -> Self {
        let exit_code = if report.feasible { 0 } else { EXIT_INFEASIBLE };
        Self { report, exit_code, trajectories: None }
    }
}

pub fn run(command: &Command, config: &ProblemConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let problem = config.build()?;
    let mut outcome = match command {
        Command::Check => {
            let mode = config.estimation.mode;
            config.check_mode(mode)?;
            config.functional(&problem, mode)?;
            if matches!(problem, Problem::Continuous { .. }) {
                config.grid(opts.grid_steps)?;
            }
            let mut report = ResultReport::new("check");
            report.mode = Some(mode.name().into());
            Outcome::from_report(report)
        }
        Command::Estimate { mode } => {
            let mode = mode.unwrap_or(config.estimation.mode);
            if !matches!(mode, Mode::Apriori | Mode::Aposteriori) {
                return Err(CliError::Usage(format!(
                    "'estimate' runs apriori or aposteriori; use the '{}' subcommand",
                    mode.name()
                )));
            }
            Outcome::from_report(estimate(config, &problem, mode, opts)?)
        }
        Command::Filter => Outcome::from_report(estimate(config, &problem, Mode::Filter, opts)?),
        Command::Riccati => Outcome::from_report(estimate(config, &problem, Mode::Riccati, opts)?),
        Command::Tikhonov => Outcome::from_report(estimate(config, &problem, Mode::Tikhonov, opts)?),
        Command::Simulate { disturbance } => simulate_problem(config, &problem, *disturbance, opts)?,
        Command::Validate { report } => validate(config, &problem, report.as_deref(), opts)?,
    };
    outcome.report.command = command.name().into();
    outcome.report.timings.total_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(outcome)
}

fn require_observations(opts: &RunOptions, mode: Mode) -> Result<&[Vector], CliError> {
    opts.observations
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("{} estimation needs --observations", mode.name())))
}

fn check_rows(y: &[Vector], count: usize, dim: usize) -> Result<(), CliError> {
    if y.len() != count {
        return Err(CliError::Dimension(vec![format!("observations: expected {count} rows, got {}", y.len())]));
    }
    if y.iter().any(|v| v.len() != dim) {
        return Err(CliError::Dimension(vec![format!("observations: rows must have {dim} values")]));
    }
    Ok(())
}

fn static_weights(
    q1: &descriptor_minimax::Matrix,
    q2: &descriptor_minimax::Matrix,
    kind: EstimateKind,
) -> Result<StaticEllipsoid, CliError> {
    Problem::static_bounds(q1, q2, kind)
}

/// Terminal functional padded to a full sequence.
fn ell_sequence(f: &Functional, dae: &DiscreteDae) -> Vec<Vector> {
    match f {
        Functional::Sequence(s) => s.clone(),
        Functional::Vector(v) => {
            let mut seq = vec![Vector::zeros(dae.state_dim()); dae.horizon() + 1];
            seq[dae.horizon()] = v.clone();
            seq
        }
        Functional::Timed(_) => unreachable!("not produced for discrete problems"),
    }
}

fn estimate(
    config: &ProblemConfig,
    problem: &Problem,
    mode: Mode,
    opts: &RunOptions,
) -> Result<ResultReport, CliError> {
    config.check_mode(mode)?;
    let ell = config.functional(problem, mode)?;
    let mut report = ResultReport::new("estimate");
    report.mode = Some(mode.name().into());
    let y = opts.observations.as_deref();

    match (problem, mode) {
        (Problem::Static { model, q1, q2 }, Mode::Apriori | Mode::Aposteriori) => {
            let Functional::Vector(ell) = ell else { unreachable!("static functionals are vectors") };
            if let Some(y) = y {
                check_rows(y, 1, model.observation_dim())?;
            }
            let r = if mode == Mode::Apriori {
                apriori_estimate(model, &static_weights(q1, q2, EstimateKind::Apriori)?, &ell, y.map(|y| &y[0]))?
            } else {
                let y = require_observations(opts, mode)?;
                aposteriori_estimate(model, &static_weights(q1, q2, EstimateKind::Aposteriori)?, &ell, &y[0])?
            };
            report.feasible = r.feasible();
            report.sigma_hat = Some(Sigma(r.sigma_hat));
            report.estimate = r.estimate();
            report.diagnostics.system_residual = r.solution.map(|s| s.system_residual);
        }
        (Problem::Discrete { dae, bounds }, Mode::Apriori) => {
            let seq = ell_sequence(&ell, dae);
            if let Some(y) = y {
                check_rows(y, dae.observed_steps(), dae.observation_dim())?;
            }
            let weights = bounds.flatten(EstimateKind::Apriori)?;
            let stacked_y = y.map(stack);
            let r = apriori_estimate(&dae.flatten(), &weights, &stack(&seq), stacked_y.as_ref())?;
            report.feasible = r.feasible();
            report.sigma_hat = Some(Sigma(r.sigma_hat));
            report.estimate = r.estimate();
            report.diagnostics.system_residual = r.solution.map(|s| s.system_residual);
        }
        (Problem::Discrete { dae, bounds }, Mode::Aposteriori) => {
            let seq = ell_sequence(&ell, dae);
            let y = require_observations(opts, mode)?;
            check_rows(y, dae.observed_steps(), dae.observation_dim())?;
            let r = variational_estimate(dae, bounds, &seq, y)?;
            report.feasible = r.feasible();
            report.sigma_hat = Some(Sigma(r.sigma_hat));
            report.estimate = r.estimate();
        }
        (Problem::Discrete { dae, bounds }, Mode::Filter) => {
            let Functional::Vector(ell) = ell else { unreachable!("checked by functional()") };
            let y = require_observations(opts, mode)?;
            check_rows(y, dae.horizon() + 1, dae.observation_dim())?;
            let run = filter_run(dae, bounds, y, &ell)?;
            report.estimate = Some(run.estimate);
            report.diagnostics.rank_ok = Some(true);
        }
        (Problem::Continuous { sys, bounds }, _) => {
            let grid = config.grid(opts.grid_steps)?;
            report.diagnostics.grid_steps = Some(grid.steps());
            continuous_estimate(&mut report, sys, bounds, &grid, &ell, mode, config, y)?;
        }
        _ => unreachable!("modes are checked per kind"),
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn continuous_estimate(
    report: &mut ResultReport,
    sys: &ContinuousDae,
    bounds: &ContinuousEllipsoid,
    grid: &TimeGrid,
    ell: &Functional,
    mode: Mode,
    config: &ProblemConfig,
    y: Option<&[Vector]>,
) -> Result<(), CliError> {
    let nodes = grid.steps() + 1;
    match (mode, ell) {
        (Mode::Apriori, Functional::Timed(ell)) => {
            if let Some(y) = y {
                if y.len() != nodes && y.len() != nodes - 1 {
                    return Err(CliError::Dimension(vec![format!(
                        "observations: expected {} or {} rows, got {}",
                        nodes - 1,
                        nodes,
                        y.len()
                    )]));
                }
            }
            let r = apriori_estimate_continuous(sys, bounds, ell, y, grid)?;
            report.feasible = r.feasible();
            report.sigma_hat = Some(Sigma(r.sigma_hat));
            report.estimate = r.estimate;
        }
        (Mode::Riccati, Functional::Vector(ell0)) => {
            if let Some(y) = y {
                check_rows(y, nodes, sys.observation_dim())?;
            }
            let r = riccati_filter(sys, bounds, ell0, y, grid)?;
            report.feasible = r.feasible;
            report.sigma_hat = Some(Sigma(r.sigma_hat));
            report.estimate = r.estimate;
        }
        (Mode::Tikhonov, Functional::Timed(ell)) => {
            let alphas = config.estimation.alphas.clone().unwrap_or_else(|| (1..=10).map(|k| 0.5f64.powi(k)).collect());
            let run = tikhonov_approximate(sys, bounds, ell, grid, &alphas)?;
            if let (Some(y), Some(last)) = (y, run.iterates.last()) {
                if y.len() != nodes && y.len() != nodes - 1 {
                    return Err(CliError::Dimension(vec![format!("observations: expected {nodes} rows")]));
                }
                let h = grid.step();
                report.estimate = Some(last.u_hat.iter().zip(y).map(|(u, y)| h * u.dot(y)).sum());
            }
            report.diagnostics.tikhonov = Some(TikhonovSummary {
                alphas,
                residuals: run.residuals,
                defects: run.iterates.iter().map(|it| it.defect).collect(),
            });
        }
        _ => unreachable!("functional shape follows the mode"),
    }
    Ok(())
}

fn seed_of(config: &ProblemConfig, opts: &RunOptions) -> u64 {
    opts.seed.or(config.seed).unwrap_or(0)
}

fn simulate_problem(
    config: &ProblemConfig,
    problem: &Problem,
    disturbance: Disturbance,
    opts: &RunOptions,
) -> Result<Outcome, CliError> {
    let seed = seed_of(config, opts);
    let (sim, extra) = match problem {
        Problem::Static { model, q1, q2 } => {
            // A static model is a descriptor system with no transitions.
            let dae =
                DiscreteDae::new(vec![model.f().clone()], vec![], vec![], model.b().clone(), vec![model.h().clone()])?;
            let bounds = DaeEllipsoid::new(q1.clone(), vec![], vec![q2.clone()])?;
            (simulate(&dae, &bounds, disturbance, seed)?, None)
        }
        Problem::Discrete { dae, bounds } => (simulate(dae, bounds, disturbance, seed)?, None),
        Problem::Continuous { sys, bounds } => {
            let grid = config.grid(opts.grid_steps)?;
            let (dae, weights) = discretize(sys, bounds, &grid)?;
            let sim = simulate(&dae, &weights, disturbance, seed)?;
            // The terminal node carries no noise weight; record it noise-free so
            // that every node has an observation.
            let t_end = *grid.nodes().last().expect("grid has nodes");
            let y_end = sys.h().at(t_end) * sim.x.last().expect("trajectory has states");
            (sim, Some(y_end))
        }
    };
    let mut observations = sim.y.clone();
    observations.extend(extra);
    let mut report = ResultReport::new("simulate");
    report.diagnostics.quadratic_form = Some(sim.quadratic_form);
    Ok(Outcome { report, exit_code: 0, trajectories: Some(Trajectories { states: sim.x, observations }) })
}

fn validate(
    config: &ProblemConfig,
    problem: &Problem,
    given: Option<&ResultReport>,
    opts: &RunOptions,
) -> Result<Outcome, CliError> {
    let mode = Mode::Aposteriori;
    let ell = config.functional(problem, mode)?;
    let y = require_observations(opts, mode)?;
    let (model, weights, ell, y): (StaticModel, StaticEllipsoid, Vector, Vector) = match (problem, ell) {
        (Problem::Static { model, q1, q2 }, Functional::Vector(ell)) => {
            check_rows(y, 1, model.observation_dim())?;
            (model.clone(), static_weights(q1, q2, EstimateKind::Aposteriori)?, ell, y[0].clone())
        }
        (Problem::Discrete { dae, bounds }, ell) => {
            check_rows(y, dae.observed_steps(), dae.observation_dim())?;
            (dae.flatten(), bounds.flatten(EstimateKind::Aposteriori)?, stack(&ell_sequence(&ell, dae)), stack(y))
        }
        _ => return Err(CliError::Usage("validate applies to static and discrete a posteriori problems".into())),
    };

    let (estimate, sigma) = match given {
        Some(r) => {
            let sigma = r.sigma_hat.ok_or_else(|| CliError::Usage("report has no sigma_hat".into()))?.0;
            (r.estimate, sigma)
        }
        None => {
            let r = aposteriori_estimate(&model, &weights, &ell, &y)?;
            (r.estimate(), r.sigma_hat)
        }
    };
    let mut report = ResultReport::new("validate");
    report.mode = Some(mode.name().into());
    report.estimate = estimate;
    report.sigma_hat = Some(Sigma(sigma));
    let Some(estimate) = estimate.filter(|_| sigma.is_finite()) else {
        report.feasible = false;
        return Ok(Outcome::from_report(report));
    };

    let samples = opts.samples.unwrap_or(DEFAULT_SAMPLES);
    let set = sample_reachability(&model, &weights, &y, samples, seed_of(config, opts))?;
    let centre_gap = match quadratic_center_oracle(&model, &weights, &y) {
        Ok(x) => Some((ell.dot(&x) - estimate).abs()),
        Err(CoreError::Precondition(_) | CoreError::SingularNormalEquations) => None,
        Err(e) => return Err(e.into()),
    };
    let (max_dev, violations) = if set.empty {
        (0.0, 0)
    } else {
        let c = chebyshev_check(&set.samples, &ell, estimate, sigma)?;
        (c.max_dev, c.violations)
    };
    report.diagnostics.oracle =
        Some(OracleSummary { samples: set.samples.len(), empty: set.empty, max_dev, violations, centre_gap });
    let exit_code = if violations > 0 { EXIT_ERROR } else { 0 };
    Ok(Outcome { report, exit_code, trajectories: None })
}
