//! Command-line front end: scenario files in, trajectories and costs out.
//!
//! Three subcommands:
//!
//! * `solve`  — dispatch a scenario to a solver, emit a 513-point
//!   trajectory CSV (`s,x,dxds`) and a cost JSON.
//! * `verify` — run the self-check battery (boundary values, optimality
//!   residual, cost vs quadrature, oracle agreement, invariant drift) and
//!   print a pass/fail table.
//! * `sweep`  — re-solve across a range of risk aversions and emit a CSV
//!   of cost components; totals must be nondecreasing or the run fails.
//!
//! Exit codes: 0 success, 1 check failure, 2 parse/usage error, 3 solver
//! failure. All numeric output uses shortest round-trip formatting, so
//! identical inputs produce byte-identical files.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::invariants::{ermakov_invariant, solve_pinney};
use crate::model::{el_residual, evaluate_cost, CoefficientFunction, FrameLabel, Scenario, Trajectory};
use crate::oracle::solve_discrete;
use crate::riccati::{coefficient_w, reconstruct, solve_riccati, RiccatiCondition, WFrame};
use crate::solve::{solve_scenario, Method, SolveOutcome};

const TRAJECTORY_POINTS: usize = 513;
const VERIFY_ORACLE_GRID: usize = 4096;

#[derive(Parser)]
#[command(
    name = "optexec",
    version,
    about = "Optimal execution schedules under time-varying impact and volatility"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write the optimal trajectory and its cost.
    Solve {
        /// Scenario file (JSON).
        #[arg(long)]
        scenario: PathBuf,
        /// Solver to use.
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        /// Interval count for the discrete oracle.
        #[arg(long, default_value_t = 4096)]
        grid: usize,
        /// Trajectory CSV path (omit to skip writing the trajectory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cost JSON path (omit to print the cost to standard output).
        #[arg(long)]
        cost_out: Option<PathBuf>,
    },
    /// Run the verification battery on a scenario.
    Verify {
        /// Scenario file (JSON).
        #[arg(long)]
        scenario: PathBuf,
        /// Tolerance for the relative checks.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Solve across a range of risk aversions.
    Sweep {
        /// Scenario file (JSON).
        #[arg(long)]
        scenario: PathBuf,
        /// Parameter to sweep (only "lambda" is supported).
        #[arg(long)]
        param: String,
        /// First parameter value.
        #[arg(long)]
        from: f64,
        /// Last parameter value.
        #[arg(long)]
        to: f64,
        /// Number of sweep points (at least 2).
        #[arg(long)]
        steps: usize,
        /// Sweep CSV path (omit to print to standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Auto,
    ClosedForm,
    Riccati,
    Oracle,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => Method::Auto,
            MethodArg::ClosedForm => Method::ClosedForm,
            MethodArg::Riccati => Method::Riccati,
            MethodArg::Oracle => Method::Oracle,
        }
    }
}

/// Failure modes of a subcommand, each mapping to a process exit code.
#[derive(Debug)]
enum CmdError {
    /// Scenario file unreadable or invalid — exit 2.
    Parse(String),
    /// Flag combination invalid — exit 2.
    Usage(String),
    /// Output file unwritable — exit 2.
    Io(String),
    /// A solver failed — exit 3.
    Solver(crate::Error),
    /// A verification or sweep assertion failed — exit 1.
    CheckFailed(String),
}

impl CmdError {
    fn exit_code(&self) -> i32 {
        match self {
            CmdError::CheckFailed(_) => 1,
            CmdError::Parse(_) | CmdError::Usage(_) | CmdError::Io(_) => 2,
            CmdError::Solver(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            CmdError::Parse(m) => format!("parse error: {m}"),
            CmdError::Usage(m) => format!("usage error: {m}"),
            CmdError::Io(m) => format!("io error: {m}"),
            CmdError::Solver(e) => format!("solver error: {e}"),
            CmdError::CheckFailed(m) => m.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Scenario file schema
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    t0: f64,
    #[serde(rename = "T")]
    t_end: f64,
    x0: f64,
    lambda: f64,
    eta: CoefficientSpec,
    sigma: CoefficientSpec,
    #[serde(default)]
    frame: FrameSpec,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum CoefficientSpec {
    Constant { c0: f64 },
    Exponential { c0: f64, rate: f64 },
    CoshPower { c0: f64, gamma: f64, a: f64, power: u8 },
    QuadraticProduct { c0: f64, k: f64 },
    Tabulated { knots: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FrameSpec {
    #[default]
    Physical,
    Trader,
}

impl CoefficientSpec {
    fn build(self, which: &str) -> Result<CoefficientFunction, CmdError> {
        let built = match self {
            CoefficientSpec::Constant { c0 } => CoefficientFunction::constant(c0),
            CoefficientSpec::Exponential { c0, rate } => {
                CoefficientFunction::exponential(c0, rate)
            }
            CoefficientSpec::CoshPower { c0, gamma, a, power } => {
                CoefficientFunction::cosh_power(c0, gamma, a, power)
            }
            CoefficientSpec::QuadraticProduct { c0, k } => {
                CoefficientFunction::quadratic_product(c0, k)
            }
            CoefficientSpec::Tabulated { knots, values } => {
                CoefficientFunction::tabulated(knots, values)
            }
        };
        built.map_err(|e| CmdError::Parse(format!("{which}: {e}")))
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::Parse(format!("{}: {e}", path.display())))?;
    let file: ScenarioFile = serde_json::from_str(&text)
        .map_err(|e| CmdError::Parse(format!("{}: {e}", path.display())))?;
    let eta = file.eta.build("eta")?;
    let sigma = file.sigma.build("sigma")?;
    let frame = match file.frame {
        FrameSpec::Physical => FrameLabel::Physical,
        FrameSpec::Trader => FrameLabel::Trader,
    };
    Scenario::new(file.t0, file.t_end, file.x0, file.lambda, eta, sigma, frame)
        .map_err(|e| CmdError::Parse(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Output formats
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct CostJson {
    total: f64,
    impact_term: f64,
    risk_term: f64,
    method: String,
    abs_error_estimate: f64,
}

fn cost_json(scenario: &Scenario, outcome: &SolveOutcome) -> Result<String, CmdError> {
    let (impact, risk) = match &outcome.cost.breakdown {
        Some(b) => (b.impact, b.risk),
        None => {
            let q = evaluate_cost(scenario, &outcome.trajectory).map_err(CmdError::Solver)?;
            let b = q.breakdown.expect("quadrature always splits the cost");
            (b.impact, b.risk)
        }
    };
    let json = CostJson {
        total: outcome.cost.total,
        impact_term: impact,
        risk_term: risk,
        method: outcome.cost.method.clone(),
        abs_error_estimate: outcome.cost.abs_error_estimate,
    };
    let mut text = serde_json::to_string(&json)
        .map_err(|e| CmdError::Io(format!("cost serialization: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn trajectory_csv(trajectory: &Trajectory) -> String {
    let (t0, t_end) = trajectory.span();
    let mut csv = String::with_capacity(TRAJECTORY_POINTS * 48);
    csv.push_str("s,x,dxds\n");
    for i in 0..TRAJECTORY_POINTS {
        let s = if i == TRAJECTORY_POINTS - 1 {
            t_end
        } else {
            t0 + (t_end - t0) * i as f64 / (TRAJECTORY_POINTS - 1) as f64
        };
        let x = trajectory.value(s);
        let d = trajectory.derivative(s);
        csv.push_str(&format!("{s},{x},{d}\n"));
    }
    csv
}

fn write_text(path: &Path, text: &str) -> Result<(), CmdError> {
    std::fs::write(path, text).map_err(|e| CmdError::Io(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn run_solve(
    scenario_path: &Path,
    method: MethodArg,
    grid: usize,
    out: Option<&Path>,
    cost_out: Option<&Path>,
) -> Result<(), CmdError> {
    if grid < 2 {
        return Err(CmdError::Usage(format!(
            "--grid must be at least 2, got {grid}"
        )));
    }
    let scenario = load_scenario(scenario_path)?;
    let outcome =
        solve_scenario(&scenario, method.into(), grid).map_err(CmdError::Solver)?;
    if let Some(path) = out {
        write_text(path, &trajectory_csv(&outcome.trajectory))?;
    }
    let json = cost_json(&scenario, &outcome)?;
    match cost_out {
        Some(path) => write_text(path, &json)?,
        None => print!("{json}"),
    }
    Ok(())
}

struct Check {
    name: &'static str,
    outcome: CheckOutcome,
}

enum CheckOutcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn run_verify(scenario_path: &Path, tol: f64) -> Result<(), CmdError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CmdError::Usage(format!(
            "--tol must be finite and positive, got {tol}"
        )));
    }
    let scenario = load_scenario(scenario_path)?;
    let outcome =
        solve_scenario(&scenario, Method::Auto, VERIFY_ORACLE_GRID).map_err(CmdError::Solver)?;
    let x0 = scenario.x0();
    let scale = x0.abs().max(1.0);
    let mut checks = Vec::new();

    // Boundary values.
    {
        let start = (outcome.trajectory.value(scenario.t0()) - x0).abs();
        let end = outcome.trajectory.value(scenario.t_end()).abs();
        let limit = 1e-12 * scale;
        let detail = format!("start dev {start:.3e}, end dev {end:.3e} (limit {limit:.3e})");
        checks.push(Check {
            name: "boundary-values",
            outcome: if start <= limit && end <= limit {
                CheckOutcome::Pass(detail)
            } else {
                CheckOutcome::Fail(detail)
            },
        });
    }

    // Optimality-equation residual.
    {
        match el_residual(&scenario, &outcome.trajectory, 1001) {
            Ok(r) => {
                let limit = tol * scale;
                let detail = format!("sup {:.3e} (limit {limit:.3e})", r.sup);
                checks.push(Check {
                    name: "el-residual",
                    outcome: if r.sup <= limit {
                        CheckOutcome::Pass(detail)
                    } else {
                        CheckOutcome::Fail(detail)
                    },
                });
            }
            Err(e) => checks.push(Check {
                name: "el-residual",
                outcome: CheckOutcome::Fail(format!("could not evaluate: {e}")),
            }),
        }
    }

    // Reported cost against direct quadrature of the functional.
    {
        match evaluate_cost(&scenario, &outcome.trajectory) {
            Ok(q) => {
                let dev = (outcome.cost.total - q.total).abs();
                let limit = tol * outcome.cost.total.abs().max(1.0) + q.abs_error_estimate;
                let detail = format!("dev {dev:.3e} (limit {limit:.3e})");
                checks.push(Check {
                    name: "cost-vs-quadrature",
                    outcome: if dev <= limit {
                        CheckOutcome::Pass(detail)
                    } else {
                        CheckOutcome::Fail(detail)
                    },
                });
            }
            Err(e) => checks.push(Check {
                name: "cost-vs-quadrature",
                outcome: CheckOutcome::Fail(format!("could not evaluate: {e}")),
            }),
        }
    }

    // Independent discrete oracle.
    {
        match solve_discrete(&scenario, VERIFY_ORACLE_GRID) {
            Ok((_, oracle)) => {
                let dev = (outcome.cost.total - oracle.total).abs();
                let limit =
                    tol * outcome.cost.total.abs().max(1.0) + oracle.abs_error_estimate;
                let detail = format!("dev {dev:.3e} (limit {limit:.3e})");
                checks.push(Check {
                    name: "oracle-agreement",
                    outcome: if dev <= limit {
                        CheckOutcome::Pass(detail)
                    } else {
                        CheckOutcome::Fail(detail)
                    },
                });
            }
            Err(e) => checks.push(Check {
                name: "oracle-agreement",
                outcome: CheckOutcome::Fail(format!("oracle failed: {e}")),
            }),
        }
    }

    // Conserved-quantity drift along the trader-frame solution.
    {
        checks.push(Check {
            name: "ermakov-drift",
            outcome: ermakov_check(&scenario, tol),
        });
    }

    let mut failures = 0;
    for check in &checks {
        let (tag, detail) = match &check.outcome {
            CheckOutcome::Pass(d) => ("PASS", d),
            CheckOutcome::Fail(d) => {
                failures += 1;
                ("FAIL", d)
            }
            CheckOutcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag}  {:<20} {detail}", check.name);
    }
    if failures == 0 {
        println!("all checks passed");
        Ok(())
    } else {
        println!("{failures} of {} checks failed", checks.len());
        Err(CmdError::CheckFailed(format!(
            "verification failed for {}",
            scenario_path.display()
        )))
    }
}

fn ermakov_check(scenario: &Scenario, tol: f64) -> CheckOutcome {
    let w = match coefficient_w(scenario, WFrame::TauFrame) {
        Ok(w) => w,
        Err(e) => return CheckOutcome::Fail(format!("coefficient failed: {e}")),
    };
    let start = w.span().0;
    if w.value(start) <= 0.0 {
        return CheckOutcome::Skip(
            "risk coefficient vanishes at the start; no default companion".to_owned(),
        );
    }
    let drift_limit = tol;
    let result = solve_riccati(&w, RiccatiCondition::default())
        .and_then(|sol| reconstruct(&sol, scenario.x0().abs().max(1.0), w.span().0, w.span().1))
        .and_then(|(traj_tau, _)| {
            let witness = solve_pinney(&w, None)?;
            ermakov_invariant(&witness, &traj_tau, 513)
        });
    match result {
        Ok(report) => {
            let detail = format!("drift {:.3e} (limit {drift_limit:.3e})", report.drift);
            if report.drift <= drift_limit {
                CheckOutcome::Pass(detail)
            } else {
                CheckOutcome::Fail(detail)
            }
        }
        Err(e) => CheckOutcome::Fail(format!("could not evaluate: {e}")),
    }
}

fn run_sweep(
    scenario_path: &Path,
    param: &str,
    from: f64,
    to: f64,
    steps: usize,
    out: Option<&Path>,
) -> Result<(), CmdError> {
    if param != "lambda" {
        return Err(CmdError::Usage(format!(
            "only --param lambda is supported, got {param:?}"
        )));
    }
    if steps < 2 {
        return Err(CmdError::Usage(format!(
            "--steps must be at least 2, got {steps}"
        )));
    }
    if !(from.is_finite() && to.is_finite()) || from > to {
        return Err(CmdError::Usage(format!(
            "need finite --from <= --to, got {from} and {to}"
        )));
    }
    if from < 0.0 {
        return Err(CmdError::Usage(format!(
            "lambda must be nonnegative, got --from {from}"
        )));
    }
    let scenario = load_scenario(scenario_path)?;

    let mut rows = Vec::with_capacity(steps);
    for k in 0..steps {
        let lambda = if k == steps - 1 {
            to
        } else {
            from + (to - from) * k as f64 / (steps - 1) as f64
        };
        let point = scenario
            .with_lambda(lambda)
            .map_err(|e| CmdError::Usage(format!("lambda = {lambda}: {e}")))?;
        let outcome = solve_scenario(&point, Method::Auto, 4096).map_err(CmdError::Solver)?;
        let (impact, risk) = match &outcome.cost.breakdown {
            Some(b) => (b.impact, b.risk),
            None => {
                let q = evaluate_cost(&point, &outcome.trajectory).map_err(CmdError::Solver)?;
                let b = q.breakdown.expect("quadrature always splits the cost");
                (b.impact, b.risk)
            }
        };
        rows.push((lambda, outcome.cost.total, impact, risk));
    }

    let mut csv = String::from("lambda,total,impact_term,risk_term\n");
    for (lambda, total, impact, risk) in &rows {
        csv.push_str(&format!("{lambda},{total},{impact},{risk}\n"));
    }
    match out {
        Some(path) => write_text(path, &csv)?,
        None => print!("{csv}"),
    }

    // The optimal cost is an infimum of lambda-linear functions, so it must
    // be nondecreasing in lambda; a violation beyond rounding slack means a
    // solver bug, not a data problem.
    for w in rows.windows(2) {
        let slack = 1e-12 * w[0].1.abs().max(1.0);
        if w[1].1 < w[0].1 - slack {
            return Err(CmdError::CheckFailed(format!(
                "total cost decreased from {} (lambda = {}) to {} (lambda = {})",
                w[0].1, w[0].0, w[1].1, w[1].0
            )));
        }
    }
    Ok(())
}

/// Parses the process arguments, runs the chosen subcommand, and returns
/// the exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve {
            scenario,
            method,
            grid,
            out,
            cost_out,
        } => run_solve(scenario, *method, *grid, out.as_deref(), cost_out.as_deref()),
        Command::Verify { scenario, tol } => run_verify(scenario, *tol),
        Command::Sweep {
            scenario,
            param,
            from,
            to,
            steps,
            out,
        } => run_sweep(scenario, param, *from, *to, *steps, out.as_deref()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.message());
            e.exit_code()
        }
    }
}
