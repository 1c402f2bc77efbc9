//! Command-line interface: fitting, equilibrium computation, counterexample
//! demos, and parameter sweeps.
//!
//! Exit codes: 0 success, 1 parse/input error, 2 solver failure, 3 no
//! equilibrium found, 4 sweep-level failure. With `--json`, standard output
//! carries only machine-readable JSON; human text goes to standard error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use stratreg::error::Error;
use stratreg::experiments::{
    ingest_csv, ppoa_q, run_sweep, unbounded_instance, SweepConfig,
};
use stratreg::facility::{theta_n_instance, FacilityInstance};
use stratreg::game::{
    best_response_dynamics, find_pne_enumeration, is_pne, outcome, DynamicsOptions, GameInstance,
    ReportProfile, Schedule, SolveMethod, MAX_ENUMERATION_AGENTS,
};
use stratreg::linalg::Matrix;
use stratreg::linmap::{find_all_pne_linear, LinearMapGame};
use stratreg::regression::{fit, loss_value, Dataset, RegressionConfig, Regularizer};

#[derive(Parser)]
#[command(name = "stratreg", version, about = "Strategic lp-norm regression toolkit")]
struct Cli {
    /// Emit machine-readable JSON on stdout; human text goes to stderr.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the (p,R) regression on a CSV dataset and write the hyperplane.
    Fit(FitArgs),
    /// Compute a pure Nash equilibrium of the reporting game on a dataset.
    Equilibrium(EquilibriumArgs),
    /// Run a named counterexample demonstration.
    Demo(DemoArgs),
    /// Run a parameter sweep from a JSON config file.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RegChoice {
    None,
    Ridge,
    SmoothL1,
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV file (header row required; comma separated; UTF-8).
    #[arg(long)]
    input: PathBuf,
    /// Target column (default: the last column).
    #[arg(long)]
    target: Option<String>,
    /// Comma-separated feature columns (default: every non-target column).
    /// Pass an empty string for the bare constant column.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    features: Option<Vec<String>>,
}

#[derive(Args)]
struct SolverArgs {
    /// Residual exponent p > 1.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, value_enum, default_value_t = RegChoice::None)]
    regularizer: RegChoice,
    /// Regularization weight.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Smoothing radius for the smooth-l1 regularizer.
    #[arg(long, default_value_t = 1e-6)]
    mu: f64,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Gradient tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
    /// Solver iteration budget.
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Output JSON path.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodChoice {
    Auto,
    Dynamics,
    Enumeration,
}

#[derive(Args)]
struct EquilibriumArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Optional peaks file, one value in [0,1] per line (default: the
    /// dataset's target column — all-strategic honest peaks).
    #[arg(long)]
    peaks: Option<PathBuf>,
    /// Strategic agents: "all" or comma-separated 0-based row indices.
    #[arg(long, default_value = "all")]
    strategic: String,
    #[arg(long, value_enum, default_value_t = MethodChoice::Auto)]
    method: MethodChoice,
    /// Equilibrium-check tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Best-response bisection tolerance.
    #[arg(long, default_value_t = 1e-9)]
    br_tolerance: f64,
    /// Best-response update budget for dynamics.
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Update order for dynamics.
    #[arg(long, value_enum, default_value_t = ScheduleChoice::RoundRobin)]
    schedule: ScheduleChoice,
    /// Output JSON path.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ScheduleChoice {
    RoundRobin,
    LargestViolation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DemoName {
    Example1,
    Example2,
    Theorem2,
    Theorem10,
    Prop9,
}

#[derive(Args)]
struct DemoArgs {
    /// Which demonstration to run.
    name: DemoName,
    /// Epsilon for theorem10/prop9.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Number of agents for theorem2.
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Residual exponent.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Optional path for the JSON result.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep configuration (JSON, see the library's SweepConfig schema).
    #[arg(long)]
    config: PathBuf,
    /// Directory for the sweep CSV and run manifest.
    #[arg(long)]
    output_dir: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

// ---------------------------------------------------------------------------
// Run manifests
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RunManifest {
    command: String,
    parameters: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    outputs: Vec<String>,
    duration_ms: u128,
    started_at_epoch_ms: u128,
    finished_at_epoch_ms: u128,
    artifact_version: String,
}

fn epoch_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn fnv64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

fn artifact_version(parameters: &Value) -> String {
    let digest = fnv64(parameters.to_string().as_bytes());
    format!("stratreg-{}+{:012x}", env!("CARGO_PKG_VERSION"), digest & 0xffff_ffff_ffff)
}

fn write_manifest(
    path: &Path,
    command: &str,
    parameters: Value,
    seed: Option<u64>,
    outputs: &[&Path],
    started_at: u128,
    started: Instant,
) -> Result<(), Error> {
    let manifest = RunManifest {
        command: command.to_string(),
        artifact_version: artifact_version(&parameters),
        parameters,
        seed,
        outputs: outputs
            .iter()
            .map(|p| p.to_string_lossy().into_owned())
            .collect(),
        duration_ms: started.elapsed().as_millis(),
        started_at_epoch_ms: started_at,
        finished_at_epoch_ms: epoch_ms(),
    };
    let body = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, body)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

struct Output {
    json: bool,
}

impl Output {
    /// Human-readable line: stderr in JSON mode, stdout otherwise.
    fn human(&self, line: &str) {
        if self.json {
            eprintln!("{line}");
        } else {
            println!("{line}");
        }
    }

    /// Machine-readable payload on stdout (JSON mode only).
    fn payload(&self, value: &Value) {
        if self.json {
            println!("{value}");
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::NonConvergence { .. } => 2,
        Error::EquilibriumNotFound(_) => 3,
        Error::SweepFailed(_) => 4,
        _ => 1,
    }
}

fn csv_header(path: &Path) -> Result<Vec<String>, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Io(e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::Io(e.to_string()))?;
    Ok(headers.iter().map(str::to_string).collect())
}

/// Loads a dataset per the CLI column conventions: target defaults to the
/// last column, features to every other column.
fn load_dataset(data: &DataArgs) -> Result<(Dataset<f64>, usize, String, Vec<String>), Error> {
    let header = csv_header(&data.input)?;
    if header.is_empty() {
        return Err(Error::EmptyDataset("no columns in header".into()));
    }
    let target = match &data.target {
        Some(t) => t.clone(),
        None => header.last().expect("non-empty header").clone(),
    };
    let features: Vec<String> = match &data.features {
        Some(cols) => cols.iter().filter(|c| !c.is_empty()).cloned().collect(),
        None => header.iter().filter(|c| **c != target).cloned().collect(),
    };
    let report = ingest_csv(&data.input, &features, &target)?;
    Ok((report.dataset, report.rows_dropped, target, features))
}

fn build_config(solver: &SolverArgs, tolerance: f64, max_iter: usize) -> Result<RegressionConfig<f64>, Error> {
    let regularizer = match solver.regularizer {
        RegChoice::None => Regularizer::None,
        RegChoice::Ridge => Regularizer::Ridge { weight: solver.lambda },
        RegChoice::SmoothL1 => Regularizer::SmoothedAbsolute {
            weight: solver.lambda,
            radius: solver.mu,
        },
    };
    RegressionConfig::new(solver.p)?
        .with_regularizer(regularizer)?
        .with_gradient_tolerance(tolerance)?
        .with_max_iterations(max_iter)
}

fn parse_strategic(arg: &str, n: usize) -> Result<Vec<usize>, Error> {
    if arg.trim().eq_ignore_ascii_case("all") {
        return Ok((0..n).collect());
    }
    arg.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidParameter(format!("bad strategic index {s:?}")))
        })
        .collect()
}

fn read_peaks(path: &Path) -> Result<Vec<f64>, Error> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad peak value {l:?}")))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_fit(out: &Output, args: &FitArgs) -> Result<(), Error> {
    let started_at = epoch_ms();
    let started = Instant::now();
    let (dataset, rows_dropped, target, features) = load_dataset(&args.data)?;
    let config = build_config(&args.solver, args.tolerance, args.max_iter)?;

    let hyperplane = fit(&dataset, dataset.true_responses(), &config)?;
    let loss = loss_value(&dataset, dataset.true_responses(), &config, &hyperplane.coefficients)?;

    let result = json!({
        "command": "fit",
        "input": args.data.input.to_string_lossy(),
        "target": target,
        "features": features,
        "rows": dataset.n(),
        "rows_dropped": rows_dropped,
        "p": args.solver.p,
        "coefficients": hyperplane.coefficients,
        "outcomes": hyperplane.outcomes,
        "residuals": hyperplane.residuals,
        "loss": loss,
    });
    fs::write(&args.output, serde_json::to_string_pretty(&result).unwrap())?;

    let parameters = json!({
        "input": args.data.input.to_string_lossy(),
        "target": target,
        "p": args.solver.p,
        "regularizer": format!("{:?}", args.solver.regularizer),
        "lambda": args.solver.lambda,
        "tolerance": args.tolerance,
        "max_iter": args.max_iter,
    });
    let manifest_path = manifest_path_for(&args.output);
    write_manifest(&manifest_path, "fit", parameters, None, &[&args.output], started_at, started)?;

    out.human(&format!(
        "fit: {} rows, p = {}, loss {:.6e}, max residual {:.3e} -> {}",
        dataset.n(),
        args.solver.p,
        loss,
        hyperplane.residuals.iter().cloned().fold(0.0, f64::max),
        args.output.display()
    ));
    out.payload(&result);
    Ok(())
}

fn manifest_path_for(output: &Path) -> PathBuf {
    let mut os = output.as_os_str().to_owned();
    os.push(".manifest.json");
    PathBuf::from(os)
}

fn cmd_equilibrium(out: &Output, args: &EquilibriumArgs) -> Result<(), Error> {
    let started_at = epoch_ms();
    let started = Instant::now();
    let (dataset, rows_dropped, target, _features) = load_dataset(&args.data)?;
    let strategic = parse_strategic(&args.strategic, dataset.n())?;
    let dataset = dataset.with_strategic_set(strategic)?;
    let config = build_config(&args.solver, 1e-10, 500)?;

    let game = match &args.peaks {
        None => GameInstance::new(dataset, config)?,
        Some(path) => {
            let peaks = read_peaks(path)?;
            GameInstance::with_peaks(dataset, config, peaks)?
        }
    };

    let options = DynamicsOptions {
        schedule: match args.schedule {
            ScheduleChoice::RoundRobin => Schedule::RoundRobin,
            ScheduleChoice::LargestViolation => Schedule::LargestViolationFirst,
        },
        max_iterations: args.max_iter,
        pne_tolerance: args.tolerance,
        br_tolerance: args.br_tolerance,
        ..DynamicsOptions::default()
    };

    let m = game.strategic_count();
    let mut result = match args.method {
        MethodChoice::Dynamics => {
            best_response_dynamics(&game, &game.honest_profile(), &options)?
        }
        MethodChoice::Enumeration => {
            let found = find_pne_enumeration(&game, args.tolerance)?;
            match found.equilibria.into_iter().next() {
                Some(eq) => eq,
                None => {
                    // Report the honest state as diagnostics.
                    let mut diag =
                        best_response_dynamics(&game, &game.honest_profile(), &DynamicsOptions {
                            max_iterations: 0,
                            ..options.clone()
                        })?;
                    diag.method = SolveMethod::Enumeration;
                    diag.converged = false;
                    diag
                }
            }
        }
        MethodChoice::Auto => {
            let dynamics = best_response_dynamics(&game, &game.honest_profile(), &options)?;
            if dynamics.converged || m > MAX_ENUMERATION_AGENTS {
                dynamics
            } else {
                let found = find_pne_enumeration(&game, args.tolerance)?;
                found.equilibria.into_iter().next().unwrap_or(dynamics)
            }
        }
    };
    // The equilibrium check may hold even when dynamics hit the budget.
    if !result.converged {
        let (ok, violation) = is_pne(&game, &result.reports, args.tolerance)?;
        if ok {
            result.converged = true;
            result.pne_violation = violation;
        }
    }

    let payload = json!({
        "command": "equilibrium",
        "input": args.data.input.to_string_lossy(),
        "target": target,
        "rows_dropped": rows_dropped,
        "strategic_agents": m,
        "method": result.method,
        "reports": result.reports.reports(),
        "coefficients": result.hyperplane.coefficients,
        "outcomes": result.hyperplane.outcomes,
        "residuals": result.hyperplane.residuals,
        "iterations": result.iterations,
        "converged": result.converged,
        "stop_reason": result.stop_reason,
        "max_report_change": result.max_report_change,
        "pne_violation": result.pne_violation,
    });
    fs::write(&args.output, serde_json::to_string_pretty(&payload).unwrap())?;

    let parameters = json!({
        "input": args.data.input.to_string_lossy(),
        "p": args.solver.p,
        "method": format!("{:?}", args.method),
        "tolerance": args.tolerance,
        "br_tolerance": args.br_tolerance,
        "max_iter": args.max_iter,
    });
    write_manifest(
        &manifest_path_for(&args.output),
        "equilibrium",
        parameters,
        None,
        &[&args.output],
        started_at,
        started,
    )?;

    out.human(&format!(
        "equilibrium: method {:?}, converged {}, iterations {}, violation {:.3e} -> {}",
        result.method,
        result.converged,
        result.iterations,
        result.pne_violation,
        args.output.display()
    ));
    out.payload(&payload);

    if result.converged {
        Ok(())
    } else {
        Err(Error::EquilibriumNotFound(format!(
            "not converged after {} iterations (violation {:.3e}); diagnostics written to {}",
            result.iterations,
            result.pne_violation,
            args.output.display()
        )))
    }
}

// Finite-strategy check used by the example1 demo: each agent may only play
// {0, y_i, 1} under the 1D average rule.
fn finite_game_is_pne(peaks: &[f64], reports: &[f64]) -> bool {
    let n = peaks.len() as f64;
    let mean = |rs: &[f64]| rs.iter().sum::<f64>() / n;
    for (i, &peak) in peaks.iter().enumerate() {
        let current_gap = (mean(reports) - peak).abs();
        for alt in [0.0, peak, 1.0] {
            let mut changed = reports.to_vec();
            changed[i] = alt;
            if (mean(&changed) - peak).abs() < current_gap - 1e-15 {
                return false;
            }
        }
    }
    true
}

fn demo_payload(args: &DemoArgs) -> Result<(Value, Vec<String>), Error> {
    match args.name {
        DemoName::Example1 => {
            let peaks = vec![0.4, 0.5];
            let game = FacilityInstance::all_strategic(peaks.clone(), 2.0)?
                .to_game_instance()?;
            let found = find_pne_enumeration(&game, 1e-6)?;
            let eq = found
                .equilibria
                .first()
                .ok_or_else(|| Error::EquilibriumNotFound("example1 enumeration".into()))?;
            let honest = ReportProfile::new(peaks.clone())?;
            let (honest_cont, _) = is_pne(&game, &honest, 1e-6)?;
            let honest_finite = finite_game_is_pne(&peaks, &peaks);
            let payload = json!({
                "demo": "example1",
                "peaks": peaks,
                "continuous_pne_reports": eq.reports.reports(),
                "pne_outcome": eq.hyperplane.outcomes[0],
                "honest_is_pne_continuous": honest_cont,
                "honest_is_pne_finite_game": honest_finite,
            });
            let human = vec![
                format!(
                    "example1: continuous-game equilibrium reports {:?} with outcome {:.4}",
                    eq.reports.reports(),
                    eq.hyperplane.outcomes[0]
                ),
                format!(
                    "example1: honest reporting is {} of the continuous game, {} of the finite {{0, y, 1}} game",
                    if honest_cont { "an equilibrium" } else { "NOT an equilibrium" },
                    if honest_finite { "an equilibrium" } else { "NOT an equilibrium" },
                ),
            ];
            Ok((payload, human))
        }
        DemoName::Example2 => {
            let map = Matrix::from_rows(vec![vec![0.8, -1.0], vec![-1.2, 1.0]])?;
            let game = LinearMapGame::new(map, vec![0.0, 0.0])?;
            let found = find_all_pne_linear(&game, 0.05)?;
            let equilibria: Vec<Value> = found
                .equilibria
                .iter()
                .map(|eq| json!({"reports": eq.reports, "outcomes": eq.outcomes}))
                .collect();
            let human = vec![format!(
                "example2: {} distinct equilibria; outcomes {:?}",
                found.equilibria.len(),
                found
                    .equilibria
                    .iter()
                    .map(|eq| eq.outcomes.clone())
                    .collect::<Vec<_>>()
            )];
            Ok((
                json!({"demo": "example2", "equilibria": equilibria}),
                human,
            ))
        }
        DemoName::Theorem2 => {
            let theta = theta_n_instance(args.n, args.p)?;
            let game = theta.instance.to_game_instance()?;
            let result =
                best_response_dynamics(&game, &game.honest_profile(), &DynamicsOptions::default())?;
            let measured = ppoa_q(game.dataset(), &result.hyperplane, 2.0)?;
            let payload = json!({
                "demo": "theorem2",
                "n": args.n,
                "p": args.p,
                "measured_ppoa": measured.value,
                "analytic_ppoa": theta.analytic_ppoa,
                "relative_error": (measured.value - theta.analytic_ppoa).abs() / theta.analytic_ppoa,
            });
            let human = vec![format!(
                "theorem2: n = {}, p = {}: measured PPoA {:.6} vs analytic {} ({}convergent dynamics)",
                args.n,
                args.p,
                measured.value,
                theta.analytic_ppoa,
                if result.converged { "" } else { "non-" }
            )];
            Ok((payload, human))
        }
        DemoName::Theorem10 => {
            let inst = unbounded_instance(args.epsilon, args.p)?;
            let hyp = outcome(&inst.game, &inst.equilibrium)?;
            let measured = ppoa_q(inst.game.dataset(), &hyp, 2.0)?;
            let (equilibrium_ok, violation) = is_pne(&inst.game, &inst.equilibrium, 1e-6)?;
            let payload = json!({
                "demo": "theorem10",
                "epsilon": args.epsilon,
                "p": args.p,
                "measured_ppoa": measured.value,
                "analytic_ppoa": inst.analytic_ppoa,
                "relative_error": (measured.value - inst.analytic_ppoa).abs() / inst.analytic_ppoa,
                "profile_is_pne": equilibrium_ok,
                "pne_violation": violation,
            });
            let human = vec![format!(
                "theorem10: eps = {}, p = {}: measured PPoA {:.4} vs analytic {:.4}; certified profile is {}an equilibrium",
                args.epsilon,
                args.p,
                measured.value,
                inst.analytic_ppoa,
                if equilibrium_ok { "" } else { "NOT " }
            )];
            Ok((payload, human))
        }
        DemoName::Prop9 => {
            let inst = unbounded_instance(args.epsilon, 2.0)?;
            let run = |tolerance: f64| -> Result<Value, Error> {
                let options = DynamicsOptions {
                    pne_tolerance: tolerance,
                    record_trajectory: true,
                    ..DynamicsOptions::default()
                };
                let r = best_response_dynamics(&inst.game, &inst.game.honest_profile(), &options)?;
                let traj = r.trajectory.as_ref().expect("trajectory recorded");
                let agent2_max = traj.iter().map(|p| p[1]).fold(0.0, f64::max);
                let agent3_min = traj.iter().map(|p| p[2]).fold(1.0, f64::min);
                Ok(json!({
                    "pne_tolerance": tolerance,
                    "converged": r.converged,
                    "stop_reason": r.stop_reason,
                    "iterations": r.iterations,
                    "pne_violation": r.pne_violation,
                    "agent2_report_max": agent2_max,
                    "agent2_stays_below_one": agent2_max < 1.0,
                    "agent3_report_min": agent3_min,
                    "agent3_stays_above_zero": agent3_min > 0.0,
                }))
            };
            let loose = run(1e-6)?;
            let tight = run(1e-13)?;
            let human = vec![
                format!(
                    "prop9 (eps = {}): at tolerance 1e-6 the dynamics reach the tolerance ball (converged {}, {} iterations)",
                    args.epsilon, loose["converged"], loose["iterations"]
                ),
                format!(
                    "prop9: at tolerance 1e-13 no best-response path terminates (converged {}, stop {}); agent 2 stays < 1: {}, agent 3 stays > 0: {}",
                    tight["converged"],
                    tight["stop_reason"],
                    tight["agent2_stays_below_one"],
                    tight["agent3_stays_above_zero"]
                ),
            ];
            Ok((
                json!({"demo": "prop9", "epsilon": args.epsilon, "loose": loose, "tight": tight}),
                human,
            ))
        }
    }
}

fn cmd_demo(args: &DemoArgs) -> Result<(), Error> {
    let started_at = epoch_ms();
    let started = Instant::now();
    let (payload, human) = demo_payload(args)?;
    for line in &human {
        // Demo verdicts always go to stderr so stdout stays machine-readable.
        eprintln!("{line}");
    }
    println!("{payload}");
    if let Some(path) = &args.output {
        fs::write(path, serde_json::to_string_pretty(&payload).unwrap())?;
        let parameters = json!({
            "name": format!("{:?}", args.name),
            "epsilon": args.epsilon,
            "n": args.n,
            "p": args.p,
        });
        write_manifest(
            &manifest_path_for(path),
            "demo",
            parameters,
            None,
            &[path],
            started_at,
            started,
        )?;
    }
    Ok(())
}

fn cmd_sweep(out: &Output, args: &SweepArgs) -> Result<(), Error> {
    let started_at = epoch_ms();
    let started = Instant::now();
    let text = fs::read_to_string(&args.config)?;
    let mut config: SweepConfig = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidParameter(format!("config parse: {e}")))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }

    fs::create_dir_all(&args.output_dir)?;
    let result = run_sweep(&config)?;

    let csv_path = args.output_dir.join("sweep.csv");
    fs::write(&csv_path, result.to_csv_string())?;

    let manifest_path = args.output_dir.join("manifest.json");
    let parameters = serde_json::to_value(&config).map_err(|e| Error::Io(e.to_string()))?;
    write_manifest(
        &manifest_path,
        "sweep",
        json!({
            "config": parameters,
            "failed_trials": result.failed_trials,
            "total_trials": result.total_trials,
            "failures": result.failures,
        }),
        Some(config.seed),
        &[&csv_path],
        started_at,
        started,
    )?;

    out.human(&format!(
        "sweep: {} values x {} trials, {} failures -> {}",
        config.values.len(),
        config.trials,
        result.failed_trials,
        csv_path.display()
    ));
    out.payload(&json!({
        "command": "sweep",
        "csv": csv_path.to_string_lossy(),
        "manifest": manifest_path.to_string_lossy(),
        "rows": serde_json::to_value(&result.rows).unwrap(),
    }));
    Ok(())
}

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("STRATREG_THREADS") {
        if let Ok(threads) = v.trim().parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = err.print();
                return ExitCode::SUCCESS;
            }
            let _ = writeln!(std::io::stderr(), "{err}");
            return ExitCode::from(1);
        }
    };

    let out = Output { json: cli.json };
    let result = match &cli.command {
        Command::Fit(args) => cmd_fit(&out, args),
        Command::Equilibrium(args) => cmd_equilibrium(&out, args),
        Command::Demo(args) => cmd_demo(args),
        Command::Sweep(args) => cmd_sweep(&out, args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
