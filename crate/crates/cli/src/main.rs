use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use isodelay::euler_lagrange::Regime;
use isodelay::expr::{Binding, ExprError};
use isodelay::noether::{constancy_report, invariance_defect, necessary_condition_defect, noether_quantity};
use isodelay::optimal_control::pmp_residuals;
use isodelay::registry::{self, Example};
use isodelay::report::{format_number, write_csv};
use isodelay::solver::{solve_el, solve_pmp, verify_on, CollocationScheme, InitialGuess};
use isodelay::problem::ProblemFile;
use isodelay::{AugmentedSetup, ControlProblem, Error, IsoperimetricProblem, Trajectory, TransformationGroup};

#[derive(Parser)]
#[command(name = "isodelay", version, about = "Delayed isoperimetric problems: residuals, conserved quantities, solving")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the registered examples.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Sample the necessary-condition residuals along a trajectory.
    Residuals(Common),
    /// Evaluate the conserved quantity of a transformation group.
    Conserved {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        group: GroupArgs,
    },
    /// Check invariance of the action under a transformation group.
    Invariance {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        group: GroupArgs,
    },
    /// Solve a problem by collocation.
    Solve {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 64)]
        nodes: usize,
        /// Newton tolerance on the residual sup-norm.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 50)]
        maxiter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a registered example's verification suite.
    Verify {
        name: Option<String>,
        #[arg(long = "example", conflicts_with = "name")]
        example: Option<String>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    #[arg(long)]
    example: Option<String>,
    /// Problem description in JSON.
    #[arg(long)]
    problem: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    #[command(flatten)]
    source: Source,
    /// Trajectory JSON; solved for when neither given nor registered.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Option<Vec<f64>>,
    #[arg(long, default_value_t = 200)]
    grid: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GroupArgs {
    /// Time generator in `t` and `q`.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    eta: String,
    /// State generator, one per component.
    #[arg(long, allow_hyphen_values = true)]
    xi: Vec<String>,
    /// Gauge term over the full argument list.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    gauge: String,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::NonConvergence(_)) { 3 } else { 2 };
        Failure { code, message: e.to_string() }
    }
}

impl From<ExprError> for Failure {
    fn from(e: ExprError) -> Self {
        Error::from(e).into()
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 2, message: e.to_string() }
    }
}

fn bad_input(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

enum Target {
    Variational { problem: IsoperimetricProblem, trajectory: Option<Trajectory>, lambda: Option<Vec<f64>> },
    Control(ControlProblem),
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| bad_input(format!("{}: {e}", path.display())))
}

fn load(source: &Source) -> Result<Target, Failure> {
    if let Some(path) = &source.problem {
        let problem = ProblemFile::from_json(&read(path)?)?.build()?;
        return Ok(Target::Variational { problem, trajectory: None, lambda: None });
    }
    let name = source.example.as_deref().unwrap_or_default();
    Ok(match registry::example(name)? {
        Example::Variational { problem, trajectory, lambda } => {
            let lambda = trajectory.as_ref().map(|_| lambda);
            Target::Variational { problem, trajectory, lambda }
        }
        Example::Control { problem } => Target::Control(problem),
    })
}

/// Resolves the trajectory and multipliers, solving when none are at hand.
fn extremal(common: &Common) -> Result<Option<(IsoperimetricProblem, Trajectory, Vec<f64>)>, Failure> {
    let Target::Variational { problem, trajectory, lambda } = load(&common.source)? else {
        return Ok(None);
    };
    let trajectory = match &common.trajectory {
        Some(path) => Some(Trajectory::from_json(&read(path)?)?),
        None => trajectory,
    };
    let (trajectory, lambda) = match trajectory {
        Some(traj) => {
            let lambda = common.lambda.clone().or(lambda).unwrap_or_else(|| vec![0.0; problem.k()]);
            (traj, lambda)
        }
        None => {
            let guess = InitialGuess { trajectory: None, lambda: common.lambda.clone() };
            let sol = solve_el(&problem, &guess, &CollocationScheme::default())?;
            (sol.trajectory, common.lambda.clone().unwrap_or(sol.lambda))
        }
    };
    Ok(Some((problem, trajectory, lambda)))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| bad_input(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Summaries go to standard output unless it already carries the CSV.
fn summarize(out: &Option<PathBuf>, summary: &Value) {
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    if out.is_some() {
        println!("{text}");
    } else {
        eprintln!("{text}");
    }
}

fn group(args: &GroupArgs, problem: &IsoperimetricProblem) -> Result<TransformationGroup, Failure> {
    let generator = Binding::generator(problem.n);
    let xi = match args.xi.len() {
        0 => vec!["0".to_string(); problem.n],
        1 => vec![args.xi[0].clone(); problem.n],
        k if k == problem.n => args.xi.clone(),
        k => return Err(bad_input(format!("{k} xi expressions for {} components", problem.n))),
    };
    Ok(TransformationGroup::new(
        generator.integrand(&args.eta)?,
        xi.iter().map(|x| generator.integrand(x)).collect::<Result<_, _>>()?,
        Binding::variational(problem.m, problem.n).integrand(&args.gauge)?,
    ))
}

fn residuals(common: &Common) -> Result<u8, Failure> {
    if let Some((problem, traj, lambda)) = extremal(common)? {
        let report = verify_on(&problem, &traj, &lambda, common.tol, common.grid)?;
        emit(&common.out, &report.to_csv()?)?;
        let mut summary = report.summary();
        summary["el_sup"] = json!(report.el_sup());
        summary["lambda"] = json!(lambda);
        summarize(&common.out, &summary);
        return Ok(0);
    }
    let Target::Control(cp) = load(&common.source)? else { unreachable!() };
    let sol = solve_pmp(&cp, &CollocationScheme::default())?;
    let times = registry::control_grid(&cp, common.grid)?;
    let mut header = vec!["t".to_string()];
    for name in ["state", "costate", "stationarity"] {
        let width = if name == "stationarity" { cp.mc } else { cp.n };
        header.extend((0..width).map(|i| format!("{name}_{i}")));
    }
    let mut rows = Vec::with_capacity(times.len());
    let mut sup: f64 = 0.0;
    for &t in &times {
        let r = pmp_residuals(&cp, &sol.triple, &sol.lambda, t)?;
        sup = sup.max(r.sup());
        let mut row = vec![format_number(t)];
        row.extend(r.state.iter().chain(&r.costate).chain(&r.stationarity).map(|v| format_number(*v)));
        rows.push(row);
    }
    emit(&common.out, &write_csv(&header, &rows)?)?;
    summarize(&common.out, &json!({"points": times.len(), "pmp_sup": sup, "lambda": sol.lambda}));
    Ok(0)
}

fn variational_only(common: &Common, command: &str) -> Result<(IsoperimetricProblem, Trajectory, Vec<f64>), Failure> {
    extremal(common)?.ok_or_else(|| bad_input(format!("{command} needs a variational problem")))
}

fn conserved(common: &Common, args: &GroupArgs) -> Result<u8, Failure> {
    let (problem, traj, lambda) = variational_only(common, "conserved")?;
    let group = group(args, &problem)?;
    let setup = AugmentedSetup::new(problem.clone(), lambda.clone())?;
    let grids = registry::regime_grids(&problem, &traj, common.grid)?;
    let switch = problem.switch_time();
    let mut report = constancy_report(
        |t, regime| noether_quantity(&setup, &group, &traj, t, regime.unwrap_or(Regime::of(t, switch))),
        &grids,
    )?;
    report.hypothesis_violated = verify_on(&problem, &traj, &lambda, common.tol, common.grid)?.hypothesis_violated;
    let header = ["t", "regime", "C"].map(String::from);
    let rows: Vec<Vec<String>> = report
        .blocks
        .iter()
        .flat_map(|b| {
            let name = b.regime.map_or("whole", Regime::name);
            b.times.iter().zip(&b.values).map(move |(t, c)| vec![format_number(*t), name.into(), format_number(*c)])
        })
        .collect();
    emit(&common.out, &write_csv(&header, &rows)?)?;
    let blocks: Vec<Value> = report
        .blocks
        .iter()
        .map(|b| json!({"regime": b.regime.map(Regime::name), "mean": b.mean, "max_deviation": b.max_deviation}))
        .collect();
    summarize(
        &common.out,
        &json!({
            "blocks": blocks,
            "max_deviation": report.max_deviation(),
            "hypothesis_violated": report.hypothesis_violated,
        }),
    );
    Ok(0)
}

fn invariance(common: &Common, args: &GroupArgs) -> Result<u8, Failure> {
    let (problem, traj, lambda) = variational_only(common, "invariance")?;
    let group = group(args, &problem)?;
    let setup = AugmentedSetup::new(problem.clone(), lambda)?;
    let switch = problem.switch_time();
    let windows = [("whole", problem.t1, problem.t2), ("first", problem.t1, switch), ("second", switch, problem.t2)];
    let mut defects = Vec::new();
    for (name, a, b) in windows {
        if b > a {
            defects.push((name, invariance_defect(&setup, &group, &traj, (a, b))?));
        }
    }
    let (first, second) = necessary_condition_defect(&setup, &group, &traj)?;
    let invariant = defects.iter().all(|(_, d)| d.abs() <= common.tol);
    let summary = json!({
        "invariance_defect": defects.iter().map(|(n, d)| (n.to_string(), json!(d))).collect::<serde_json::Map<_, _>>(),
        "necessary_condition_defect": {"first": first, "second": second},
        "invariant": invariant,
        "tol": common.tol,
    });
    let text = if common.json {
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"
    } else {
        let mut text = String::new();
        for (name, d) in &defects {
            text += &format!("invariance defect on {name:<6} {}\n", format_number(*d));
        }
        text += &format!("necessary condition, first regime  {}\n", format_number(first));
        text += &format!("necessary condition, second regime {}\n", format_number(second));
        text += &format!("invariant within {}: {invariant}\n", common.tol);
        text
    };
    emit(&common.out, &text)?;
    Ok(0)
}

fn solve(source: &Source, nodes: usize, tol: Option<f64>, maxiter: usize, out: &Option<PathBuf>) -> Result<u8, Failure> {
    let mut scheme = CollocationScheme::default().with_nodes(nodes).with_max_iterations(maxiter);
    if let Some(tol) = tol {
        scheme = scheme.with_tolerance(tol);
    }
    let result = match load(source)? {
        Target::Variational { problem, .. } => {
            solve_el(&problem, &InitialGuess::default(), &scheme).map(|s| serde_json::to_value(s).expect("solution serializes"))
        }
        Target::Control(cp) => solve_pmp(&cp, &scheme).map(|s| serde_json::to_value(s).expect("solution serializes")),
    };
    match result {
        Ok(value) => {
            emit(out, &(serde_json::to_string_pretty(&value).expect("solution serializes") + "\n"))?;
            Ok(0)
        }
        Err(Error::NonConvergence(report)) => {
            eprintln!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Err(Failure { code: 3, message: format!("no convergence after {} iterations", report.iterations) })
        }
        Err(e) => Err(e.into()),
    }
}

fn check_table(checks: &[registry::Check]) -> String {
    let mut text = format!("{:<32} {:>24} {:>24}  {}\n", "check", "value", "threshold", "status");
    for c in checks {
        let status = match (c.passed, c.gated) {
            (true, true) => "pass",
            (false, true) => "FAIL",
            (true, false) => "pass (reported)",
            (false, false) => "fail (reported)",
        };
        text += &format!("{:<32} {:>24} {:>24}  {status}", c.name, format_number(c.value), format_number(c.threshold));
        if !c.note.is_empty() {
            text += &format!("  [{}]", c.note);
        }
        text.push('\n');
    }
    text
}

fn verify(name: &str, tol: f64, json: bool) -> Result<u8, Failure> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(bad_input(format!("tolerance must be positive, got {tol}")));
    }
    let checks = registry::run_checks(name, tol)?;
    let passed = registry::suite_passed(&checks);
    if json {
        println!("{}", serde_json::to_string_pretty(&json!({"example": name, "passed": passed, "checks": checks})).expect("checks serialize"));
    } else {
        print!("{}", check_table(&checks));
        println!("{name}: {}", if passed { "PASS" } else { "FAIL" });
    }
    Ok(if passed { 0 } else { 1 })
}

fn list(json: bool) -> u8 {
    if json {
        let entries: Vec<Value> =
            registry::NAMES.iter().map(|n| json!({"name": n, "summary": registry::summary(n)})).collect();
        println!("{}", serde_json::to_string_pretty(&entries).expect("list serializes"));
    } else {
        for name in registry::NAMES {
            println!("{name:<14} {}", registry::summary(name).unwrap_or_default());
        }
    }
    0
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::List { json } => Ok(list(json)),
        Command::Residuals(common) => residuals(&common),
        Command::Conserved { common, group } => conserved(&common, &group),
        Command::Invariance { common, group } => invariance(&common, &group),
        Command::Solve { source, nodes, tol, maxiter, out } => solve(&source, nodes, tol, maxiter, &out),
        Command::Verify { name, example, tol, json } => {
            let name = name.or(example).ok_or_else(|| bad_input("verify needs an example name"))?;
            verify(&name, tol, json)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
