use std::path::PathBuf;
use std::process::ExitCode;

use adaptive_bdf::EstimatorKind;
use adaptive_bdf_cli::{cmd_compare_estimators, cmd_convergence, cmd_run, CliError, ProblemId, RunConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "adaptive-bdf", version, about = "Adaptive BDF time stepping for DAEs and incompressible flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write steps.csv and summary.json.
    Run(RunArgs),
    /// Run with both estimators evaluated at every step.
    CompareEstimators(RunArgs),
    /// Constant-step convergence sweeps on a problem with an exact solution.
    Convergence(ConvergenceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Implicit,
    Li,
    Both,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Implicit => EstimatorKind::Implicit,
            EstimatorArg::Li => EstimatorKind::LinearImplicit,
            EstimatorArg::Both => EstimatorKind::Both,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    #[arg(long)]
    refine: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reserved; runs are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// saddle-dae, stiff-ode, riccati or polynomial
    problem: String,
    /// Degree of the polynomial problem.
    #[arg(long, default_value_t = 2)]
    degree: u32,
    #[arg(long, default_value = "out/convergence")]
    out: PathBuf,
    /// Reserved; runs are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(e) = args.estimator {
        cfg.set_estimator(e.into());
    }
    if let Some(r) = args.refine {
        cfg.refine = r;
    }
    if let Some(o) = &args.out {
        cfg.output = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(exec: &adaptive_bdf_cli::Execution, cfg: &RunConfig) {
    let s = &exec.log.summary;
    println!(
        "{}: {} accepted, {} rejected, {} flagged, t = {} ({:.2} s) -> {}",
        cfg.problem.name(),
        s.accepted_steps,
        s.rejected_attempts,
        s.flagged_levels,
        s.final_time,
        exec.wall_seconds,
        cfg.output.display()
    );
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load(&args)?;
            let exec = cmd_run(&cfg)?;
            report(&exec, &cfg);
        }
        Command::CompareEstimators(args) => {
            let cfg = load(&args)?;
            let (exec, cmp) = cmd_compare_estimators(&cfg)?;
            report(&exec, &cfg);
            let (i, l) = (cmp.implicit_seconds, cmp.li_seconds);
            println!("implicit: {:.3e} ± {:.3e} s over {} evaluations", i.mean, i.std, i.count);
            println!("li:       {:.3e} ± {:.3e} s over {} evaluations", l.mean, l.std, l.count);
            if let (Some(lo), Some(hi)) = (cmp.ratio_min, cmp.ratio_max) {
                println!("est_li / est_impl in [{lo:.6}, {hi:.6}]");
            }
        }
        Command::Convergence(args) => {
            let problem: ProblemId = args.problem.parse()?;
            for (scheme, points, slope) in cmd_convergence(problem, args.degree, &args.out)? {
                let last = points.last().map(|p| p.error).unwrap_or(f64::NAN);
                println!("{:>5}: order {slope:.3}, error {last:.3e} at h = {}", scheme.name(), points.last().unwrap().h);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
