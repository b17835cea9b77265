use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use femdual_core::experiments::{
    emit_report, obstacle_rhs, run_inf_laplace, run_obstacle, run_p_laplace, run_poisson, run_tv,
    EpsPolicy, EpsStopPolicy, ExperimentReport, InfLaplaceMethod, PoissonVariant, ProblemName,
    Settings, TvMethod,
};
use femdual_core::FemError;

const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_CONFIGURATION: u8 = 3;

/// Runs a convergence experiment and writes its table as CSV.
#[derive(Parser, Debug)]
#[command(name = "femdual", version)]
struct Cli {
    /// poisson, tv, inf_laplace, obstacle or p_laplace
    experiment: String,
    /// Refinement levels as `A..B` (inclusive) or a single level.
    #[arg(long)]
    levels: Option<String>,
    /// Fidelity weight of the TV problem.
    #[arg(long, default_value_t = 10.0)]
    alpha: f64,
    /// Radius of the TV input disc.
    #[arg(long, default_value_t = 0.5)]
    radius: f64,
    /// Exponent of the p-Laplace problem.
    #[arg(long, default_value_t = 1.5)]
    p: f64,
    /// `h` or `fixed:V`.
    #[arg(long, default_value = "h")]
    eps_policy: String,
    /// `h/K` or `fixed:V`.
    #[arg(long, default_value = "h/20")]
    eps_stop_policy: String,
    /// Step size of the gradient flows, penalty of ADMM.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    /// Method or variant; defaults depend on the experiment.
    #[arg(long)]
    method: Option<String>,
    /// Output CSV; printed to stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for per-element field CSVs.
    #[arg(long)]
    dump_fields: Option<PathBuf>,
}

fn parse_levels(s: &str) -> Result<Vec<usize>, FemError> {
    let bad = || FemError::Parameter(format!("invalid level range '{s}', expected A..B"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.strip_prefix('=').unwrap_or(b)),
        None => (s, s),
    };
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

fn default_levels(name: ProblemName) -> &'static str {
    match name {
        ProblemName::Poisson => "3..6",
        ProblemName::Tv => "4..6",
        ProblemName::InfLaplace => "3..5",
        ProblemName::Obstacle => "2..5",
        ProblemName::PLaplace => "2..5",
    }
}

fn run(cli: &Cli) -> Result<ExperimentReport, FemError> {
    let name: ProblemName = cli.experiment.parse()?;
    let levels = parse_levels(cli.levels.as_deref().unwrap_or(default_levels(name)))?;
    let settings = Settings {
        eps: cli.eps_policy.parse::<EpsPolicy>()?,
        eps_stop: cli.eps_stop_policy.parse::<EpsStopPolicy>()?,
        tau: cli.tau,
        max_iters: cli.max_iters,
        dump_fields: cli.dump_fields.clone(),
        ..Default::default()
    };
    let method = cli.method.as_deref();
    match name {
        ProblemName::Poisson => run_poisson(
            &levels,
            method
                .unwrap_or("classical_mixed")
                .parse::<PoissonVariant>()?,
            &settings,
        ),
        ProblemName::Tv => {
            if cli.alpha * cli.radius <= 2.0 {
                eprintln!("warning: alpha * radius <= 2, the exact solution vanishes");
            }
            run_tv(
                &levels,
                cli.alpha,
                cli.radius,
                method.unwrap_or("cr").parse::<TvMethod>()?,
                &settings,
            )
        }
        ProblemName::InfLaplace => run_inf_laplace(
            &levels,
            method.unwrap_or("rt_dual").parse::<InfLaplaceMethod>()?,
            &settings,
        ),
        ProblemName::Obstacle => match method {
            None | Some("cr_active_set") => run_obstacle(&levels, obstacle_rhs, &settings),
            Some(m) => Err(FemError::Parameter(format!(
                "unknown obstacle method '{m}'"
            ))),
        },
        ProblemName::PLaplace => {
            if method.is_some() {
                return Err(FemError::Parameter(
                    "the p-Laplace solver is selected by --p".into(),
                ));
            }
            run_p_laplace(&levels, cli.p, &settings)
        }
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which is reserved for non-convergence
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIGURATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIGURATION);
        }
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = emit_report(&report, path) {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIGURATION);
            }
        }
        None => print!("{}", report.to_csv()),
    }
    if report.all_converged() {
        ExitCode::SUCCESS
    } else {
        eprintln!("warning: an iterative solver stopped at the iteration limit");
        ExitCode::from(EXIT_NOT_CONVERGED)
    }
}
