//! `mpngame`: solve, verify and compare LQ games under information structures.
//!
//! Exit codes: 0 success, 1 input or solver error, 2 verification failure.

mod report;
mod spec;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use log::info;
use mpngame::{
    build_mpn, compare_structures, solve_equilibrium, verify_solution, CyclicParams, EquilibriumSolution, Error,
    InformationStructure, LqGame, Tolerances, VerificationReport,
};
use nalgebra::DVector;

use report::{graph_listing, write_csv_file, write_json, GraphExport, SolutionInput, SolutionReport};
use spec::{read_json, GameSpec};

const LOG_ENV: &str = "MPNGAME_LOG";

#[derive(Parser)]
#[command(name = "mpngame", version, about = "Nash equilibria of LQ games under interleaved information structures")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Solve a game spec and certify the equilibrium
    Solve {
        #[arg(long)]
        spec: PathBuf,
        /// Initial state, comma separated; overrides the spec's `x1`
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x1: Option<Vec<f64>>,
        /// Solution JSON path
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trajectory CSV path
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Absolute KKT tolerance (default 1e-8 (1 + ||data||))
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Re-verify a solution file against its game spec
    Verify {
        #[arg(long)]
        spec: PathBuf,
        /// Solution JSON written by `solve`
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Solve one game under several information structures
    Compare {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "openloop,feedback,spec")]
        structures: Vec<Structure>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x1: Option<Vec<f64>>,
        /// Comparison table JSON path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the cyclic example spec and print its network
    ExampleCyclic {
        #[arg(long, default_value_t = 3)]
        agents: usize,
        #[arg(long, default_value_t = 3)]
        horizon: usize,
        #[arg(long, default_value_t = 1)]
        state_dim: usize,
        #[arg(long, default_value_t = 1)]
        control_dim: usize,
        /// Goal of each agent; defaults to evenly spaced values from 1 to -1
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        goals: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        offset: f64,
        #[arg(long, default_value_t = 0.5)]
        pair_weight: f64,
        #[arg(long, default_value_t = 1.0)]
        control_weight: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        b: f64,
        /// Initial state stored in the spec
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x1: Option<Vec<f64>>,
        /// Spec JSON path
        #[arg(long, default_value = "cyclic.json")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Structure {
    Openloop,
    Feedback,
    /// The structure named in the spec file
    Spec,
    Cyclic,
}

impl Structure {
    fn name(self) -> &'static str {
        match self {
            Structure::Openloop => "openloop",
            Structure::Feedback => "feedback",
            Structure::Spec => "spec",
            Structure::Cyclic => "cyclic",
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            eprintln!("\n{}", usage_for(std::env::args().nth(1).as_deref()));
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Usage of the named subcommand, or of the whole program.
fn usage_for(subcommand: Option<&str>) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    match subcommand.and_then(|name| cmd.find_subcommand_mut(name)) {
        Some(sub) => sub.render_usage().to_string(),
        None => cmd.render_usage().to_string(),
    }
}

fn run(command: Commands) -> Result<ExitCode> {
    match command {
        Commands::Solve {
            spec,
            x1,
            out,
            csv,
            tol,
        } => cmd_solve(&spec, x1.as_deref(), out.as_deref(), csv.as_deref(), tol),
        Commands::Verify { spec, solution, tol } => cmd_verify(&spec, &solution, tol),
        Commands::Compare {
            spec,
            structures,
            x1,
            out,
        } => cmd_compare(&spec, &structures, x1.as_deref(), out.as_deref()),
        Commands::ExampleCyclic {
            agents,
            horizon,
            state_dim,
            control_dim,
            goals,
            offset,
            pair_weight,
            control_weight,
            a,
            b,
            x1,
            out,
        } => {
            let goals = goals.unwrap_or_else(|| default_goals(agents));
            let params = CyclicParams {
                num_agents: agents,
                state_dim,
                control_dim,
                horizon,
                goals,
                offset,
                pair_weight,
                control_weight,
                a,
                b,
            };
            cmd_example_cyclic(&params, x1, &out)
        }
    }
}

fn default_goals(agents: usize) -> Vec<f64> {
    match agents {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|i| 1.0 - 2.0 * i as f64 / (n - 1) as f64).collect(),
    }
}

struct Loaded {
    spec: GameSpec,
    game: LqGame,
    info: InformationStructure,
}

fn load(path: &Path) -> Result<Loaded> {
    let spec = GameSpec::load(path)?;
    let game = spec.to_game().with_context(|| format!("invalid spec {}", path.display()))?;
    let info = spec.to_info().with_context(|| format!("invalid spec {}", path.display()))?;
    Ok(Loaded { spec, game, info })
}

fn tolerances(tol: Option<f64>) -> Tolerances {
    Tolerances {
        kkt: tol,
        ..Tolerances::default()
    }
}

fn print_verification(report: &VerificationReport) {
    println!(
        "kkt residual {:.3e} (tolerance {:.3e}), self-policy multipliers {:.3e}, costate spread {:.3e}, fd {:.3e}",
        report.kkt_max_residual,
        report.kkt_tolerance,
        report.lambda_self_max,
        report.eta_consistency_max,
        report.fd_max
    );
    if report.passed {
        println!("verification passed");
    } else {
        println!("verification FAILED:");
        for f in &report.failures {
            println!("  - {f}");
        }
    }
}

fn cmd_solve(
    spec_path: &Path,
    x1: Option<&[f64]>,
    out: Option<&Path>,
    csv: Option<&Path>,
    tol: Option<f64>,
) -> Result<ExitCode> {
    let Loaded { spec, game, info } = load(spec_path)?;
    let x1 = spec.initial_state(x1)?;
    let solution = match solve_equilibrium(&game, &info, &x1) {
        Ok(s) => s,
        // Kept: the verification below decides the exit code.
        Err(Error::ResidualCheckFailed { solution, .. }) => *solution,
        Err(e) => return Err(e).context("solver failed"),
    };
    for w in &solution.diagnostics.warnings {
        log::warn!("{w}");
    }
    let report = verify_solution(&game, &info, &solution, &tolerances(tol)).context("verification failed to run")?;
    if let Some(path) = out {
        let graph = build_mpn(&game, &info)?;
        write_json(
            path,
            &SolutionReport {
                information: &spec.information,
                x1: x1.iter().copied().collect(),
                solution: &solution,
                verification: &report,
                graph: GraphExport::new(&graph),
            },
        )?;
        info!("wrote {}", path.display());
    }
    if let Some(path) = csv {
        write_csv_file(path, &game, &solution.trajectory)?;
        info!("wrote {}", path.display());
    }
    let costs: Vec<String> = solution.costs.iter().map(|c| format!("{c:.6}")).collect();
    println!("costs: [{}]", costs.join(", "));
    print_verification(&report);
    Ok(exit_for(&report))
}

fn exit_for(report: &VerificationReport) -> ExitCode {
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn cmd_verify(spec_path: &Path, solution_path: &Path, tol: Option<f64>) -> Result<ExitCode> {
    let Loaded { game, info, .. } = load(spec_path)?;
    let input: SolutionInput = read_json(solution_path)?;
    input
        .trajectory
        .check_dims(&game)
        .with_context(|| format!("{} does not match {}", solution_path.display(), spec_path.display()))?;
    let solution = EquilibriumSolution {
        trajectory: input.trajectory,
        policies: mpngame::StagePolicySet::empty(game.num_agents(), game.horizon),
        costs: Vec::new(),
        multipliers: Vec::new(),
        diagnostics: Default::default(),
    };
    let report = verify_solution(&game, &info, &solution, &tolerances(tol)).context("verification failed to run")?;
    print_verification(&report);
    Ok(exit_for(&report))
}

fn cmd_compare(spec_path: &Path, structures: &[Structure], x1: Option<&[f64]>, out: Option<&Path>) -> Result<ExitCode> {
    let Loaded { spec, game, info } = load(spec_path)?;
    let x1: DVector<f64> = spec.initial_state(x1)?;
    let (na, h) = (game.num_agents(), game.horizon);
    let named: Vec<(String, InformationStructure)> = structures
        .iter()
        .map(|s| {
            let structure = match s {
                Structure::Openloop => InformationStructure::open_loop(na, h),
                Structure::Feedback => InformationStructure::feedback(na, h),
                Structure::Cyclic => InformationStructure::cyclic(na, h),
                Structure::Spec => info.clone(),
            };
            (s.name().to_string(), structure)
        })
        .collect();
    let table = compare_structures(&game, &x1, &named);
    if let Some(path) = out {
        write_json(path, &table)?;
    }
    for row in &table.rows {
        match (&row.costs, &row.error) {
            (Some(c), _) => {
                let c: Vec<String> = c.iter().map(|v| format!("{v:.6}")).collect();
                println!("{:<10} costs [{}]", row.name, c.join(", "));
            }
            (None, Some(e)) => println!("{:<10} error: {e}", row.name),
            (None, None) => println!("{:<10} no result", row.name),
        }
    }
    for d in &table.differences {
        match d.max_difference {
            Some(v) => println!("{} vs {}: max state difference {v:.3e}", d.a, d.b),
            None => println!("{} vs {}: n/a", d.a, d.b),
        }
    }
    if let Some(m) = table.max_difference() {
        println!("max pairwise difference: {m:.3e}");
    }
    let failed = table.rows.iter().any(|r| r.error.is_some());
    Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn cmd_example_cyclic(params: &CyclicParams, x1: Option<Vec<f64>>, out: &Path) -> Result<ExitCode> {
    let spec = GameSpec::from_cyclic(params, x1)?;
    let game = spec.to_game()?;
    let graph = build_mpn(&game, &spec.to_info()?)?;
    write_json(out, &spec)?;
    print!("{}", graph_listing(&graph));
    println!("spec written to {}", out.display());
    Ok(ExitCode::SUCCESS)
}
