use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gilbert_cli::config::load_config;
use gilbert_cli::run::{run_eval, run_oracle, run_render, run_solve, OracleMethod};
use gilbert_cli::render::RenderStyle;
use gilbert_cli::Outcome;

/// Branched-transport network solver.
#[derive(Parser)]
#[command(name = "gilbert", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured instance and write result, summary, and network.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a stored tree against a plan at a concentration exponent.
    Eval {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        sigma: f64,
    },
    /// Run an independent reference computation on the configured instance.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// One of primal|star|budget|convexity.
        #[arg(long)]
        method: String,
    },
    /// Render a stored result as SVG plus a CSV weight dump.
    Render {
        #[arg(long)]
        result: PathBuf,
        /// One of heatmap|network.
        #[arg(long)]
        style: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(outcome) => ExitCode::from(outcome.code() as u8),
        Err(err) => {
            let record = serde_json::json!({
                "error": { "kind": "input", "message": format!("{err:#}") }
            });
            eprintln!("{record}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Solve { config, out } => {
            let cfg = load_config(&config)?;
            let artifacts = run_solve(&cfg, out.as_deref())?;
            print!("{}", artifacts.summary);
            println!("result: {}", artifacts.result_path.display());
            if let Some(tree) = &artifacts.tree_path {
                println!("tree: {}", tree.display());
            }
            if artifacts.outcome == Outcome::ConvergenceWarning {
                eprintln!(
                    "{}",
                    serde_json::json!({
                        "warning": { "kind": "convergence",
                                     "message": "one or more stages did not converge" }
                    })
                );
            }
            Ok(artifacts.outcome)
        }
        Command::Eval { tree, plan, sigma } => {
            print!("{}", run_eval(&tree, &plan, sigma)?);
            Ok(Outcome::Success)
        }
        Command::Oracle { config, method } => {
            let cfg = load_config(&config)?;
            let method: OracleMethod = method.parse()?;
            let artifacts = run_oracle(&cfg, method)?;
            println!("{}", artifacts.summary);
            println!("oracle record: {}", artifacts.path.display());
            Ok(artifacts.outcome)
        }
        Command::Render { result, style } => {
            let style: RenderStyle = style.parse()?;
            let artifacts = run_render(&result, style)?;
            println!("svg: {}", artifacts.svg_path.display());
            println!("csv: {}", artifacts.csv_path.display());
            Ok(Outcome::Success)
        }
    }
}
