use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levysde::experiment::{builtin_config, list_builtin, run, ExperimentConfig, RunOptions};
use levysde::Error;

/// Run semi-implicit Euler-Maruyama experiments for SDEs with Lévy noise.
#[derive(Parser)]
#[command(name = "levysde", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Number of Monte Carlo paths, overriding the config.
        #[arg(long)]
        paths: Option<usize>,
        /// Master seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        workers: Option<usize>,
        /// Root directory for run outputs; the run writes to `<out>/<name>`.
        #[arg(long, env = "LEVYSDE_OUT")]
        out: Option<PathBuf>,
    },
    /// Print the config of a built-in experiment.
    Show { name: String },
    /// List the built-in experiments.
    List {
        /// Print the catalog as JSON.
        #[arg(long)]
        json: bool,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Io { .. } => 2,
        Error::Precondition(_) => 3,
        Error::StepFailure { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List { json } => {
            let catalog = list_builtin();
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&catalog).expect("serializable")
                );
            } else {
                for e in catalog {
                    let band = e
                        .band
                        .map(|(lo, hi)| format!("[{lo}, {hi}]"))
                        .unwrap_or_default();
                    println!(
                        "{:<12} {:<18} {} {band}  {}",
                        e.name, e.kind, e.headline, e.description
                    );
                }
            }
            ExitCode::SUCCESS
        }
        Command::Show { name } => match builtin_config(&name) {
            Ok(c) => {
                println!("{}", c.to_json());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_code(&e))
            }
        },
        Command::Run {
            config,
            paths,
            seed,
            workers,
            out,
        } => {
            let options = RunOptions {
                n_paths: paths,
                master_seed: seed,
                output_root: out,
                workers,
            };
            match ExperimentConfig::load(&config).and_then(|c| run(&c, &options)) {
                Ok(s) => {
                    println!("{} ({}) -> {}", s.name, s.kind, s.output_dir.display());
                    if let Some(h) = s.headline {
                        let band = h
                            .band
                            .map(|(lo, hi)| format!(" band [{lo}, {hi}]"))
                            .unwrap_or_default();
                        let verdict = if h.passed { "PASS" } else { "FAIL" };
                        println!("{}: {}{band} {verdict}", h.label, h.value);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code(&e))
                }
            }
        }
    }
}
