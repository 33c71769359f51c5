use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fictus_cli::config::PipelineConfig;
use fictus_cli::output::{write_json, write_pipeline_outputs, write_weights_csv};
use fictus_cli::{parse_config, run_check, run_dm, run_synthesize, run_weights, CliError};

#[derive(Parser)]
#[command(name = "fictus", version, about = "Null controls for coupled parabolic systems with fewer controls than equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides outputs.directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Decide algebraic solvability.
    Check,
    /// Run the full pipeline.
    Synthesize,
    /// Dump (t, x, alpha, xi, rho, theta) as CSV.
    Weights,
    /// Coarse Dulmage–Mendelsohn decomposition of a triplet file.
    Dm {
        /// Lines of `row col value`, 0-indexed.
        pattern: PathBuf,
    },
}

fn load(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config(vec!["--config is required".into()]))?;
    let mut cfg = parse_config(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(dir) = &cli.out {
        cfg.outputs.directory = Some(dir.clone());
    }
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?);
    Ok(())
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(vec![format!("--threads: {e}")]))?;
    }
    match &cli.command {
        Command::Check => {
            let cfg = load(cli)?;
            let rep = run_check(&cfg);
            match &cfg.outputs.directory {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    write_json(&dir.join("check.json"), &rep)?;
                }
                None => print_json(&rep)?,
            }
            Ok(if rep.verdict == fictus::algebra::Verdict::Solvable { 0 } else { 2 })
        }
        Command::Synthesize => {
            let cfg = load(cli)?;
            let run = run_synthesize(&cfg)?;
            match &cfg.outputs.directory {
                Some(dir) => {
                    for p in write_pipeline_outputs(dir, &run)? {
                        log::info!("wrote {}", p.display());
                    }
                }
                None => print_json(&run.report)?,
            }
            for e in &run.report.errors {
                eprintln!("{}: {}", e.stage, e.error);
            }
            Ok(run.report.exit_code())
        }
        Command::Weights => {
            let cfg = load(cli)?;
            let rows = run_weights(&cfg)?;
            match &cfg.outputs.directory {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    let file = std::fs::File::create(dir.join("weights.csv"))?;
                    write_weights_csv(std::io::BufWriter::new(file), &rows)?;
                }
                None => {
                    write_weights_csv(std::io::stdout().lock(), &rows)?;
                }
            }
            Ok(0)
        }
        Command::Dm { pattern } => {
            let rep = run_dm(pattern)?;
            match &cli.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    write_json(&dir.join("dm.json"), &rep)?;
                }
                None => print_json(&rep)?,
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
