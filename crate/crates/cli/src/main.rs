use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coexist_cli::checks::Level;
use coexist_cli::commands;
use coexist_cli::config::{read_config, CoexistConfig, PhaseDiagramConfig, TuneConfig};
use coexist_cli::{CliError, Result};

#[derive(Parser)]
#[command(name = "coexist", version, about = "Potts phase-coexistence experiments on random regular graphs")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Regime labels, Bethe values and BP marginals over a (beta, B) grid.
    PhaseDiagram {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Replicated Swendsen-Wang / FK chains on a sampled regular graph.
    Coexist {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the chain seed of the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Mixture plan hitting a target free/wired weight ratio.
    Tune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Runs the invariant suites and writes a JSON report.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        level: Level,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Regenerates an artifact from its provenance header and compares bytes.
    Reproduce {
        #[arg(long)]
        from: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn config_dir(path: &Path) -> PathBuf {
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    std::fs::canonicalize(&dir).unwrap_or(dir)
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::PhaseDiagram { config, out } => {
            let cfg: PhaseDiagramConfig = read_config(&config)?;
            report(&commands::phase_diagram(&cfg, &out)?);
        }
        Command::Coexist { config, out, seed } => {
            let cfg: CoexistConfig = read_config(&config)?;
            report(&commands::coexist(&cfg, seed, &config_dir(&config), &out)?);
        }
        Command::Tune { config, out } => {
            let cfg: TuneConfig = read_config(&config)?;
            report(&commands::tune(&cfg, &out)?);
        }
        Command::Verify { level, seed, out } => {
            let (passed, checks, path) = commands::verify(level, seed, &out)?;
            for c in &checks {
                println!("{}", c.line());
            }
            report(&[path]);
            if !passed {
                let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                return Err(CliError::Verification(failed.join(", ")));
            }
        }
        Command::Reproduce { from, out } => {
            let (same, path) = commands::reproduce(&from, &out)?;
            report(&[path.clone()]);
            if !same {
                return Err(CliError::Verification(format!(
                    "{} differs from {}",
                    path.display(),
                    from.display()
                )));
            }
            println!("identical to {}", from.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
