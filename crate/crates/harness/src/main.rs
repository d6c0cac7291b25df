use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use medclip_harness::config::ExperimentConfig;
use medclip_harness::grid::{gridsearch, GridSpec};
use medclip_harness::{aggregate, run_experiment, HarnessError, Result};

#[derive(Parser)]
#[command(name = "medclip", version, about = "Median-clipped zeroth-order solvers and heavy-tailed bandits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimisation experiments (zo_sstm, zo_smd, zo_sgd, zo_restarted).
    Zo {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Bandit experiments (bandit, full_feedback).
    Bandit {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Run every cell of a grid of schedule overrides.
    Grid {
        config: PathBuf,
        gridspec: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Rebuild aggregate CSVs from the per-run CSVs in a directory.
    Aggregate { dir: PathBuf },
}

#[derive(Subcommand)]
enum RunAction {
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
}

fn load(path: &Path, flags: &Flags) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::load(path)?;
    let e = &mut c.experiment;
    if let Some(s) = flags.seed {
        e.seed = s;
    }
    if let Some(r) = flags.runs {
        e.runs = Some(r);
    }
    if let Some(o) = &flags.out {
        e.out = o.clone();
    }
    if let Some(w) = flags.workers {
        e.workers = w;
    }
    Ok(c)
}

fn run(path: &Path, flags: &Flags, bandit: bool) -> Result<()> {
    let c = load(path, flags)?;
    if c.experiment.kind.is_bandit() != bandit {
        return Err(HarnessError::Config(format!(
            "experiment kind {:?} does not belong to this subcommand",
            c.experiment.kind
        )));
    }
    let s = run_experiment(&c)?;
    println!(
        "{} runs ({} failed) written to {}",
        s.runs.len(),
        s.failed,
        s.out.display()
    );
    if let Some(m) = s.median_final() {
        println!("median final value: {m}");
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Zo {
            action: RunAction::Run { config, flags },
        } => run(&config, &flags, false),
        Command::Bandit {
            action: RunAction::Run { config, flags },
        } => run(&config, &flags, true),
        Command::Grid {
            config,
            gridspec,
            flags,
        } => {
            let c = load(&config, &flags)?;
            let spec = GridSpec::load(&gridspec)?;
            let g = gridsearch(&c, &spec)?;
            for cell in &g.cells {
                let mark = if Some(cell.index) == g.best { " *" } else { "" };
                match (&cell.median_final, &cell.error) {
                    (Some(v), _) => println!("cell {:03} {:?}: {v}{mark}", cell.index, cell.params),
                    (None, Some(e)) => println!("cell {:03} {:?}: error: {e}", cell.index, cell.params),
                    (None, None) => println!("cell {:03} {:?}: no result", cell.index, cell.params),
                }
            }
            println!("summary written to {}", g.path.display());
            Ok(())
        }
        Command::Aggregate { dir } => {
            let metrics = aggregate::aggregate_dir(&dir)?;
            println!(
                "aggregated {}",
                metrics.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(", ")
            );
            Ok(())
        }
    }
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
