use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lifenav_cli::{cmd_gen_scenes, cmd_plot, cmd_run, cmd_sweep, cmd_validate, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "lifenav", version, about = "Lifelong object-goal navigation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON). Flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for scene generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replace existing scene files.
    #[arg(long, global = true)]
    overwrite: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scene files.
    GenScenes,
    /// Generate episodes and lifelong sequences and score them.
    Run,
    /// Sweep compression depth against memory length.
    Sweep {
        /// Also draw one trajectory per feasible cell.
        #[arg(long)]
        plots: bool,
    },
    /// Draw an episode from a dataset as SVG.
    Plot {
        #[arg(long)]
        dataset: PathBuf,
        /// Zero-based line of the episode in the dataset.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Scene file; defaults to the config's scene directory.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, short = 'o')]
        output: PathBuf,
    },
    /// Check the config and optionally replay a dataset.
    Validate {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    match &cli.command {
        Command::GenScenes => {
            let files = cmd_gen_scenes(&cfg, cli.overwrite)?;
            println!("wrote {} scene files to {}", files.len(), cfg.scenes_dir().display());
        }
        Command::Run => {
            let summary = cmd_run(&cfg)?;
            println!(
                "{} episodes ({} kept), {} lifelong sequences",
                summary.episodes.len(),
                summary.kept,
                summary.goat.len()
            );
            print!("{}", summary.metrics.to_csv());
        }
        Command::Sweep { plots } => {
            let report = cmd_sweep(&cfg, *plots)?;
            print!("{}", report.grid.to_csv());
            println!("wrote {}", report.files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "));
        }
        Command::Plot { dataset, index, scene, output } => {
            cmd_plot(&cfg, dataset, *index, scene.as_deref(), output)?;
            println!("wrote {}", output.display());
        }
        Command::Validate { dataset } => {
            let report = cmd_validate(&cfg, dataset.as_deref())?;
            match dataset {
                Some(d) => println!("config ok; {} episodes in {} replay cleanly", report.episodes, d.display()),
                None => println!("config ok"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("LIFENAV_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
