use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use clonescope::mil::Method;
use clonescope_cli::commands::{cmd_embed, cmd_import, cmd_synth, cmd_tile, dataset_dir};
use clonescope_cli::explain::cmd_explain;
use clonescope_cli::report::{cmd_report, format_table};
use clonescope_cli::run::cmd_run;
use clonescope_cli::{CliError, CliResult, ExperimentConfig, Overrides};

/// Clone classification of bacteria micrographs with attention MIL and
/// persistence-based explanations.
///
/// Settings come from the built-in defaults, then `--config FILE`, then the
/// flags below; a flag always wins over the file. Without `--config`,
/// `WORKDIR/config.json` is used when present (written by `synth`).
#[derive(Debug, Parser)]
#[command(name = "clonescope", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON-lines manifest of the images.
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Directory receiving all outputs.
    #[arg(long, global = true, value_name = "PATH")]
    workdir: Option<PathBuf>,
    /// Restrict to one MIL method: mv|imax|imean|emax|emean|abmilp.
    #[arg(long, global = true, value_name = "NAME", value_parser = parse_method)]
    method: Option<Method>,
    /// Cross-validation rounds
    #[arg(long, global = true, value_name = "N")]
    folds: Option<usize>,
    /// Seed for splits, training and synthesis
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Learning rate.
    #[arg(long, global = true, value_name = "X")]
    lr: Option<f64>,
    /// Weight decay.
    #[arg(long, global = true, value_name = "X")]
    wd: Option<f64>,
    /// Choose lr and wd per fold by grid search on held-out isolates.
    #[arg(long, global = true)]
    grid: bool,
    /// Significance level of the explainability tests.
    #[arg(long, global = true, value_name = "X")]
    alpha: Option<f64>,
    /// Worker threads; 1 gives the canonical sequential run.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Experiment configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render the synthetic dataset into WORKDIR/data.
    Synth,
    /// Tile the manifest images into WORKDIR/patches.
    Tile,
    /// Embed every foreground patch into WORKDIR/embed/embeddings.emb1.
    Embed,
    /// Validate an EMB1 archive against the manifest.
    ImportEmbeddings {
        #[arg(value_name = "PATH")]
        path: PathBuf,
    },
    /// Cross-validate the MIL methods and print the results table.
    Run {
        /// Use an EMB1 archive instead of the built-in embedder.
        #[arg(long, value_name = "PATH")]
        embeddings: Option<PathBuf>,
    },
    /// Explain the AbMILP model of one fold.
    Explain,
    /// Write WORKDIR/report.txt from existing results.
    Report,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: clonescope::Error| e.to_string())
}

fn config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let embeddings = match &cli.command {
        Command::ImportEmbeddings { path } => Some(path.clone()),
        Command::Run { embeddings } => embeddings.clone(),
        _ => None,
    };
    let overrides = Overrides {
        manifest: cli.manifest.clone(),
        workdir: cli.workdir.clone(),
        method: cli.method,
        folds: cli.folds,
        seed: cli.seed,
        lr: cli.lr,
        wd: cli.wd,
        grid: cli.grid,
        alpha: cli.alpha,
        embeddings,
    };
    let implicit = match (&cli.config, &cli.workdir, &cli.command) {
        (None, Some(w), c) if !matches!(c, Command::Synth) => Some(w.join("config.json")).filter(|p| p.exists()),
        _ => None,
    };
    ExperimentConfig::resolve(cli.config.as_deref().or(implicit.as_deref()), &overrides)
}

fn execute(cli: &Cli) -> CliResult<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::usage("--jobs must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    let cfg = config(cli)?;
    match &cli.command {
        Command::Synth => {
            let m = cmd_synth(&cfg)?;
            println!("wrote {} images to {}", m.records.len(), dataset_dir(&cfg).display());
            Ok(())
        }
        Command::Tile => {
            let s = cmd_tile(&cfg)?;
            println!("{} images, {} windows, {} foreground patches", s.images, s.windows, s.foreground);
            Ok(())
        }
        Command::Embed => cmd_embed(&cfg).map(|path| println!("embeddings written to {}", path.display())),
        Command::ImportEmbeddings { .. } => {
            let s = cmd_import(&cfg)?;
            println!("{} patches in {} images, dimension {}", s.patches, s.images, s.dim);
            for (c, n) in &s.per_clone {
                println!("  {c}: {n} images");
            }
            Ok(())
        }
        Command::Run { .. } => cmd_run(&cfg).map(|s| print!("{}", format_table(&s))),
        Command::Explain => cmd_explain(&cfg).map(|s| print!("{}", s.summary)),
        Command::Report => cmd_report(&cfg).map(|text| print!("{text}")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CLONESCOPE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
