use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

mod commands;
mod config;
mod error;
mod manifest;

use commands::Ctx;
use config::*;
use error::CliError;
use manifest::Manifest;

/// Spiking-network experiments with the bistable calcium-based learning rule.
#[derive(Debug, Parser)]
#[command(name = "bcall", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct RunArgs {
    /// JSON config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// First seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of seeds: seed, seed + 1, ...
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trace and weight dump of one synapse between two spike trains
    Pair {
        #[command(flatten)]
        exp: PairArgs,
        #[command(flatten)]
        rule: RuleArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Weight change of a single pre/post pair against timing
    Stdp {
        #[command(flatten)]
        exp: StdpArgs,
        #[command(flatten)]
        rule: RuleArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Weight change of paired trains against pairing frequency
    Srdp {
        #[command(flatten)]
        exp: SrdpArgs,
        #[command(flatten)]
        rule: RuleArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Mean pre-synaptic trace and net weight drift against input rate
    Tracesweep {
        #[command(flatten)]
        exp: TraceSweepArgs,
        #[command(flatten)]
        rule: RuleArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Weight change over a grid of pre and post Poisson rates; --seeds sets the repetitions
    Heatmap {
        #[command(flatten)]
        exp: HeatmapArgs,
        #[command(flatten)]
        rule: RuleArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train the feed-forward digit network
    #[command(name = "sfnn-train")]
    SfnnTrain {
        #[command(flatten)]
        exp: SfnnArgs,
        #[command(flatten)]
        rule: RuleArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Test the feed-forward network with stored weights
    #[command(name = "sfnn-eval")]
    SfnnEval {
        #[command(flatten)]
        exp: SfnnArgs,
        #[command(flatten)]
        rule: RuleArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Recurrent network under a subthreshold oscillation
    Rsnn {
        #[command(flatten)]
        exp: RsnnArgs,
        #[command(flatten)]
        rule: RuleArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Synchrony and rate statistics of a spike file
    Analyze {
        #[command(flatten)]
        exp: AnalyzeArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Repeat a run from its manifest
    Rerun {
        manifest: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Worker threads
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn execute(subcommand: &str, config: Value, seeds: Vec<u64>, out: &Path, jobs: usize) -> Result<(), CliError> {
    let ctx = Ctx {
        out: out.to_path_buf(),
        seeds: seeds.clone(),
        jobs,
        config: config.clone(),
    };
    let files = commands::dispatch(subcommand, &ctx)?;
    Manifest::new(subcommand, config, seeds, out, &files).write(out)?;
    Ok(())
}

fn launch<T>(subcommand: &str, run: &RunArgs, top: Map<String, Value>, rule: Option<&RuleArgs>) -> Result<(), CliError>
where
    T: Serialize + DeserializeOwned + Default,
{
    let nested: Vec<(&str, Map<String, Value>)> = rule.map(|r| ("rule", r.overrides())).into_iter().collect();
    let cfg: T = resolve(run.config.as_deref(), top, &nested)?;
    let mut config = serde_json::to_value(cfg)?;
    if let Some(Value::String(dir)) = config.get_mut("data_dir") {
        *dir = commands::resolve_data_dir(dir);
    }
    if run.seeds == 0 {
        return Err(CliError::config(Some("seeds".into()), "must be >= 1"));
    }
    let last = run
        .seed
        .checked_add(run.seeds - 1)
        .ok_or_else(|| CliError::config(Some("seed".into()), "seed + seeds overflows"))?;
    execute(subcommand, config, (run.seed..=last).collect(), &run.out, run.jobs)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Pair { exp, rule, run } => launch::<PairConfig>("pair", &run, exp.overrides(), Some(&rule)),
        Command::Stdp { exp, rule, run } => launch::<StdpConfig>("stdp", &run, exp.overrides(), Some(&rule)),
        Command::Srdp { exp, rule, run } => launch::<SrdpConfig>("srdp", &run, exp.overrides(), Some(&rule)),
        Command::Tracesweep { exp, rule, run } => launch::<TraceSweepConfig>("tracesweep", &run, exp.overrides(), Some(&rule)),
        Command::Heatmap { exp, rule, run } => launch::<HeatmapCliConfig>("heatmap", &run, exp.overrides(), Some(&rule)),
        Command::SfnnTrain { exp, rule, run } => launch::<SfnnCliConfig>("sfnn-train", &run, exp.overrides(), Some(&rule)),
        Command::SfnnEval { exp, rule, run } => launch::<SfnnCliConfig>("sfnn-eval", &run, exp.overrides(), Some(&rule)),
        Command::Rsnn { exp, rule, run } => launch::<RsnnCliConfig>("rsnn", &run, exp.overrides(), Some(&rule)),
        Command::Analyze { exp, run } => launch::<AnalyzeConfig>("analyze", &run, exp.overrides(), None),
        Command::Rerun { manifest, out, jobs } => {
            let m = Manifest::read(&manifest)?;
            if m.seeds.is_empty() {
                return Err(CliError::data(manifest.display().to_string(), "manifest lists no seeds"));
            }
            execute(&m.subcommand, m.config, m.seeds, &out, jobs)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::usage(first).to_json_line());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
