use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pmc_core::harness::{emit_marginal, evidence_oracle, repeat_study, run_pipeline, RunConfig};
use pmc_core::{Error, TargetSpec, WeightedSampleSet};

#[derive(Parser)]
#[command(name = "pmc", version, about = "MCMC prerun + hierarchical clustering + Population Monte Carlo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetKind {
    Shells,
    Tails,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline once and write all artifacts.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat the pipeline with independent seeds and summarize the evidence.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        runs: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for `study_summary.json`; defaults to the config's output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write every run's artifacts under `<out>/run_<i>`.
        #[arg(long)]
        artifacts: bool,
    },
    /// Print the analytic evidence of a built-in target.
    Oracle {
        #[arg(long, value_enum)]
        target: TargetKind,
        #[arg(long)]
        dim: usize,
    },
    /// Weighted histogram of one or two parameters (1-based) from a sample CSV.
    Marginal {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1..=2)]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::BadParams(_) => 2,
        Error::PmcFailed { .. } | Error::AllComponentsDead | Error::AllZeroWeights => 3,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => 4,
        _ => 1,
    }
}

fn load_config(path: &PathBuf) -> Result<RunConfig, Error> {
    let text = fs::read_to_string(path)?;
    RunConfig::from_toml(&text)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Sample { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if out.is_some() {
                cfg.output = out;
            }
            if cfg.output.is_none() {
                cfg.output = Some(PathBuf::from("pmc_out"));
            }
            let a = run_pipeline(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&a.summary)?);
        }
        Command::Study {
            config,
            runs,
            seed,
            out,
            artifacts,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = out.or(cfg.output.take()).unwrap_or_else(|| PathBuf::from("pmc_study"));
            cfg.output = artifacts.then(|| dir.clone());
            let summary = repeat_study(&cfg, runs)?;
            fs::create_dir_all(&dir)?;
            let json = summary.to_json();
            fs::write(dir.join("study_summary.json"), &json)?;
            println!("{json}");
        }
        Command::Oracle { target, dim } => {
            let spec = match target {
                TargetKind::Shells => TargetSpec::shells(dim),
                TargetKind::Tails => TargetSpec::tails(dim),
            };
            println!("{:e}", evidence_oracle(&spec)?);
        }
        Command::Marginal {
            samples,
            dims,
            bins,
            out,
        } => {
            if dims.contains(&0) {
                return Err(Error::BadParams("dims are 1-based".into()));
            }
            let set = WeightedSampleSet::read_csv(BufReader::new(File::open(samples)?))?;
            let zero_based: Vec<usize> = dims.iter().map(|d| d - 1).collect();
            let h = emit_marginal(&set, &zero_based, bins, None)?;
            match out {
                Some(p) => h.write_csv(BufWriter::new(File::create(p)?))?,
                None => h.write_csv(std::io::stdout().lock())?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
