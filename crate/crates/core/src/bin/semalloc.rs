//! Command-line front end: `train`, `compare` and `validate`.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use semalloc::experiment::{checkpoint_name, load_config, run_compare, run_train, validate_config};

#[derive(Parser)]
#[command(name = "semalloc", version, about = "Model selection and resource allocation for semantic communication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train agents and write convergence curves and checkpoints.
    Train(TrainArgs),
    /// Evaluate a trained agent against the baseline strategies.
    Compare(CompareArgs),
    /// Check a config file and list every violation.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single seed, overriding the config's seed list.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seeds, overriding the config's seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

impl Common {
    fn seeds(&self, default: &[u64]) -> Vec<u64> {
        match (&self.seed, &self.seeds) {
            (Some(s), _) => vec![*s],
            (None, Some(list)) => list.clone(),
            (None, None) => default.to_vec(),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated user counts, overriding `train.user_counts`.
    #[arg(long, value_delimiter = ',')]
    users: Option<Vec<usize>>,
    /// Print a line per epoch.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Agent checkpoint; defaults to the first training seed's agent for
    /// `evaluation.num_users` in the output directory.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Use the policy's mode (argmax model, mean fractions) even if the config samples.
    #[arg(long)]
    deterministic_eval: bool,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Validate { config } => {
            let violations = validate_config(&config)
                .with_context(|| format!("cannot validate {}", config.display()))?;
            if violations.is_empty() {
                println!("{}: ok", config.display());
                Ok(ExitCode::SUCCESS)
            } else {
                println!("{}: {} violation(s)", config.display(), violations.len());
                for v in &violations {
                    println!("  {v}");
                }
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Train(args) => {
            let config = load_config(&args.common.config)?;
            let seeds = args.common.seeds(&config.train.seeds);
            let users = args.users.clone().unwrap_or_else(|| config.train.user_counts.clone());
            let out = args.common.out.clone().unwrap_or_else(|| config.output_dir.clone());
            let epochs = config.ppo.num_epochs;
            let runs = run_train(&config, &users, &seeds, &out, |m, seed, stats| {
                if args.verbose || stats.epoch + 1 == epochs {
                    eprintln!(
                        "users {m:>2} seed {seed:>3} epoch {:>4}/{epochs}: reward {:.4} entropy {:.3}",
                        stats.epoch + 1,
                        stats.mean_episode_reward,
                        stats.entropy
                    );
                }
            })?;
            for run in &runs {
                println!("wrote {}", run.csv_path.display());
                for c in &run.checkpoints {
                    println!("wrote {}", c.display());
                }
            }
            println!("wrote {}", out.join("convergence.svg").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare(args) => {
            let config = load_config(&args.common.config)?;
            let seeds = args.common.seeds(&config.evaluation.seeds);
            let out = args.common.out.clone().unwrap_or_else(|| config.output_dir.clone());
            let checkpoint = match args.checkpoint {
                Some(path) => path,
                None => {
                    let Some(&first) = config.train.seeds.first() else {
                        bail!("config has no training seeds; pass --checkpoint");
                    };
                    out.join(checkpoint_name(config.evaluation.num_users, first))
                }
            };
            let deterministic = args.deterministic_eval || config.evaluation.deterministic;
            let report = run_compare(&config, &checkpoint, &seeds, &out, deterministic)?;
            println!(
                "{} users, {} episode(s) x {} seed(s), fixed_scm {}, deterministic {}",
                report.num_users,
                config.evaluation.num_episodes,
                report.seeds.len(),
                report.fixed_scm,
                report.deterministic
            );
            for s in &report.summaries {
                println!("  {:<14} mean {:>10.4}  std {:>9.4}", s.strategy.to_string(), s.mean, s.std);
            }
            println!("wrote {}", out.join("comparison.csv").display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
