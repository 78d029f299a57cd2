//! Training sweeps and paired strategy comparison.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::baselines::{average_policy, heuristic_rde_policy, random_policy, StrategyKind};
use crate::env::{self, EnvConfig, SemcomEnv, StepOutcome};
use crate::error::{Error, Result};
use crate::experiment::config::ExperimentConfig;
use crate::experiment::plot::{self, Bar, BandSeries};
use crate::ppo::{train_with_callback, Agent, EpochStats, TrainingReport};
use crate::rng::{episode_stream, policy_episode_stream};

/// Smoothing factor of the plotted reward curves.
pub const EMA_FACTOR: f64 = 0.9;

/// Exponential moving average `s_t = f s_{t-1} + (1 - f) x_t`, `s_0 = x_0`.
pub fn ema(values: &[f64], factor: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = None;
    for &v in values {
        let s = match acc {
            None => v,
            Some(prev) => factor * prev + (1.0 - factor) * v,
        };
        acc = Some(s);
        out.push(s);
    }
    out
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Training results for one user count.
#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    pub num_users: usize,
    pub seeds: Vec<u64>,
    pub reports: Vec<TrainingReport>,
    pub csv_path: PathBuf,
    pub checkpoints: Vec<PathBuf>,
}

pub fn convergence_csv_name(num_users: usize) -> String {
    format!("convergence_{num_users}u.csv")
}

pub fn checkpoint_name(num_users: usize, seed: u64) -> String {
    format!("agent_{num_users}u_seed{seed}.bin")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Trains one agent per (user count, seed), writing a convergence CSV per
/// user count, a checkpoint per agent and `convergence.svg`.
pub fn run_train<F>(
    config: &ExperimentConfig,
    user_counts: &[usize],
    seeds: &[u64],
    out_dir: &Path,
    mut on_epoch: F,
) -> Result<Vec<ConvergenceRun>>
where
    F: FnMut(usize, u64, &EpochStats),
{
    if user_counts.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument("need at least one user count and one seed".into()));
    }
    create_dir(out_dir)?;
    let mut runs = Vec::with_capacity(user_counts.len());
    for &users in user_counts {
        let env_config = config.env_config(users)?;
        let mut reports = Vec::with_capacity(seeds.len());
        let mut checkpoints = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let mut env = SemcomEnv::new(env_config.clone())?;
            let (agent, report) =
                train_with_callback(&mut env, &config.ppo, seed, |stats, _| on_epoch(users, seed, stats))?;
            let checkpoint = out_dir.join(checkpoint_name(users, seed));
            agent.save(&checkpoint)?;
            checkpoints.push(checkpoint);
            reports.push(report);
        }
        let csv_path = out_dir.join(convergence_csv_name(users));
        write_convergence_csv(create(&csv_path)?, seeds, &reports)?;
        runs.push(ConvergenceRun {
            num_users: users,
            seeds: seeds.to_vec(),
            reports,
            csv_path,
            checkpoints,
        });
    }
    plot_convergence(&out_dir.join("convergence.svg"), &runs)?;
    Ok(runs)
}

/// One row per (seed, epoch) with raw and smoothed episode reward.
pub fn write_convergence_csv<W: Write>(writer: W, seeds: &[u64], reports: &[TrainingReport]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record([
        "seed",
        "epoch",
        "mean_episode_reward",
        "smoothed_reward",
        "std_episode_reward",
        "episodes",
        "policy_loss",
        "value_loss",
        "entropy",
        "approx_kl",
        "clip_fraction",
    ])?;
    for (seed, report) in seeds.iter().zip(reports) {
        let smoothed = ema(&report.mean_episode_rewards(), EMA_FACTOR);
        for (e, s) in report.epochs.iter().zip(smoothed) {
            csv.write_record([
                seed.to_string(),
                e.epoch.to_string(),
                e.mean_episode_reward.to_string(),
                s.to_string(),
                e.std_episode_reward.to_string(),
                e.episodes.to_string(),
                e.policy_loss.to_string(),
                e.value_loss.to_string(),
                e.entropy.to_string(),
                e.approx_kl.to_string(),
                e.clip_fraction.to_string(),
            ])?;
        }
    }
    csv.flush().map_err(|e| Error::io("<convergence csv>", e))
}

fn plot_convergence(path: &Path, runs: &[ConvergenceRun]) -> Result<()> {
    let series: Vec<BandSeries> = runs
        .iter()
        .map(|run| {
            let curves: Vec<Vec<f64>> = run
                .reports
                .iter()
                .map(|r| ema(&r.mean_episode_rewards(), EMA_FACTOR))
                .collect();
            let len = curves.iter().map(Vec::len).min().unwrap_or(0);
            let (mean, spread) = (0..len)
                .map(|t| mean_std(&curves.iter().map(|c| c[t]).collect::<Vec<_>>()))
                .unzip();
            BandSeries {
                label: format!("{} users", run.num_users),
                mean,
                spread,
            }
        })
        .collect();
    plot::band_chart(
        path,
        "Training convergence (EMA 0.9, band: ±1 std across seeds)",
        "epoch",
        "mean episode reward",
        &series,
    )
}

/// Reward of one evaluation episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub episode: u64,
    pub reward: f64,
}

/// Aggregate over every (seed, episode) of one strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategySummary {
    pub strategy: StrategyKind,
    pub mean: f64,
    /// Population standard deviation of the episode rewards.
    pub std: f64,
    pub episodes: usize,
}

impl StrategySummary {
    pub fn standard_error(&self) -> f64 {
        self.std / (self.episodes as f64).sqrt()
    }
}

/// Paired evaluation of all strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub num_users: usize,
    pub seeds: Vec<u64>,
    pub fixed_scm: usize,
    pub deterministic: bool,
    pub config_fingerprint: String,
    pub summaries: Vec<StrategySummary>,
    /// Sorted by strategy, then seed, then episode.
    pub episodes: Vec<EpisodeRecord>,
}

impl ComparisonReport {
    pub fn summary(&self, strategy: StrategyKind) -> Option<&StrategySummary> {
        self.summaries.iter().find(|s| s.strategy == strategy)
    }

    pub fn write_comparison_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record([
            "strategy",
            "mean_reward",
            "std_reward",
            "episodes",
            "num_users",
            "fixed_scm",
            "deterministic",
            "seeds",
            "config_fingerprint",
        ])?;
        let seeds = self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
        for s in &self.summaries {
            csv.write_record([
                s.strategy.to_string(),
                s.mean.to_string(),
                s.std.to_string(),
                s.episodes.to_string(),
                self.num_users.to_string(),
                self.fixed_scm.to_string(),
                self.deterministic.to_string(),
                seeds.clone(),
                self.config_fingerprint.clone(),
            ])?;
        }
        csv.flush().map_err(|e| Error::io("<comparison csv>", e))
    }

    pub fn write_episodes_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["strategy", "seed", "episode", "reward"])?;
        for r in &self.episodes {
            csv.write_record([
                r.strategy.to_string(),
                r.seed.to_string(),
                r.episode.to_string(),
                r.reward.to_string(),
            ])?;
        }
        csv.flush().map_err(|e| Error::io("<episodes csv>", e))
    }
}

/// Per-strategy statistics recomputed from episode records.
pub fn summarize(episodes: &[EpisodeRecord]) -> Vec<StrategySummary> {
    StrategyKind::ALL
        .into_iter()
        .filter_map(|strategy| {
            let rewards: Vec<f64> = episodes
                .iter()
                .filter(|r| r.strategy == strategy)
                .map(|r| r.reward)
                .collect();
            if rewards.is_empty() {
                return None;
            }
            let (mean, std) = mean_std(&rewards);
            Some(StrategySummary {
                strategy,
                mean,
                std,
                episodes: rewards.len(),
            })
        })
        .collect()
}

/// Plays one evaluation episode. The environment draws from
/// `episode_stream(seed, episode)`, so every strategy sees the same gains.
pub fn evaluate_episode(
    strategy: StrategyKind,
    agent: Option<&Agent>,
    config: &EnvConfig,
    seed: u64,
    episode: u64,
    fixed_scm: usize,
    deterministic: bool,
) -> Result<Vec<StepOutcome>> {
    let mut env_rng = episode_stream(seed, episode);
    let mut policy_rng = policy_episode_stream(seed, episode);
    let mut state = env::reset(&mut env_rng, config);
    let mut outcomes = Vec::with_capacity(config.episode_length);
    loop {
        let action = match strategy {
            StrategyKind::LearnedPolicy => {
                let agent = agent.ok_or_else(|| {
                    Error::InvalidArgument("the learned strategy needs an agent".into())
                })?;
                agent
                    .act(&env::observation(&state, config), deterministic, &mut policy_rng)?
                    .action
            }
            StrategyKind::Average => average_policy(&state, config, fixed_scm)?,
            StrategyKind::Random => random_policy(&state, &mut policy_rng, config),
            StrategyKind::HeuristicRde => heuristic_rde_policy(&state, config),
        };
        let outcome = env::step(&state, &action, &mut env_rng, config)?;
        state = outcome.next_state.clone();
        let done = outcome.done;
        outcomes.push(outcome);
        if done {
            return Ok(outcomes);
        }
    }
}

/// Loads a checkpoint, pointing at `train` when it is missing.
pub fn load_agent(path: &Path) -> Result<Agent> {
    if !path.exists() {
        return Err(Error::Checkpoint(format!(
            "checkpoint {} not found; run `semalloc train` with the same config first \
             (or pass --checkpoint)",
            path.display()
        )));
    }
    Agent::load(path)
}

/// Evaluates all strategies on the same episodes and writes
/// `comparison.csv`, `episodes.csv`, `comparison.svg` and `episodes.svg`.
pub fn run_compare(
    config: &ExperimentConfig,
    checkpoint: &Path,
    seeds: &[u64],
    out_dir: &Path,
    deterministic: bool,
) -> Result<ComparisonReport> {
    let report = compare(config, &load_agent(checkpoint)?, seeds, deterministic)?;
    create_dir(out_dir)?;
    report.write_comparison_csv(create(&out_dir.join("comparison.csv"))?)?;
    report.write_episodes_csv(create(&out_dir.join("episodes.csv"))?)?;
    plot_comparison(out_dir, &report)?;
    Ok(report)
}

/// Paired evaluation without file output.
pub fn compare(
    config: &ExperimentConfig,
    agent: &Agent,
    seeds: &[u64],
    deterministic: bool,
) -> Result<ComparisonReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("evaluation needs at least one seed".into()));
    }
    let eval = &config.evaluation;
    let env_config = config.env_config(eval.num_users)?;
    if agent.num_users() != eval.num_users
        || agent.num_scms() != env_config.num_scms()
        || agent.observation_dim() != env_config.observation_dim()
    {
        return Err(Error::Checkpoint(format!(
            "checkpoint was trained for {} users and {} models; evaluation uses {} users and {} models",
            agent.num_users(),
            agent.num_scms(),
            eval.num_users,
            env_config.num_scms()
        )));
    }
    let mut episodes = Vec::with_capacity(StrategyKind::ALL.len() * seeds.len() * eval.num_episodes);
    for strategy in StrategyKind::ALL {
        for &seed in seeds {
            for episode in 0..eval.num_episodes as u64 {
                let outcomes = evaluate_episode(
                    strategy,
                    Some(agent),
                    &env_config,
                    seed,
                    episode,
                    eval.fixed_scm,
                    deterministic,
                )?;
                episodes.push(EpisodeRecord {
                    strategy,
                    seed,
                    episode,
                    reward: outcomes.iter().map(|o| o.reward).sum(),
                });
            }
        }
    }
    Ok(ComparisonReport {
        num_users: eval.num_users,
        seeds: seeds.to_vec(),
        fixed_scm: eval.fixed_scm,
        deterministic,
        config_fingerprint: config.fingerprint.clone(),
        summaries: summarize(&episodes),
        episodes,
    })
}

fn plot_comparison(out_dir: &Path, report: &ComparisonReport) -> Result<()> {
    let bars: Vec<Bar> = report
        .summaries
        .iter()
        .map(|s| Bar {
            label: s.strategy.to_string(),
            value: s.mean,
            error: s.std,
        })
        .collect();
    plot::bar_chart(
        &out_dir.join("comparison.svg"),
        &format!("Mean episode reward, {} users (±1 std)", report.num_users),
        "episode reward",
        &bars,
    )?;

    let series: Vec<BandSeries> = report
        .summaries
        .iter()
        .map(|s| {
            let mine: Vec<&EpisodeRecord> =
                report.episodes.iter().filter(|r| r.strategy == s.strategy).collect();
            let count = mine.iter().map(|r| r.episode + 1).max().unwrap_or(0);
            let (mean, spread) = (0..count)
                .map(|ep| {
                    let across: Vec<f64> =
                        mine.iter().filter(|r| r.episode == ep).map(|r| r.reward).collect();
                    mean_std(&across)
                })
                .unzip();
            BandSeries {
                label: s.strategy.to_string(),
                mean,
                spread,
            }
        })
        .collect();
    plot::band_chart(
        &out_dir.join("episodes.svg"),
        "Episode rewards (band: ±1 std across evaluation seeds)",
        "episode",
        "episode reward",
        &series,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ema_examples() {
        assert_eq!(ema(&[], 0.9), Vec::<f64>::new());
        assert_eq!(ema(&[4.0], 0.9), vec![4.0]);
        let s = ema(&[0.0, 10.0, 10.0], 0.9);
        assert!((s[1] - 1.0).abs() < 1e-12 && (s[2] - 1.9).abs() < 1e-12);
    }

    #[test]
    fn summaries_recompute_from_records() {
        let records: Vec<EpisodeRecord> = (0..6)
            .map(|i| EpisodeRecord {
                strategy: if i % 2 == 0 { StrategyKind::Random } else { StrategyKind::Average },
                seed: 0,
                episode: i / 2,
                reward: i as f64,
            })
            .collect();
        let s = summarize(&records);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].strategy, StrategyKind::Average);
        assert_eq!(s[0].mean, 3.0);
        assert_eq!(s[1].mean, 2.0);
        assert!((s[1].std - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn missing_checkpoint_suggests_training() {
        let err = load_agent(Path::new("/nonexistent/agent.bin")).unwrap_err();
        assert!(err.to_string().contains("semalloc train"), "{err}");
    }
}
