//! Rollout collection and the clipped-surrogate update loop.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::nn::{adam_step, read_exact, read_u32, Activation, AdamState, Mlp};
use crate::ppo::buffer::{Trajectory, TrajectoryRecord};
use crate::ppo::config::PpoConfig;
use crate::ppo::gae::{compute_gae, normalize};
use crate::ppo::loss::{ppo_loss_and_gradients, LossBreakdown, LossWeights, Minibatch};
use crate::ppo::policy::{self, block_width, sample_action, SampledAction};
use crate::rng::{seeded_stream, stream};

const AGENT_MAGIC: &[u8; 8] = b"SEMAGT01";

/// Policy and value networks for one environment shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    policy: Mlp,
    value: Mlp,
    num_users: usize,
    num_scms: usize,
}

impl Agent {
    /// Freshly initialized networks. Log-std outputs start at `init_log_std`.
    pub fn new<R: Rng + ?Sized>(
        observation_dim: usize,
        num_users: usize,
        num_scms: usize,
        config: &PpoConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if num_users == 0 || num_scms == 0 {
            return Err(Error::InvalidArgument("agent needs >= 1 user and >= 1 model".into()));
        }
        let mut widths = vec![observation_dim];
        widths.extend(&config.hidden_sizes);
        widths.push(policy::output_dim(num_users, num_scms));
        let mut policy = Mlp::new(&widths, Activation::Tanh, 0.01, rng)?;
        let width = block_width(num_scms);
        let out = policy.layers_mut().last_mut().expect("at least one layer");
        for m in 0..num_users {
            out.bias[m * width + num_scms + 1] = config.init_log_std;
            out.bias[m * width + num_scms + 3] = config.init_log_std;
        }
        *widths.last_mut().expect("non-empty") = 1;
        let value = Mlp::new(&widths, Activation::Tanh, 1.0, rng)?;
        Ok(Self { policy, value, num_users, num_scms })
    }

    pub fn from_networks(policy: Mlp, value: Mlp, num_users: usize, num_scms: usize) -> Result<Self> {
        let expected = policy::output_dim(num_users, num_scms);
        if policy.output_dim() != expected {
            return Err(Error::DimensionMismatch { expected, actual: policy.output_dim() });
        }
        if value.output_dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, actual: value.output_dim() });
        }
        if value.input_dim() != policy.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: policy.input_dim(),
                actual: value.input_dim(),
            });
        }
        Ok(Self { policy, value, num_users, num_scms })
    }

    pub fn policy(&self) -> &Mlp {
        &self.policy
    }

    pub fn value(&self) -> &Mlp {
        &self.value
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_scms(&self) -> usize {
        self.num_scms
    }

    pub fn observation_dim(&self) -> usize {
        self.policy.input_dim()
    }

    /// Samples an action, or takes the mode when `deterministic`.
    pub fn act<R: Rng + ?Sized>(
        &self,
        observation: &[f64],
        deterministic: bool,
        rng: &mut R,
    ) -> Result<SampledAction> {
        sample_action(&self.policy, observation, self.num_users, self.num_scms, deterministic, rng)
            .map(|(a, _, _)| a)
    }

    /// Critic estimate for one observation.
    pub fn state_value(&self, observation: &[f64]) -> Result<f64> {
        let v = self.value.predict(observation)?[0];
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("value estimate {v}")))
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<checkpoint>", e);
        w.write_all(AGENT_MAGIC).map_err(io)?;
        w.write_all(&(self.num_users as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.num_scms as u32).to_le_bytes()).map_err(io)?;
        self.policy.write_to(&mut w)?;
        self.value.write_to(&mut w)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != AGENT_MAGIC {
            return Err(Error::Checkpoint("not an agent checkpoint".into()));
        }
        let num_users = read_u32(&mut r)? as usize;
        let num_scms = read_u32(&mut r)? as usize;
        let policy = Mlp::read_from(&mut r)?;
        let value = Mlp::read_from(&mut r)?;
        Self::from_networks(policy, value, num_users, num_scms)
            .map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

/// Summary of one training epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean over episodes finished this epoch of the summed step rewards.
    /// If no episode finished, the partial return of the running episode.
    pub mean_episode_reward: f64,
    pub std_episode_reward: f64,
    pub episodes: usize,
    pub mean_step_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub updates: usize,
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingReport {
    pub epochs: Vec<EpochStats>,
}

impl TrainingReport {
    pub fn mean_episode_rewards(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_episode_reward).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record([
            "epoch",
            "mean_episode_reward",
            "std_episode_reward",
            "episodes",
            "mean_step_reward",
            "policy_loss",
            "value_loss",
            "entropy",
            "approx_kl",
            "clip_fraction",
            "updates",
        ])?;
        for e in &self.epochs {
            csv.write_record([
                e.epoch.to_string(),
                e.mean_episode_reward.to_string(),
                e.std_episode_reward.to_string(),
                e.episodes.to_string(),
                e.mean_step_reward.to_string(),
                e.policy_loss.to_string(),
                e.value_loss.to_string(),
                e.entropy.to_string(),
                e.approx_kl.to_string(),
                e.clip_fraction.to_string(),
                e.updates.to_string(),
            ])?;
        }
        csv.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// Trains a fresh agent on `env`. Deterministic given `seed`.
pub fn train<E: Environment + ?Sized>(
    env: &mut E,
    config: &PpoConfig,
    seed: u64,
) -> Result<(Agent, TrainingReport)> {
    train_with_callback(env, config, seed, |_, _| {})
}

/// As [`train`], calling `on_epoch` after every epoch.
///
/// Each epoch collects `timesteps_per_epoch` steps, starting from a fresh
/// reset, in rollouts of at most `rollout_length` steps. After each rollout
/// the advantages are computed, `update_epochs` passes of shuffled
/// minibatches update both networks, and the buffer is cleared.
pub fn train_with_callback<E, F>(
    env: &mut E,
    config: &PpoConfig,
    seed: u64,
    mut on_epoch: F,
) -> Result<(Agent, TrainingReport)>
where
    E: Environment + ?Sized,
    F: FnMut(&EpochStats, &Agent),
{
    config.validate()?;
    let mut init_rng = seeded_stream(seed, stream::INIT);
    let mut env_rng = seeded_stream(seed, stream::ENV);
    let mut policy_rng = seeded_stream(seed, stream::POLICY);
    let mut shuffle_rng = seeded_stream(seed, stream::SHUFFLE);

    let (num_users, num_scms) = (env.num_users(), env.num_scms());
    let mut agent = Agent::new(env.observation_dim(), num_users, num_scms, config, &mut init_rng)?;
    let mut policy_opt = AdamState::new(&agent.policy, config.learning_rate);
    let mut value_opt = AdamState::new(&agent.value, config.learning_rate);
    let weights = LossWeights {
        clip_range: config.clip_range,
        value_coef: config.value_coef,
        entropy_coef: config.entropy_coef,
    };

    let mut report = TrainingReport::default();
    let mut buffer = Trajectory::with_capacity(config.rollout_length);
    for epoch in 0..config.num_epochs {
        let mut observation = env.reset(&mut env_rng);
        let mut episode_returns = Vec::new();
        let mut running = 0.0;
        let mut reward_sum = 0.0;
        let mut losses = Vec::new();
        let mut collected = 0;
        while collected < config.timesteps_per_epoch {
            let chunk = config.rollout_length.min(config.timesteps_per_epoch - collected);
            for _ in 0..chunk {
                let (sample, log_prob, _) =
                    sample_action(&agent.policy, &observation, num_users, num_scms, false, &mut policy_rng)
                        .map_err(|e| abort(epoch, e))?;
                let value = agent.state_value(&observation).map_err(|e| abort(epoch, e))?;
                let transition = env.step(&sample.action, &mut env_rng)?;
                running += transition.reward;
                reward_sum += transition.reward;
                buffer.push(TrajectoryRecord {
                    observation: std::mem::take(&mut observation),
                    action: sample,
                    log_prob,
                    value,
                    reward: transition.reward,
                    done: transition.done,
                });
                observation = if transition.done {
                    episode_returns.push(running);
                    running = 0.0;
                    env.reset(&mut env_rng)
                } else {
                    transition.observation
                };
            }
            collected += chunk;
            let last_done = buffer.records.last().is_some_and(|r| r.done);
            buffer.bootstrap_value = if last_done {
                0.0
            } else {
                agent.state_value(&observation).map_err(|e| abort(epoch, e))?
            };
            update(
                &mut agent,
                &buffer,
                config,
                weights,
                &mut policy_opt,
                &mut value_opt,
                &mut shuffle_rng,
                &mut losses,
            )
            .map_err(|e| abort(epoch, e))?;
            buffer.clear();
        }
        if episode_returns.is_empty() {
            episode_returns.push(running);
        }
        let stats = epoch_stats(epoch, &episode_returns, reward_sum / collected as f64, &losses);
        on_epoch(&stats, &agent);
        report.epochs.push(stats);
    }
    Ok((agent, report))
}

fn abort(epoch: usize, e: Error) -> Error {
    match e {
        Error::NonFinite(msg) => Error::NonFinite(format!("training aborted in epoch {epoch}: {msg}")),
        other => other,
    }
}

#[allow(clippy::too_many_arguments)]
fn update<R: Rng + ?Sized>(
    agent: &mut Agent,
    buffer: &Trajectory,
    config: &PpoConfig,
    weights: LossWeights,
    policy_opt: &mut AdamState,
    value_opt: &mut AdamState,
    rng: &mut R,
    losses: &mut Vec<LossBreakdown>,
) -> Result<()> {
    let (advantages, returns) = compute_gae(buffer, config.gamma, config.gae_lambda);
    let n = buffer.len();
    let obs_dim = agent.observation_dim();
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..config.update_epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.minibatch_size) {
            let mut observations = Array2::zeros((chunk.len(), obs_dim));
            for (row, &i) in chunk.iter().enumerate() {
                observations
                    .row_mut(row)
                    .assign(&ndarray::ArrayView1::from(&buffer.records[i].observation[..]));
            }
            let mut adv: Vec<f64> = chunk.iter().map(|&i| advantages[i]).collect();
            if config.normalize_advantages && adv.len() > 1 {
                normalize(&mut adv);
            }
            let batch = Minibatch {
                observations,
                actions: chunk.iter().map(|&i| &buffer.records[i].action).collect(),
                old_log_probs: chunk.iter().map(|&i| buffer.records[i].log_prob).collect(),
                advantages: adv,
                returns: chunk.iter().map(|&i| returns[i]).collect(),
            };
            let (loss, policy_grad, value_grad) = ppo_loss_and_gradients(
                &agent.policy,
                &agent.value,
                &batch,
                agent.num_users,
                agent.num_scms,
                weights,
            )?;
            adam_step(&mut agent.policy, &policy_grad, policy_opt, config.max_grad_norm)?;
            adam_step(&mut agent.value, &value_grad, value_opt, config.max_grad_norm)?;
            losses.push(loss);
        }
    }
    Ok(())
}

fn epoch_stats(epoch: usize, returns: &[f64], mean_step_reward: f64, losses: &[LossBreakdown]) -> EpochStats {
    let k = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / k;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / k;
    let l = losses.len().max(1) as f64;
    let avg = |f: fn(&LossBreakdown) -> f64| losses.iter().map(f).sum::<f64>() / l;
    EpochStats {
        epoch,
        mean_episode_reward: mean,
        std_episode_reward: var.sqrt(),
        episodes: returns.len(),
        mean_step_reward,
        policy_loss: avg(|b| b.policy),
        value_loss: avg(|b| b.value),
        entropy: avg(|b| b.entropy),
        approx_kl: avg(|b| b.approx_kl),
        clip_fraction: avg(|b| b.clip_fraction),
        updates: losses.len(),
    }
}
