//! The episodic multi-user allocation environment.
//!
//! Each step every user picks one SCM and receives a share of transmit power
//! and bandwidth. The reward is the rate-distortion efficiency (RDE) of the
//! whole cell minus hinge penalties for exceeding the power budget and the
//! per-user latency limit.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;

use crate::catalog::{ScmCatalog, ScmProfile};
use crate::channel::{self, ChannelParams, LinkAllocation};
use crate::error::{Error, Result};

/// System budgets, penalty weights and model catalog.
#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub num_users: usize,
    /// B_max, Hz.
    pub total_bandwidth: f64,
    /// P_max, W.
    pub total_power: f64,
    /// Per-user latency limit, s.
    pub latency_cap: f64,
    pub rde_lambda: f64,
    pub rde_epsilon: f64,
    /// Power-violation penalty weight.
    pub gamma1: f64,
    /// Latency-violation penalty weight.
    pub gamma2: f64,
    pub episode_length: usize,
    /// Maps a profile's distortion proxy to the distortion used in RDE.
    pub distortion_scale: f64,
    /// Upper bound on one user's penalized latency excess, s. Keeps the
    /// reward finite when a deep fade drives the rate towards zero.
    pub latency_violation_cap: f64,
    pub channel: ChannelParams,
    pub catalog: Arc<ScmCatalog>,
}

impl EnvConfig {
    /// Default budgets and weights around the given catalog.
    pub fn with_catalog(catalog: Arc<ScmCatalog>, num_users: usize) -> Self {
        Self {
            num_users,
            total_bandwidth: 30e6,
            total_power: 3.0,
            latency_cap: 12.0,
            rde_lambda: 1e4,
            rde_epsilon: 1e-5,
            gamma1: 0.3,
            gamma2: 0.2,
            episode_length: 10,
            distortion_scale: 10.0,
            latency_violation_cap: 12.0,
            channel: ChannelParams::default(),
            catalog,
        }
    }

    /// Every invariant violation, keyed by field name.
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if self.num_users == 0 {
            out.push(("num_users", "must be >= 1".to_string()));
        }
        if self.episode_length == 0 {
            out.push(("episode_length", "must be >= 1".to_string()));
        }
        let positive = [
            ("total_bandwidth", self.total_bandwidth),
            ("total_power", self.total_power),
            ("latency_cap", self.latency_cap),
            ("rde_lambda", self.rde_lambda),
            ("rde_epsilon", self.rde_epsilon),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("distortion_scale", self.distortion_scale),
            ("latency_violation_cap", self.latency_violation_cap),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                out.push((key, format!("must be finite and > 0 (got {value})")));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(
                v.into_iter().map(|(k, m)| format!("{k}: {m}")).collect(),
            ))
        }
    }

    pub fn num_scms(&self) -> usize {
        self.catalog.len()
    }

    /// Length of the agent's observation vector.
    pub fn observation_dim(&self) -> usize {
        3 * self.num_users
    }
}

/// Per-step system state seen by the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub step_index: usize,
    pub channel_gains: Vec<f64>,
    /// W per user.
    pub remaining_power: Vec<f64>,
    /// Hz per user.
    pub remaining_bandwidth: Vec<f64>,
}

/// A joint action: one SCM per user plus power and bandwidth fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub scm_index: Vec<usize>,
    pub power_fraction: Vec<f64>,
    pub bandwidth_fraction: Vec<f64>,
}

impl Action {
    pub fn validate(&self, num_users: usize, num_scms: usize) -> Result<()> {
        for len in [
            self.scm_index.len(),
            self.power_fraction.len(),
            self.bandwidth_fraction.len(),
        ] {
            if len != num_users {
                return Err(Error::DimensionMismatch {
                    expected: num_users,
                    actual: len,
                });
            }
        }
        if let Some(&s) = self.scm_index.iter().find(|&&s| s >= num_scms) {
            return Err(Error::InvalidArgument(format!(
                "scm index {s} out of range for {num_scms} models"
            )));
        }
        let fractions = self.power_fraction.iter().chain(&self.bandwidth_fraction);
        if let Some(f) = fractions.into_iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Error::InvalidArgument(format!(
                "fraction {f} outside [0, 1]"
            )));
        }
        Ok(())
    }

    /// One-hot SCM selection matrix, users x models.
    pub fn selection_matrix(&self, num_scms: usize) -> Vec<Vec<u8>> {
        self.scm_index
            .iter()
            .map(|&s| (0..num_scms).map(|k| u8::from(k == s)).collect())
            .collect()
    }
}

/// Concrete per-user transmit powers (W) and bandwidths (Hz).
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub tx_power: Vec<f64>,
    pub bandwidth: Vec<f64>,
}

/// Everything observable about one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub rde: f64,
    pub per_user_rate: Vec<f64>,
    pub per_user_latency: Vec<f64>,
    pub per_user_distortion: Vec<f64>,
    pub allocation: Allocation,
    pub scm_index: Vec<usize>,
    /// Compute plus transmit power over all users, W.
    pub total_power_used: f64,
    /// Power above budget, W.
    pub power_violation: f64,
    /// Sum over users of the (capped) latency excess, s.
    pub latency_violation: f64,
    pub power_penalty: f64,
    pub latency_penalty: f64,
    pub next_state: EnvState,
    pub done: bool,
}

/// Starts an episode with fresh gains and an equal split of both budgets.
pub fn reset<R: Rng + ?Sized>(rng: &mut R, config: &EnvConfig) -> EnvState {
    let m = config.num_users;
    EnvState {
        step_index: 0,
        channel_gains: channel::sample_channel_gains(rng, &config.channel, m),
        remaining_power: vec![config.total_power / m as f64; m],
        remaining_bandwidth: vec![config.total_bandwidth / m as f64; m],
    }
}

/// Maps policy fractions to feasible powers and bandwidths.
///
/// Bandwidth shares are a softmax over the bandwidth fractions, so they sum
/// to the system bandwidth. Transmit power is capped per user at `P_max / M`.
pub fn decode_allocation(action: &Action, config: &EnvConfig) -> Allocation {
    let m = config.num_users;
    let per_user_power = config.total_power / m as f64;
    let tx_power = action
        .power_fraction
        .iter()
        .map(|f| f * per_user_power)
        .collect();

    let max = action
        .bandwidth_fraction
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = action
        .bandwidth_fraction
        .iter()
        .map(|f| (f - max).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let bandwidth = weights
        .iter()
        .map(|w| config.total_bandwidth * w / total)
        .collect();
    Allocation {
        tx_power,
        bandwidth,
    }
}

/// Channel-independent distortion of a model.
pub fn distortion(profile: &ScmProfile, config: &EnvConfig) -> f64 {
    config.distortion_scale * profile.distortion_proxy
}

/// `sum(rates) / (lambda * sum(distortions) + epsilon)`.
pub fn rde(rates: &[f64], distortions: &[f64], config: &EnvConfig) -> f64 {
    let total_rate: f64 = rates.iter().sum();
    let total_distortion: f64 = distortions.iter().sum();
    total_rate / (config.rde_lambda * total_distortion + config.rde_epsilon)
}

/// Applies `action` in `state`.
pub fn step<R: Rng + ?Sized>(
    state: &EnvState,
    action: &Action,
    rng: &mut R,
    config: &EnvConfig,
) -> Result<StepOutcome> {
    if state.step_index >= config.episode_length {
        return Err(Error::Contract(format!(
            "step called on a finished episode (step {} of {})",
            state.step_index, config.episode_length
        )));
    }
    let m = config.num_users;
    if state.channel_gains.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: state.channel_gains.len(),
        });
    }
    action.validate(m, config.num_scms())?;

    let allocation = decode_allocation(action, config);
    let mut rates = Vec::with_capacity(m);
    let mut latencies = Vec::with_capacity(m);
    let mut distortions = Vec::with_capacity(m);
    let mut usage = Vec::with_capacity(m);
    let mut latency_violation = 0.0;

    for user in 0..m {
        let profile = &config.catalog.profiles()[action.scm_index[user]];
        let link = LinkAllocation {
            tx_power: allocation.tx_power[user],
            channel_gain: state.channel_gains[user],
            bandwidth: allocation.bandwidth[user],
        };
        let rate = channel::transmission_rate(&link, &config.channel)?;
        let latency = profile.inference_time_per_image
            + channel::transmission_latency(profile.payload_bits, rate);
        latency_violation +=
            (latency - config.latency_cap).clamp(0.0, config.latency_violation_cap);
        rates.push(rate);
        latencies.push(latency);
        distortions.push(distortion(profile, config));
        usage.push(profile.compute_power_watts() + link.tx_power);
    }

    let total_power_used: f64 = usage.iter().sum();
    let power_violation = (total_power_used - config.total_power).max(0.0);
    let rde = rde(&rates, &distortions, config);
    let power_penalty = config.gamma1 * power_violation;
    let latency_penalty = config.gamma2 * latency_violation;
    let reward = rde - power_penalty - latency_penalty;

    let next_step = state.step_index + 1;
    let next_state = EnvState {
        step_index: next_step,
        channel_gains: channel::sample_channel_gains(rng, &config.channel, m),
        remaining_power: state
            .remaining_power
            .iter()
            .zip(&usage)
            .map(|(rem, used)| (rem - used).max(0.0))
            .collect(),
        remaining_bandwidth: state
            .remaining_bandwidth
            .iter()
            .zip(&allocation.bandwidth)
            .map(|(rem, used)| (rem - used).max(0.0))
            .collect(),
    };

    Ok(StepOutcome {
        reward,
        rde,
        per_user_rate: rates,
        per_user_latency: latencies,
        per_user_distortion: distortions,
        allocation,
        scm_index: action.scm_index.clone(),
        total_power_used,
        power_violation,
        latency_violation,
        power_penalty,
        latency_penalty,
        next_state,
        done: next_step == config.episode_length,
    })
}

/// Agent observation: `[gains / E|h|^2 | remaining power / P_max | remaining bandwidth / B_max]`.
pub fn observation(state: &EnvState, config: &EnvConfig) -> Vec<f64> {
    let mean_gain = config.channel.mean_gain();
    let mut obs = Vec::with_capacity(config.observation_dim());
    obs.extend(state.channel_gains.iter().map(|g| g / mean_gain));
    obs.extend(state.remaining_power.iter().map(|p| p / config.total_power));
    obs.extend(
        state
            .remaining_bandwidth
            .iter()
            .map(|b| b / config.total_bandwidth),
    );
    obs
}

/// Result of one step of a generic environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Gym-style episodic interface driven by the PPO trainer.
pub trait Environment {
    fn num_users(&self) -> usize;
    fn num_scms(&self) -> usize;
    fn observation_dim(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn rand::RngCore) -> Vec<f64>;
    fn step(&mut self, action: &Action, rng: &mut dyn rand::RngCore) -> Result<Transition>;
}

/// Stateful wrapper around [`reset`] / [`step`].
#[derive(Debug, Clone)]
pub struct SemcomEnv {
    config: EnvConfig,
    state: Option<EnvState>,
}

impl SemcomEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            state: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> Option<&EnvState> {
        self.state.as_ref()
    }

    pub fn reset_state<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &EnvState {
        self.state.insert(reset(rng, &self.config))
    }

    /// Steps and returns the full outcome. The episode must have been reset.
    pub fn step_outcome<R: Rng + ?Sized>(
        &mut self,
        action: &Action,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        let state = self
            .state
            .as_ref()
            .ok_or_else(|| Error::Contract("step before reset".into()))?;
        let outcome = step(state, action, rng, &self.config)?;
        self.state = Some(outcome.next_state.clone());
        Ok(outcome)
    }
}

impl Environment for SemcomEnv {
    fn num_users(&self) -> usize {
        self.config.num_users
    }

    fn num_scms(&self) -> usize {
        self.config.num_scms()
    }

    fn observation_dim(&self) -> usize {
        self.config.observation_dim()
    }

    fn reset(&mut self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        let state = self.reset_state(rng).clone();
        observation(&state, &self.config)
    }

    fn step(&mut self, action: &Action, rng: &mut dyn rand::RngCore) -> Result<Transition> {
        let outcome = self.step_outcome(action, rng)?;
        Ok(Transition {
            observation: observation(&outcome.next_state, &self.config),
            reward: outcome.reward,
            done: outcome.done,
        })
    }
}

/// Writes one CSV row per (step, user) for an episode trace.
pub fn write_trace_csv<W: Write>(writer: W, outcomes: &[StepOutcome]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record([
        "step",
        "user",
        "scm_index",
        "tx_power_w",
        "bandwidth_hz",
        "rate_bps",
        "latency_s",
        "distortion",
        "rde",
        "power_penalty",
        "latency_penalty",
        "reward",
    ])?;
    for (step, outcome) in outcomes.iter().enumerate() {
        for user in 0..outcome.scm_index.len() {
            csv.write_record([
                step.to_string(),
                user.to_string(),
                outcome.scm_index[user].to_string(),
                outcome.allocation.tx_power[user].to_string(),
                outcome.allocation.bandwidth[user].to_string(),
                outcome.per_user_rate[user].to_string(),
                outcome.per_user_latency[user].to_string(),
                outcome.per_user_distortion[user].to_string(),
                outcome.rde.to_string(),
                outcome.power_penalty.to_string(),
                outcome.latency_penalty.to_string(),
                outcome.reward.to_string(),
            ])?;
        }
    }
    csv.flush().map_err(|e| Error::io("<trace>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ScmProfile;
    use crate::rng::seeded;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn profile(name: &str, power_mw: f64, time: f64, proxy: f64, bits: f64) -> ScmProfile {
        ScmProfile {
            name: name.into(),
            compute_power: power_mw,
            inference_time_per_image: time,
            distortion_proxy: proxy,
            payload_bits: bits,
        }
    }

    fn table_catalog() -> Arc<ScmCatalog> {
        Arc::new(
            ScmCatalog::new(
                vec![
                    profile("LeNet", 120.0, 1.02e-4, 24.65, 8192.0),
                    profile("ResNet", 270.0, 1.06e-4, 14.00, 4096.0),
                    profile("MobileNet", 170.0, 1.06e-4, 24.93, 8192.0),
                    profile("DPN-26", 305.0, 1.9e-4, 10.76, 2048.0),
                ],
                1.0,
                1.0,
            )
            .unwrap(),
        )
    }

    fn uniform(m: usize, scm: usize) -> Action {
        Action {
            scm_index: vec![scm; m],
            power_fraction: vec![1.0; m],
            bandwidth_fraction: vec![0.5; m],
        }
    }

    #[test]
    fn reset_splits_budgets() {
        let config = EnvConfig::with_catalog(table_catalog(), 3);
        let state = reset(&mut seeded(1), &config);
        assert_eq!(state.step_index, 0);
        for p in &state.remaining_power {
            assert_relative_eq!(*p, 1.0, max_relative = 1e-15);
        }
        for b in &state.remaining_bandwidth {
            assert_relative_eq!(*b, 1e7, max_relative = 1e-15);
        }
        assert_eq!(state, reset(&mut seeded(1), &config));

        let single = EnvConfig::with_catalog(table_catalog(), 1);
        let s = reset(&mut seeded(1), &single);
        assert_eq!(s.remaining_power, vec![3.0]);
        assert_eq!(s.remaining_bandwidth, vec![30e6]);
    }

    #[test]
    fn decode_equal_split() {
        let config = EnvConfig::with_catalog(table_catalog(), 3);
        let mut action = uniform(3, 0);
        action.power_fraction = vec![0.4; 3];
        let alloc = decode_allocation(&action, &config);
        for m in 0..3 {
            assert_relative_eq!(alloc.bandwidth[m], 1e7, max_relative = 1e-12);
            assert_relative_eq!(alloc.tx_power[m], 0.4, max_relative = 1e-12);
        }
    }

    #[test]
    fn decode_skewed_bandwidth() {
        let config = EnvConfig::with_catalog(table_catalog(), 3);
        let mut action = uniform(3, 0);
        action.bandwidth_fraction = vec![1.0, 0.0, 0.0];
        let alloc = decode_allocation(&action, &config);
        assert!(alloc.bandwidth[0] > 1e7);
        assert_relative_eq!(alloc.bandwidth.iter().sum::<f64>(), 30e6, max_relative = 1e-12);
    }

    #[test]
    fn decode_full_power_twelve_users() {
        let config = EnvConfig::with_catalog(table_catalog(), 12);
        let alloc = decode_allocation(&uniform(12, 0), &config);
        for p in &alloc.tx_power {
            assert_relative_eq!(*p, 0.25, max_relative = 1e-12);
        }
        assert_relative_eq!(alloc.tx_power.iter().sum::<f64>(), 3.0, max_relative = 1e-12);
    }

    #[test]
    fn distortion_ordering() {
        let catalog = table_catalog();
        let mut config = EnvConfig::with_catalog(catalog.clone(), 1);
        config.distortion_scale = 1e-3;
        assert_relative_eq!(distortion(&catalog.profiles()[3], &config), 1.076e-2, max_relative = 1e-12);
        for scale in [1e-6, 1.0, 37.0] {
            config.distortion_scale = scale;
            assert!(distortion(&catalog.profiles()[0], &config) > distortion(&catalog.profiles()[3], &config));
        }
        config.distortion_scale = 0.0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn rde_examples() {
        let config = EnvConfig::with_catalog(table_catalog(), 2);
        assert_relative_eq!(rde(&[2.0, 2.0], &[0.0, 0.0], &config), 4e5, max_relative = 1e-12);
        assert_eq!(rde(&[0.0, 0.0], &[1.0, 2.0], &config), 0.0);
        assert_relative_eq!(rde(&[1e6], &[0.01076], &config), 1e6 / (107.6 + 1e-5), max_relative = 1e-12);
    }

    #[test]
    fn stepping_finished_episode_fails() {
        let mut config = EnvConfig::with_catalog(table_catalog(), 2);
        config.episode_length = 1;
        let mut rng = seeded(3);
        let state = reset(&mut rng, &config);
        let out = step(&state, &uniform(2, 1), &mut rng, &config).unwrap();
        assert!(out.done);
        assert!(matches!(
            step(&out.next_state, &uniform(2, 1), &mut rng, &config),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn invalid_action_rejected() {
        let config = EnvConfig::with_catalog(table_catalog(), 2);
        let mut rng = seeded(3);
        let state = reset(&mut rng, &config);
        let mut bad = uniform(2, 4);
        assert!(step(&state, &bad, &mut rng, &config).is_err());
        bad = uniform(2, 0);
        bad.power_fraction[1] = 1.5;
        assert!(step(&state, &bad, &mut rng, &config).is_err());
        assert!(step(&state, &uniform(3, 0), &mut rng, &config).is_err());
    }

    #[test]
    fn remaining_resources_decay_and_floor() {
        let config = EnvConfig::with_catalog(table_catalog(), 2);
        let mut rng = seeded(9);
        let state = reset(&mut rng, &config);
        let out = step(&state, &uniform(2, 0), &mut rng, &config).unwrap();
        assert_eq!(out.next_state.step_index, 1);
        assert!(out.next_state.remaining_power.iter().all(|&p| p == 0.0));
        assert!(out.next_state.remaining_bandwidth.iter().all(|b| (0.0..1.0).contains(b)));
        assert_ne!(out.next_state.channel_gains, state.channel_gains);
    }

    #[test]
    fn selection_matrix_is_one_hot() {
        let action = Action {
            scm_index: vec![2, 0],
            power_fraction: vec![0.0; 2],
            bandwidth_fraction: vec![0.0; 2],
        };
        assert_eq!(action.selection_matrix(3), vec![vec![0, 0, 1], vec![1, 0, 0]]);
    }

    #[test]
    fn trace_csv_has_row_per_user_step() {
        let config = EnvConfig::with_catalog(table_catalog(), 3);
        let mut rng = seeded(5);
        let mut state = reset(&mut rng, &config);
        let mut outcomes = Vec::new();
        for _ in 0..2 {
            let out = step(&state, &uniform(3, 1), &mut rng, &config).unwrap();
            state = out.next_state.clone();
            outcomes.push(out);
        }
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &outcomes).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 3);
        assert!(text.starts_with("step,user,scm_index"));
    }

    proptest! {
        #[test]
        fn bandwidth_sums_to_budget(fracs in proptest::collection::vec(0.0..=1.0f64, 1..20)) {
            let config = EnvConfig::with_catalog(table_catalog(), fracs.len());
            let action = Action {
                scm_index: vec![0; fracs.len()],
                power_fraction: fracs.clone(),
                bandwidth_fraction: fracs,
            };
            let alloc = decode_allocation(&action, &config);
            let total: f64 = alloc.bandwidth.iter().sum();
            prop_assert!(((total - 30e6) / 30e6).abs() < 1e-9);
        }

        #[test]
        fn penalties_never_add_reward(seed in 0u64..1000, scm in 0usize..4, p in 0.0..=1.0f64) {
            let config = EnvConfig::with_catalog(table_catalog(), 4);
            let mut rng = seeded(seed);
            let state = reset(&mut rng, &config);
            let mut action = uniform(4, scm);
            action.power_fraction = vec![p; 4];
            let out = step(&state, &action, &mut rng, &config).unwrap();
            prop_assert!(out.power_violation >= 0.0 && out.latency_violation >= 0.0);
            prop_assert!(out.reward <= out.rde);
            if out.power_violation == 0.0 && out.latency_violation == 0.0 {
                prop_assert_eq!(out.reward, out.rde);
            }
        }

        #[test]
        fn more_tx_power_never_lowers_rde(seed in 0u64..1000, user in 0usize..4, lo in 0.0..1.0f64, extra in 0.0..1.0f64) {
            let config = EnvConfig::with_catalog(table_catalog(), 4);
            let mut rng = seeded(seed);
            let state = reset(&mut rng, &config);
            let mut action = uniform(4, 0);
            action.power_fraction[user] = lo;
            let a = step(&state, &action, &mut seeded(0), &config).unwrap();
            action.power_fraction[user] = (lo + extra).min(1.0);
            let b = step(&state, &action, &mut seeded(0), &config).unwrap();
            prop_assert!(b.rde >= a.rde);
        }
    }
}
