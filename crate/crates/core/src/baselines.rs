//! Non-learning comparison strategies.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::channel::{self, LinkAllocation};
use crate::env::{self, Action, EnvConfig, EnvState};
use crate::error::{Error, Result};

/// The strategies compared in an evaluation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StrategyKind {
    LearnedPolicy,
    Average,
    Random,
    HeuristicRde,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::LearnedPolicy,
        StrategyKind::Average,
        StrategyKind::Random,
        StrategyKind::HeuristicRde,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::LearnedPolicy => "learned",
            StrategyKind::Average => "average",
            StrategyKind::Random => "random",
            StrategyKind::HeuristicRde => "heuristic_rde",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy `{s}`")))
    }
}

/// Uniform model per user and uniform fractions.
pub fn random_policy<R: Rng + ?Sized>(_state: &EnvState, rng: &mut R, config: &EnvConfig) -> Action {
    let m = config.num_users;
    let s = config.num_scms();
    let mut action = Action {
        scm_index: Vec::with_capacity(m),
        power_fraction: Vec::with_capacity(m),
        bandwidth_fraction: Vec::with_capacity(m),
    };
    for _ in 0..m {
        action.scm_index.push(rng.random_range(0..s));
        action.power_fraction.push(rng.random::<f64>());
        action.bandwidth_fraction.push(rng.random::<f64>());
    }
    action
}

/// Same model for everyone, `P_max / M` transmit power and `B_max / M` bandwidth each.
pub fn average_policy(_state: &EnvState, config: &EnvConfig, fixed_scm: usize) -> Result<Action> {
    if fixed_scm >= config.num_scms() {
        return Err(Error::InvalidArgument(format!(
            "fixed_scm {fixed_scm} out of range for {} models",
            config.num_scms()
        )));
    }
    Ok(uniform_action(vec![fixed_scm; config.num_users]))
}

/// Uniform allocation; each user takes the model with the best single-user
/// RDE at its current gain. Compute power and latency are ignored.
pub fn heuristic_rde_policy(state: &EnvState, config: &EnvConfig) -> Action {
    let m = config.num_users;
    let allocation = env::decode_allocation(&uniform_action(vec![0; m]), config);
    let scm_index = (0..m)
        .map(|user| {
            let link = LinkAllocation {
                tx_power: allocation.tx_power[user],
                channel_gain: state.channel_gains[user],
                bandwidth: allocation.bandwidth[user],
            };
            // A positive bandwidth always yields a rate.
            let rate = channel::transmission_rate(&link, &config.channel).unwrap_or(0.0);
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (s, profile) in config.catalog.profiles().iter().enumerate() {
                let score = env::rde(&[rate], &[env::distortion(profile, config)], config);
                if score > best_score {
                    best = s;
                    best_score = score;
                }
            }
            best
        })
        .collect();
    uniform_action(scm_index)
}

fn uniform_action(scm_index: Vec<usize>) -> Action {
    let m = scm_index.len();
    Action {
        scm_index,
        power_fraction: vec![1.0; m],
        bandwidth_fraction: vec![0.5; m],
    }
}
