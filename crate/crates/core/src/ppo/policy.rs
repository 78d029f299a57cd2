//! Factorized hybrid policy head.
//!
//! The policy network emits one block of `S + 4` values per user:
//! `S` categorical logits over models, then mean and log-std of the
//! pre-squash power fraction, then mean and log-std of the pre-squash
//! bandwidth fraction. Fractions are Gaussian samples pushed through the
//! logistic function, and the joint log-probability sums every user's
//! discrete and continuous components.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::env::Action;
use crate::error::{Error, Result};
use crate::nn::Mlp;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Width of one user's output block.
pub fn block_width(num_scms: usize) -> usize {
    num_scms + 4
}

pub fn output_dim(num_users: usize, num_scms: usize) -> usize {
    num_users * block_width(num_scms)
}

/// Gaussian parameters of one pre-squash fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquashedGaussian {
    pub mean: f64,
    /// Clamped to `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub log_std: f64,
    /// Whether the raw network output was inside the clamp range.
    pub log_std_active: bool,
}

impl SquashedGaussian {
    fn new(mean: f64, raw_log_std: f64) -> Self {
        Self {
            mean,
            log_std: raw_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX),
            log_std_active: (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw_log_std),
        }
    }

    pub fn std(&self) -> f64 {
        self.log_std.exp()
    }

    /// Log-density of the pre-squash value `u`.
    pub fn log_density(&self, u: f64) -> f64 {
        let z = (u - self.mean) / self.std();
        -0.5 * z * z - self.log_std - HALF_LN_2PI
    }

    /// Differential entropy of the pre-squash Gaussian.
    pub fn entropy(&self) -> f64 {
        0.5 + HALF_LN_2PI + self.log_std
    }
}

/// `ln(sigmoid(u) * (1 - sigmoid(u)))`, the log-Jacobian of the squash.
pub fn squash_log_jacobian(u: f64) -> f64 {
    -softplus(u) - softplus(-u)
}

pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Per-user distribution parameters decoded from one policy output row.
#[derive(Debug, Clone, PartialEq)]
pub struct UserHead {
    pub logits: Vec<f64>,
    pub power: SquashedGaussian,
    pub bandwidth: SquashedGaussian,
}

impl UserHead {
    pub fn log_softmax(&self) -> Vec<f64> {
        let max = self.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + self.logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        self.logits.iter().map(|l| l - lse).collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log_softmax().into_iter().map(f64::exp).collect()
    }

    pub fn categorical_entropy(&self) -> f64 {
        self.log_softmax().iter().map(|lp| -lp.exp() * lp).sum()
    }

    /// Index of the largest logit, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &l) in self.logits.iter().enumerate() {
            if l > self.logits[best] {
                best = i;
            }
        }
        best
    }
}

/// Decoded policy output for all users.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridPolicyOutput {
    pub users: Vec<UserHead>,
}

impl HybridPolicyOutput {
    pub fn from_row(row: &[f64], num_users: usize, num_scms: usize) -> Result<Self> {
        let width = block_width(num_scms);
        if row.len() != num_users * width {
            return Err(Error::DimensionMismatch {
                expected: num_users * width,
                actual: row.len(),
            });
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("policy output {v}")));
        }
        let users = row
            .chunks_exact(width)
            .map(|block| UserHead {
                logits: block[..num_scms].to_vec(),
                power: SquashedGaussian::new(block[num_scms], block[num_scms + 1]),
                bandwidth: SquashedGaussian::new(block[num_scms + 2], block[num_scms + 3]),
            })
            .collect();
        Ok(Self { users })
    }

    /// Joint log-probability of a sampled action, squash correction included.
    pub fn log_prob(&self, sample: &SampledAction) -> f64 {
        self.users
            .iter()
            .enumerate()
            .map(|(m, head)| {
                let up = sample.raw_power[m];
                let ub = sample.raw_bandwidth[m];
                head.log_softmax()[sample.action.scm_index[m]]
                    + head.power.log_density(up)
                    - squash_log_jacobian(up)
                    + head.bandwidth.log_density(ub)
                    - squash_log_jacobian(ub)
            })
            .sum()
    }

    /// Sum over users of categorical entropy plus both pre-squash Gaussian entropies.
    pub fn entropy(&self) -> f64 {
        self.users
            .iter()
            .map(|h| h.categorical_entropy() + h.power.entropy() + h.bandwidth.entropy())
            .sum()
    }

    /// Writes `d log_prob / d output` into `out`, scaled by `weight`, and
    /// adds `entropy_weight * d entropy / d output`.
    pub fn accumulate_output_grad(
        &self,
        sample: &SampledAction,
        weight: f64,
        entropy_weight: f64,
        out: &mut [f64],
    ) {
        let num_scms = self.users.first().map_or(0, |h| h.logits.len());
        let width = block_width(num_scms);
        for (m, head) in self.users.iter().enumerate() {
            let block = &mut out[m * width..(m + 1) * width];
            let log_p = head.log_softmax();
            let cat_entropy: f64 = log_p.iter().map(|lp| -lp.exp() * lp).sum();
            for (k, lp) in log_p.iter().enumerate() {
                let p = lp.exp();
                let indicator = if k == sample.action.scm_index[m] { 1.0 } else { 0.0 };
                block[k] += weight * (indicator - p) - entropy_weight * p * (lp + cat_entropy);
            }
            for (offset, gauss, u) in [
                (num_scms, &head.power, sample.raw_power[m]),
                (num_scms + 2, &head.bandwidth, sample.raw_bandwidth[m]),
            ] {
                let var = gauss.std() * gauss.std();
                let z2 = (u - gauss.mean) * (u - gauss.mean) / var;
                block[offset] += weight * (u - gauss.mean) / var;
                if gauss.log_std_active {
                    block[offset + 1] += weight * (z2 - 1.0) + entropy_weight;
                }
            }
        }
    }
}

/// An action together with the pre-squash values it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledAction {
    pub action: Action,
    pub raw_power: Vec<f64>,
    pub raw_bandwidth: Vec<f64>,
}

impl SampledAction {
    pub fn from_raw(scm_index: Vec<usize>, raw_power: Vec<f64>, raw_bandwidth: Vec<f64>) -> Self {
        let action = Action {
            scm_index,
            power_fraction: raw_power.iter().map(|&u| sigmoid(u)).collect(),
            bandwidth_fraction: raw_bandwidth.iter().map(|&u| sigmoid(u)).collect(),
        };
        Self {
            action,
            raw_power,
            raw_bandwidth,
        }
    }
}

/// Draws from the policy, or takes the mode (argmax models, Gaussian means)
/// when `deterministic` is set.
pub fn sample_from_output<R: Rng + ?Sized>(
    output: &HybridPolicyOutput,
    deterministic: bool,
    rng: &mut R,
) -> SampledAction {
    let m = output.users.len();
    let mut scm = Vec::with_capacity(m);
    let mut raw_power = Vec::with_capacity(m);
    let mut raw_bandwidth = Vec::with_capacity(m);
    for head in &output.users {
        if deterministic {
            scm.push(head.argmax());
            raw_power.push(head.power.mean);
            raw_bandwidth.push(head.bandwidth.mean);
        } else {
            scm.push(sample_categorical(&head.probabilities(), rng));
            let ep: f64 = rng.sample(StandardNormal);
            let eb: f64 = rng.sample(StandardNormal);
            raw_power.push(head.power.mean + head.power.std() * ep);
            raw_bandwidth.push(head.bandwidth.mean + head.bandwidth.std() * eb);
        }
    }
    SampledAction::from_raw(scm, raw_power, raw_bandwidth)
}

fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Runs the policy on one observation and samples an action.
/// Returns the action, its joint log-probability and the decoded head.
pub fn sample_action<R: Rng + ?Sized>(
    policy: &Mlp,
    observation: &[f64],
    num_users: usize,
    num_scms: usize,
    deterministic: bool,
    rng: &mut R,
) -> Result<(SampledAction, f64, HybridPolicyOutput)> {
    let row = policy.predict(observation)?;
    let output = HybridPolicyOutput::from_row(&row, num_users, num_scms)?;
    let sample = sample_from_output(&output, deterministic, rng);
    let log_prob = output.log_prob(&sample);
    if !log_prob.is_finite() {
        return Err(Error::NonFinite(format!("action log-probability {log_prob}")));
    }
    Ok((sample, log_prob, output))
}
