use crate::error::{Error, Result};

/// PPO hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub learning_rate: f64,
    /// Discount factor.
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_range: f64,
    /// Weight of the value loss in the total loss.
    pub value_coef: f64,
    /// Weight of the entropy bonus; 0 gives the plain clipped objective plus value loss.
    pub entropy_coef: f64,
    /// Passes over the buffer per update phase.
    pub update_epochs: usize,
    pub minibatch_size: usize,
    /// Maximum number of steps collected before an update phase.
    pub rollout_length: usize,
    pub num_epochs: usize,
    pub timesteps_per_epoch: usize,
    pub max_grad_norm: f64,
    pub hidden_sizes: Vec<usize>,
    /// Initial bias of the log-std outputs.
    pub init_log_std: f64,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-5,
            gamma: 0.995,
            gae_lambda: 0.5,
            clip_range: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
            update_epochs: 15,
            minibatch_size: 64,
            rollout_length: 2048,
            num_epochs: 150,
            timesteps_per_epoch: 2000,
            max_grad_norm: 0.5,
            hidden_sizes: vec![128, 128],
            init_log_std: -0.5,
            normalize_advantages: true,
        }
    }
}

impl PpoConfig {
    /// Every invariant violation, keyed by field name.
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut unit = |key, v: f64| {
            if !(v > 0.0 && v <= 1.0) {
                out.push((key, format!("must be in (0, 1] (got {v})")));
            }
        };
        unit("gamma", self.gamma);
        unit("gae_lambda", self.gae_lambda);
        for (key, v) in [
            ("learning_rate", self.learning_rate),
            ("clip_range", self.clip_range),
            ("max_grad_norm", self.max_grad_norm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                out.push((key, format!("must be finite and > 0 (got {v})")));
            }
        }
        for (key, v) in [("value_coef", self.value_coef), ("entropy_coef", self.entropy_coef)] {
            if !(v.is_finite() && v >= 0.0) {
                out.push((key, format!("must be finite and >= 0 (got {v})")));
            }
        }
        for (key, v) in [
            ("update_epochs", self.update_epochs),
            ("minibatch_size", self.minibatch_size),
            ("rollout_length", self.rollout_length),
            ("num_epochs", self.num_epochs),
            ("timesteps_per_epoch", self.timesteps_per_epoch),
        ] {
            if v == 0 {
                out.push((key, "must be >= 1".to_string()));
            }
        }
        if self.hidden_sizes.contains(&0) {
            out.push(("hidden_sizes", "widths must be >= 1".to_string()));
        }
        if !self.init_log_std.is_finite() {
            out.push(("init_log_std", "must be finite".to_string()));
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
}
