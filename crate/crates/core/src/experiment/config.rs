//! Experiment configuration file: one TOML document with `environment`,
//! `ppo`, `train` and `evaluation` sections plus a catalog path.
//!
//! Omitted keys take the library defaults. The catalog path resolves
//! against the directory containing the config file; `output_dir` against
//! the working directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::catalog::{load_catalog, ScmCatalog};
use crate::channel::ChannelParams;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::ppo::PpoConfig;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    catalog: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    environment: RawEnvironment,
    #[serde(default)]
    ppo: RawPpo,
    #[serde(default)]
    train: RawTrain,
    #[serde(default)]
    evaluation: RawEvaluation,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvironment {
    num_users: Option<usize>,
    total_bandwidth: Option<f64>,
    total_power: Option<f64>,
    latency_cap: Option<f64>,
    rde_lambda: Option<f64>,
    rde_epsilon: Option<f64>,
    gamma1: Option<f64>,
    gamma2: Option<f64>,
    episode_length: Option<usize>,
    distortion_scale: Option<f64>,
    latency_violation_cap: Option<f64>,
    rayleigh_sigma: Option<f64>,
    noise_power: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPpo {
    learning_rate: Option<f64>,
    gamma: Option<f64>,
    gae_lambda: Option<f64>,
    clip_range: Option<f64>,
    value_coef: Option<f64>,
    entropy_coef: Option<f64>,
    update_epochs: Option<usize>,
    minibatch_size: Option<usize>,
    rollout_length: Option<usize>,
    num_epochs: Option<usize>,
    timesteps_per_epoch: Option<usize>,
    max_grad_norm: Option<f64>,
    hidden_sizes: Option<Vec<usize>>,
    init_log_std: Option<f64>,
    normalize_advantages: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    user_counts: Option<Vec<usize>>,
    seeds: Option<Vec<u64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvaluation {
    num_episodes: Option<usize>,
    num_users: Option<usize>,
    seeds: Option<Vec<u64>>,
    fixed_scm: Option<usize>,
    deterministic: Option<bool>,
}

/// Environment parameters without the catalog or user count.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSection {
    pub num_users: usize,
    pub total_bandwidth: f64,
    pub total_power: f64,
    pub latency_cap: f64,
    pub rde_lambda: f64,
    pub rde_epsilon: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub episode_length: usize,
    pub distortion_scale: f64,
    pub latency_violation_cap: f64,
    pub rayleigh_sigma: f64,
    pub noise_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSection {
    /// One convergence curve per entry.
    pub user_counts: Vec<usize>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationSection {
    pub num_episodes: usize,
    pub num_users: usize,
    pub seeds: Vec<u64>,
    /// Model index used by the average strategy.
    pub fixed_scm: usize,
    /// Evaluate the learned policy by its mode instead of sampling.
    pub deterministic: bool,
}

/// A loaded experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub catalog_path: PathBuf,
    pub catalog: Arc<ScmCatalog>,
    pub output_dir: PathBuf,
    pub environment: EnvironmentSection,
    pub ppo: PpoConfig,
    pub train: TrainSection,
    pub evaluation: EvaluationSection,
    /// SHA-256 over the config text and the normalized catalog.
    pub fingerprint: String,
}

impl ExperimentConfig {
    /// Environment configuration for `num_users` users.
    pub fn env_config(&self, num_users: usize) -> Result<EnvConfig> {
        let e = &self.environment;
        let config = EnvConfig {
            num_users,
            total_bandwidth: e.total_bandwidth,
            total_power: e.total_power,
            latency_cap: e.latency_cap,
            rde_lambda: e.rde_lambda,
            rde_epsilon: e.rde_epsilon,
            gamma1: e.gamma1,
            gamma2: e.gamma2,
            episode_length: e.episode_length,
            distortion_scale: e.distortion_scale,
            latency_violation_cap: e.latency_violation_cap,
            channel: ChannelParams::new(e.rayleigh_sigma, e.noise_power)?,
            catalog: Arc::clone(&self.catalog),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Reads and fully validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let (config, violations) = check_config(path)?;
    match config {
        Some(c) if violations.is_empty() => Ok(c),
        _ => Err(Error::Config(violations)),
    }
}

/// Every violation in the config at `path`, each prefixed by its key path.
/// Fails only if the file cannot be read or is not well-formed TOML.
pub fn validate_config(path: impl AsRef<Path>) -> Result<Vec<String>> {
    check_config(path).map(|(_, v)| v)
}

fn check_config(path: impl AsRef<Path>) -> Result<(Option<ExperimentConfig>, Vec<String>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: RawConfig = toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(resolve(raw, base, &text))
}

fn resolve(raw: RawConfig, base: &Path, text: &str) -> (Option<ExperimentConfig>, Vec<String>) {
    let mut violations = Vec::new();

    let catalog_path = raw.catalog.map(|p| base.join(p));
    let catalog = match &catalog_path {
        None => {
            violations.push("catalog: missing catalog path".to_string());
            None
        }
        Some(p) => match load_catalog(p) {
            Ok(c) => Some(Arc::new(c)),
            Err(e) => {
                violations.push(format!("catalog: {e}"));
                None
            }
        },
    };

    let env_default = EnvConfig::with_catalog(
        catalog.clone().unwrap_or_else(|| Arc::new(placeholder_catalog())),
        6,
    );
    let e = raw.environment;
    let environment = EnvironmentSection {
        num_users: e.num_users.unwrap_or(env_default.num_users),
        total_bandwidth: e.total_bandwidth.unwrap_or(env_default.total_bandwidth),
        total_power: e.total_power.unwrap_or(env_default.total_power),
        latency_cap: e.latency_cap.unwrap_or(env_default.latency_cap),
        rde_lambda: e.rde_lambda.unwrap_or(env_default.rde_lambda),
        rde_epsilon: e.rde_epsilon.unwrap_or(env_default.rde_epsilon),
        gamma1: e.gamma1.unwrap_or(env_default.gamma1),
        gamma2: e.gamma2.unwrap_or(env_default.gamma2),
        episode_length: e.episode_length.unwrap_or(env_default.episode_length),
        distortion_scale: e.distortion_scale.unwrap_or(env_default.distortion_scale),
        latency_violation_cap: e
            .latency_violation_cap
            .unwrap_or(env_default.latency_violation_cap),
        rayleigh_sigma: e.rayleigh_sigma.unwrap_or(env_default.channel.rayleigh_sigma()),
        noise_power: e.noise_power.unwrap_or(env_default.channel.noise_power()),
    };
    let probe = EnvConfig {
        num_users: environment.num_users,
        total_bandwidth: environment.total_bandwidth,
        total_power: environment.total_power,
        latency_cap: environment.latency_cap,
        rde_lambda: environment.rde_lambda,
        rde_epsilon: environment.rde_epsilon,
        gamma1: environment.gamma1,
        gamma2: environment.gamma2,
        episode_length: environment.episode_length,
        distortion_scale: environment.distortion_scale,
        latency_violation_cap: environment.latency_violation_cap,
        ..env_default
    };
    for (key, msg) in probe.violations() {
        violations.push(format!("environment.{key}: {msg}"));
    }
    for (key, value) in [
        ("rayleigh_sigma", environment.rayleigh_sigma),
        ("noise_power", environment.noise_power),
    ] {
        if !(value.is_finite() && value > 0.0) {
            violations.push(format!("environment.{key}: must be finite and > 0 (got {value})"));
        }
    }

    let d = PpoConfig::default();
    let p = raw.ppo;
    let ppo = PpoConfig {
        learning_rate: p.learning_rate.unwrap_or(d.learning_rate),
        gamma: p.gamma.unwrap_or(d.gamma),
        gae_lambda: p.gae_lambda.unwrap_or(d.gae_lambda),
        clip_range: p.clip_range.unwrap_or(d.clip_range),
        value_coef: p.value_coef.unwrap_or(d.value_coef),
        entropy_coef: p.entropy_coef.unwrap_or(d.entropy_coef),
        update_epochs: p.update_epochs.unwrap_or(d.update_epochs),
        minibatch_size: p.minibatch_size.unwrap_or(d.minibatch_size),
        rollout_length: p.rollout_length.unwrap_or(d.rollout_length),
        num_epochs: p.num_epochs.unwrap_or(d.num_epochs),
        timesteps_per_epoch: p.timesteps_per_epoch.unwrap_or(d.timesteps_per_epoch),
        max_grad_norm: p.max_grad_norm.unwrap_or(d.max_grad_norm),
        hidden_sizes: p.hidden_sizes.unwrap_or(d.hidden_sizes),
        init_log_std: p.init_log_std.unwrap_or(d.init_log_std),
        normalize_advantages: p.normalize_advantages.unwrap_or(d.normalize_advantages),
    };
    for (key, msg) in ppo.violations() {
        violations.push(format!("ppo.{key}: {msg}"));
    }

    let train = TrainSection {
        user_counts: raw.train.user_counts.unwrap_or_else(|| vec![environment.num_users]),
        seeds: raw.train.seeds.unwrap_or_else(|| vec![0]),
    };
    if train.user_counts.is_empty() || train.user_counts.contains(&0) {
        violations.push("train.user_counts: must be a non-empty list of counts >= 1".to_string());
    }
    if train.seeds.is_empty() {
        violations.push("train.seeds: must be non-empty".to_string());
    }

    let v = raw.evaluation;
    let evaluation = EvaluationSection {
        num_episodes: v.num_episodes.unwrap_or(400),
        num_users: v.num_users.unwrap_or(environment.num_users),
        seeds: v.seeds.unwrap_or_else(|| vec![0]),
        fixed_scm: v.fixed_scm.unwrap_or(1),
        deterministic: v.deterministic.unwrap_or(true),
    };
    if evaluation.num_episodes == 0 {
        violations.push("evaluation.num_episodes: must be >= 1".to_string());
    }
    if evaluation.num_users == 0 {
        violations.push("evaluation.num_users: must be >= 1".to_string());
    }
    if evaluation.seeds.is_empty() {
        violations.push("evaluation.seeds: must be non-empty".to_string());
    }
    if let Some(c) = &catalog {
        if evaluation.fixed_scm >= c.len() {
            violations.push(format!(
                "evaluation.fixed_scm: index {} out of range for {} models",
                evaluation.fixed_scm,
                c.len()
            ));
        }
    }

    let output_dir = raw.output_dir.unwrap_or_else(|| PathBuf::from("results"));
    let config = match (catalog, catalog_path) {
        (Some(catalog), Some(catalog_path)) => {
            let mut hasher = Sha256::new();
            hasher.update(text.as_bytes());
            hasher.update(catalog.to_toml_string().as_bytes());
            Some(ExperimentConfig {
                catalog_path,
                catalog,
                output_dir,
                environment,
                ppo,
                train,
                evaluation,
                fingerprint: hex::encode(hasher.finalize()),
            })
        }
        _ => None,
    };
    (config, violations)
}

/// Stand-in so environment defaults can be validated without a catalog.
fn placeholder_catalog() -> ScmCatalog {
    ScmCatalog::new(
        vec![crate::catalog::ScmProfile {
            name: "placeholder".into(),
            compute_power: 1.0,
            inference_time_per_image: 1.0,
            distortion_proxy: 1.0,
            payload_bits: 1.0,
        }],
        1.0,
        1.0,
    )
    .expect("placeholder catalog is valid")
}
