use std::path::Path;
use std::sync::Arc;

use semalloc::catalog::load_catalog;
use semalloc::env::{EnvConfig, SemcomEnv};
use semalloc::ppo::{train, PpoConfig};

fn env(users: usize) -> SemcomEnv {
    let catalog = load_catalog(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/catalog.toml")).unwrap();
    SemcomEnv::new(EnvConfig::with_catalog(Arc::new(catalog), users)).unwrap()
}

fn small(epochs: usize, steps: usize, rollout: usize, passes: usize, batch: usize) -> PpoConfig {
    PpoConfig {
        num_epochs: epochs,
        timesteps_per_epoch: steps,
        rollout_length: rollout,
        update_epochs: passes,
        minibatch_size: batch,
        hidden_sizes: vec![16, 16],
        ..PpoConfig::default()
    }
}

#[test]
fn one_update_per_full_batch() {
    let (_, report) = train(&mut env(2), &small(1, 8, 8, 1, 8), 0).unwrap();
    assert_eq!(report.epochs.len(), 1);
    assert_eq!(report.epochs[0].updates, 1);
}

#[test]
fn buffer_is_cleared_between_rollouts() {
    // Two rollouts of 20 steps, each split into 2 minibatches for 2 passes.
    // A buffer that kept the first rollout would give 12 updates.
    let (_, report) = train(&mut env(2), &small(1, 40, 20, 2, 10), 0).unwrap();
    assert_eq!(report.epochs[0].updates, 8);
}

#[test]
fn partial_minibatch_counts() {
    let (_, report) = train(&mut env(2), &small(1, 25, 25, 1, 10), 0).unwrap();
    assert_eq!(report.epochs[0].updates, 3);
}

#[test]
fn same_seed_same_agent() {
    let config = small(3, 60, 30, 2, 16);
    let (a, ra) = train(&mut env(3), &config, 11).unwrap();
    let (b, rb) = train(&mut env(3), &config, 11).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(a, b);
    let (c, _) = train(&mut env(3), &config, 12).unwrap();
    assert_ne!(a, c);
}

#[test]
fn episodes_are_counted() {
    // Episodes last 10 steps and every epoch starts from a reset.
    let (_, report) = train(&mut env(2), &small(2, 50, 50, 1, 25), 1).unwrap();
    for e in &report.epochs {
        assert_eq!(e.episodes, 5);
        assert!(e.mean_episode_reward.is_finite() && e.entropy.is_finite());
    }
}

#[test]
fn rejects_invalid_config() {
    let config = PpoConfig { clip_range: 0.0, ..PpoConfig::default() };
    let err = train(&mut env(2), &config, 0).unwrap_err();
    assert!(err.to_string().contains("clip_range"), "{err}");
}
