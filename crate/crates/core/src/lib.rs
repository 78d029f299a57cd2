//! Joint semantic-compression-model (SCM) selection and power/bandwidth
//! allocation for multi-user semantic communication.
//!
//! The crate is organized bottom-up:
//!
//! - [`catalog`]: measured SCM profiles (power, inference time, quality, payload)
//! - [`channel`]: Rayleigh gains, Shannon rate and transmission latency
//! - [`env`]: the episodic multi-user environment with the
//!   rate-distortion-efficiency (RDE) reward and hinge penalties
//! - [`nn`]: small MLPs with hand-written backprop and an Adam optimizer
//! - [`ppo`]: hybrid discrete/continuous PPO (GAE, clipped surrogate, training loop)
//! - [`baselines`]: random, average and heuristic-RDE strategies
//! - [`experiment`]: config files, training/comparison runners, CSV and plots

pub mod baselines;
pub mod catalog;
pub mod channel;
pub mod env;
pub mod error;
pub mod experiment;
pub mod nn;
pub mod ppo;
pub mod rng;

pub use error::{Error, Result};
