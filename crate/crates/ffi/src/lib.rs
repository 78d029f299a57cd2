//! C ABI over the `semalloc` simulator and trained agents.
//!
//! Objects are opaque handles created by `*_new`/`*_load` and released by
//! the matching `*_free`. Every fallible call returns a [`SemallocStatus`];
//! on failure [`semalloc_last_error`] describes the error on the calling
//! thread. Handles are not thread-safe; use one per thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use semalloc::catalog::{load_catalog, ScmCatalog};
use semalloc::env::{observation, Action, EnvConfig, SemcomEnv};
use semalloc::ppo::Agent;
use semalloc::rng::{seeded_stream, stream, SimRng};
use semalloc::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemallocStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    InvalidConfig = 5,
    DimensionMismatch = 6,
    NonFinite = 7,
    Checkpoint = 8,
    Contract = 9,
    Internal = 10,
}

/// A loaded model catalog.
pub struct SemallocCatalog {
    catalog: Arc<ScmCatalog>,
}

/// An environment instance with its own random stream.
pub struct SemallocEnv {
    env: SemcomEnv,
    rng: SimRng,
}

/// A trained agent with its own sampling stream.
pub struct SemallocAgent {
    agent: Agent,
    rng: SimRng,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SemallocStatus {
    match err {
        Error::Io { .. } => SemallocStatus::Io,
        Error::Parse { .. } => SemallocStatus::Parse,
        Error::InvalidProfile { .. } | Error::InvalidCatalog(_) | Error::Config(_) => {
            SemallocStatus::InvalidConfig
        }
        Error::InvalidArgument(_) => SemallocStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => SemallocStatus::DimensionMismatch,
        Error::NonFinite(_) => SemallocStatus::NonFinite,
        Error::Checkpoint(_) => SemallocStatus::Checkpoint,
        Error::Contract(_) => SemallocStatus::Contract,
        _ => SemallocStatus::Internal,
    }
}

struct Failure(SemallocStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SemallocStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status plus last-error message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SemallocStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SemallocStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SemallocStatus::Internal
        }
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| Failure(SemallocStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

fn check_len(expected: usize, actual: usize, what: &str) -> Result<(), Failure> {
    if expected == actual {
        Ok(())
    } else {
        Err(Failure(
            SemallocStatus::DimensionMismatch,
            format!("{what}: expected length {expected}, got {actual}"),
        ))
    }
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn semalloc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn semalloc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a catalog TOML file.
#[no_mangle]
pub unsafe extern "C" fn semalloc_catalog_load(
    path: *const c_char,
    out: *mut *mut SemallocCatalog,
) -> SemallocStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let catalog = load_catalog(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(SemallocCatalog { catalog: Arc::new(catalog) }));
        Ok(())
    })
}

/// Number of models in the catalog, 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn semalloc_catalog_len(catalog: *const SemallocCatalog) -> usize {
    catalog.as_ref().map_or(0, |c| c.catalog.len())
}

#[no_mangle]
pub unsafe extern "C" fn semalloc_catalog_free(catalog: *mut SemallocCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// Creates an environment with default budgets for `num_users` users.
/// The catalog handle may be freed afterwards.
#[no_mangle]
pub unsafe extern "C" fn semalloc_env_new(
    catalog: *const SemallocCatalog,
    num_users: usize,
    seed: u64,
    out: *mut *mut SemallocEnv,
) -> SemallocStatus {
    guard(|| {
        let catalog = catalog.as_ref().ok_or_else(|| null("catalog"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = EnvConfig::with_catalog(Arc::clone(&catalog.catalog), num_users);
        let env = SemcomEnv::new(config)?;
        *out = Box::into_raw(Box::new(SemallocEnv {
            env,
            rng: seeded_stream(seed, stream::ENV),
        }));
        Ok(())
    })
}

/// Observation length, 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn semalloc_env_observation_dim(env: *const SemallocEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.config().observation_dim())
}

#[no_mangle]
pub unsafe extern "C" fn semalloc_env_num_users(env: *const SemallocEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.config().num_users)
}

/// Starts an episode and writes the first observation.
#[no_mangle]
pub unsafe extern "C" fn semalloc_env_reset(
    env: *mut SemallocEnv,
    observation_out: *mut f64,
    observation_len: usize,
) -> SemallocStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        check_len(env.env.config().observation_dim(), observation_len, "observation")?;
        let out = slice_mut(observation_out, observation_len, "observation_out")?;
        let state = env.env.reset_state(&mut env.rng).clone();
        out.copy_from_slice(&observation(&state, env.env.config()));
        Ok(())
    })
}

/// Applies one action. All action arrays hold one entry per user.
#[no_mangle]
pub unsafe extern "C" fn semalloc_env_step(
    env: *mut SemallocEnv,
    scm_index: *const u32,
    power_fraction: *const f64,
    bandwidth_fraction: *const f64,
    num_users: usize,
    observation_out: *mut f64,
    observation_len: usize,
    reward_out: *mut f64,
    done_out: *mut bool,
) -> SemallocStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        if reward_out.is_null() || done_out.is_null() {
            return Err(null("reward_out/done_out"));
        }
        check_len(env.env.config().num_users, num_users, "action")?;
        check_len(env.env.config().observation_dim(), observation_len, "observation")?;
        let action = Action {
            scm_index: slice(scm_index, num_users, "scm_index")?.iter().map(|&s| s as usize).collect(),
            power_fraction: slice(power_fraction, num_users, "power_fraction")?.to_vec(),
            bandwidth_fraction: slice(bandwidth_fraction, num_users, "bandwidth_fraction")?.to_vec(),
        };
        let out = slice_mut(observation_out, observation_len, "observation_out")?;
        let outcome = env.env.step_outcome(&action, &mut env.rng)?;
        out.copy_from_slice(&observation(&outcome.next_state, env.env.config()));
        *reward_out = outcome.reward;
        *done_out = outcome.done;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn semalloc_env_free(env: *mut SemallocEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Loads an agent checkpoint written by `semalloc train`.
#[no_mangle]
pub unsafe extern "C" fn semalloc_agent_load(
    path: *const c_char,
    seed: u64,
    out: *mut *mut SemallocAgent,
) -> SemallocStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let agent = Agent::load(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(SemallocAgent {
            agent,
            rng: seeded_stream(seed, stream::POLICY),
        }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn semalloc_agent_num_users(agent: *const SemallocAgent) -> usize {
    agent.as_ref().map_or(0, |a| a.agent.num_users())
}

#[no_mangle]
pub unsafe extern "C" fn semalloc_agent_observation_dim(agent: *const SemallocAgent) -> usize {
    agent.as_ref().map_or(0, |a| a.agent.observation_dim())
}

/// Chooses an action for `observation`. With `deterministic` the policy's
/// mode is taken and no randomness is consumed.
#[no_mangle]
pub unsafe extern "C" fn semalloc_agent_act(
    agent: *mut SemallocAgent,
    observation: *const f64,
    observation_len: usize,
    deterministic: bool,
    scm_index_out: *mut u32,
    power_fraction_out: *mut f64,
    bandwidth_fraction_out: *mut f64,
    num_users: usize,
) -> SemallocStatus {
    guard(|| {
        let agent = agent.as_mut().ok_or_else(|| null("agent"))?;
        check_len(agent.agent.observation_dim(), observation_len, "observation")?;
        check_len(agent.agent.num_users(), num_users, "action")?;
        let obs = slice(observation, observation_len, "observation")?;
        let scm = slice_mut(scm_index_out, num_users, "scm_index_out")?;
        let power = slice_mut(power_fraction_out, num_users, "power_fraction_out")?;
        let bandwidth = slice_mut(bandwidth_fraction_out, num_users, "bandwidth_fraction_out")?;
        let sample = agent.agent.act(obs, deterministic, &mut agent.rng)?;
        for m in 0..num_users {
            scm[m] = sample.action.scm_index[m] as u32;
            power[m] = sample.action.power_fraction[m];
            bandwidth[m] = sample.action.bandwidth_fraction[m];
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn semalloc_agent_free(agent: *mut SemallocAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}
