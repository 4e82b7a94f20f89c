//! C interface to `gail_lin`.
//!
//! Objects cross the boundary as opaque handles that must be released with
//! the matching `*_free` function. Every fallible call returns a
//! [`GlStatus`]; on failure the message is kept per thread and can be read
//! with [`gl_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use gail_lin::datasets::{generate_additional, generate_demos, Behavior};
use gail_lin::eval::{intrinsic_uncertainty, optimality_gap, worst_case_regret};
use gail_lin::mdp::{expected_return, load_expert_instance, Instance, Policy};
use gail_lin::numerics::RewardDomain;
use gail_lin::ogap::{run_ogap, OgapConfig};
use gail_lin::pgap::{run_pgap, MixedPolicy, PgapConfig};
use gail_lin::rng::derive_seed;
use gail_lin::runlog::{Algorithm, RunLog};
use gail_lin::Error;

const DEMO_STREAM: u64 = 1;
const DATA_STREAM: u64 = 2;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed model, dimension mismatch, non-finite or degenerate input.
    InvalidInput = 2,
    Config = 3,
    Aborted = 4,
    Io = 5,
    Format = 6,
    /// A string argument was not valid UTF-8.
    Utf8 = 7,
    Panic = 8,
}

/// Feasible set for the reward parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlRewardDomain {
    Ball = 0,
    NonnegativeBall = 1,
}

/// Who collects the offline dataset.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlBehavior {
    Expert = 0,
    Uniform = 1,
}

/// Online learner settings. Zero `alpha` or `eta` selects the default step.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GlOgapOptions {
    pub episodes: usize,
    pub n1: usize,
    pub alpha: f64,
    pub eta: f64,
    pub lambda: f64,
    pub kappa_scale: f64,
    pub xi: f64,
    pub seed: u64,
    pub reward_domain: GlRewardDomain,
    pub diagnostics: bool,
}

/// Offline learner settings. Zero `alpha` or `eta` selects the default step.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GlPgapOptions {
    pub iterations: usize,
    pub n1: usize,
    pub n2: usize,
    pub alpha: f64,
    pub eta: f64,
    pub lambda: f64,
    pub kappa_scale: f64,
    pub xi: f64,
    pub seed: u64,
    pub reward_domain: GlRewardDomain,
    pub behavior: GlBehavior,
    pub diagnostics: bool,
}

/// An environment with its hidden expert.
pub struct GlInstance(Instance);

/// A Markov policy.
pub struct GlPolicy(Policy);

/// A completed learner run.
pub struct GlRun {
    log: RunLog,
    n1: usize,
    n2: Option<usize>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(err: &Error) -> GlStatus {
    match err {
        Error::InvalidModel(_) | Error::Dimension(_) | Error::NonFinite { .. } | Error::Degenerate(_) => GlStatus::InvalidInput,
        Error::Config { .. } => GlStatus::Config,
        Error::Aborted { .. } => GlStatus::Aborted,
        Error::Io { .. } => GlStatus::Io,
        Error::Format { .. } => GlStatus::Format,
    }
}

struct Failure(GlStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure(status_of(&err), err.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            GlStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {message}"));
            GlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(GlStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(GlStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure(GlStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Failure(GlStatus::Utf8, format!("`{name}` is not valid UTF-8")))
}

fn optional_step(x: f64) -> Option<f64> {
    (x != 0.0).then_some(x)
}

fn domain(d: GlRewardDomain) -> RewardDomain {
    match d {
        GlRewardDomain::Ball => RewardDomain::Ball,
        GlRewardDomain::NonnegativeBall => RewardDomain::NonnegativeBall,
    }
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
/// message length excluding the terminator; `buf` may be null to query it.
#[no_mangle]
pub unsafe extern "C" fn gl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let message = e.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

#[no_mangle]
pub extern "C" fn gl_ogap_options_default() -> GlOgapOptions {
    let c = OgapConfig::default();
    GlOgapOptions {
        episodes: 100,
        n1: 1000,
        alpha: 0.0,
        eta: 0.0,
        lambda: c.lambda,
        kappa_scale: c.kappa_scale,
        xi: c.xi,
        seed: c.seed,
        reward_domain: GlRewardDomain::Ball,
        diagnostics: false,
    }
}

#[no_mangle]
pub extern "C" fn gl_pgap_options_default() -> GlPgapOptions {
    let c = PgapConfig::default();
    GlPgapOptions {
        iterations: 100,
        n1: 1000,
        n2: 1000,
        alpha: 0.0,
        eta: 0.0,
        lambda: c.lambda,
        kappa_scale: c.kappa_scale,
        xi: c.xi,
        seed: c.seed,
        reward_domain: GlRewardDomain::Ball,
        behavior: GlBehavior::Expert,
        diagnostics: false,
    }
}

/// Random tabular instance whose expert is optimal for a random
/// nonnegative reward.
#[no_mangle]
pub unsafe extern "C" fn gl_instance_tabular(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    seed: u64,
    out: *mut *mut GlInstance,
) -> GlStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        *out = boxed(GlInstance(Instance::tabular(num_states, num_actions, horizon, seed)?));
        Ok(())
    })
}

/// The 4-state, 3-action, horizon-4 reference instance.
#[no_mangle]
pub unsafe extern "C" fn gl_instance_reference(out: *mut *mut GlInstance) -> GlStatus {
    guard(|| {
        *out_ptr(out, "out")? = boxed(GlInstance(Instance::reference()));
        Ok(())
    })
}

/// Loads an instance JSON document.
#[no_mangle]
pub unsafe extern "C" fn gl_instance_load(path: *const c_char, out: *mut *mut GlInstance) -> GlStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let path = path_arg(path, "path")?;
        *out = boxed(GlInstance(load_expert_instance(&path)?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gl_instance_free(instance: *mut GlInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Writes |S|, |A|, H, the transition feature dimension and the reward
/// feature dimension. Any output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn gl_instance_dims(
    instance: *const GlInstance,
    num_states: *mut usize,
    num_actions: *mut usize,
    horizon: *mut usize,
    transition_dim: *mut usize,
    reward_dim: *mut usize,
) -> GlStatus {
    guard(|| {
        let inst = &deref(instance, "instance")?.0;
        for (p, v) in [
            (num_states, inst.mdp.num_states()),
            (num_actions, inst.mdp.num_actions()),
            (horizon, inst.mdp.horizon()),
            (transition_dim, inst.mdp.feature_dim()),
            (reward_dim, inst.reward_dim()),
        ] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copy of the instance's expert policy.
#[no_mangle]
pub unsafe extern "C" fn gl_instance_expert(instance: *const GlInstance, out: *mut *mut GlPolicy) -> GlStatus {
    guard(|| {
        let inst = &deref(instance, "instance")?.0;
        *out_ptr(out, "out")? = boxed(GlPolicy(inst.expert.clone()));
        Ok(())
    })
}

/// Policy from a row-major `[h][s][a]` probability table of length H·|S|·|A|.
#[no_mangle]
pub unsafe extern "C" fn gl_policy_new(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    probs: *const f64,
    out: *mut *mut GlPolicy,
) -> GlStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        if probs.is_null() {
            return Err(Failure(GlStatus::NullPointer, "`probs` is null".into()));
        }
        let len = num_states * num_actions * horizon;
        let table = std::slice::from_raw_parts(probs, len).to_vec();
        *out = boxed(GlPolicy(Policy::new(num_states, num_actions, horizon, table)?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gl_policy_free(policy: *mut GlPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// π_h(a | s).
#[no_mangle]
pub unsafe extern "C" fn gl_policy_prob(policy: *const GlPolicy, h: usize, s: usize, a: usize, out: *mut f64) -> GlStatus {
    guard(|| {
        let p = &deref(policy, "policy")?.0;
        if h >= p.horizon() || s >= p.num_states() || a >= p.num_actions() {
            return Err(Failure(
                GlStatus::InvalidInput,
                format!("index ({h}, {s}, {a}) out of range"),
            ));
        }
        *out_ptr(out, "out")? = p.prob(h, s, a);
        Ok(())
    })
}

/// Exact return of `policy` under the instance's expert reward.
#[no_mangle]
pub unsafe extern "C" fn gl_policy_return(instance: *const GlInstance, policy: *const GlPolicy, out: *mut f64) -> GlStatus {
    guard(|| {
        let inst = &deref(instance, "instance")?.0;
        let p = &deref(policy, "policy")?.0;
        *out_ptr(out, "out")? = expected_return(&inst.mdp, &inst.expert_reward, p)?;
        Ok(())
    })
}

/// Samples N₁ expert demonstrations and runs the online learner.
#[no_mangle]
pub unsafe extern "C" fn gl_run_ogap(instance: *const GlInstance, options: *const GlOgapOptions, out: *mut *mut GlRun) -> GlStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let inst = &deref(instance, "instance")?.0;
        let o = *deref(options, "options")?;
        let config = OgapConfig {
            episodes: o.episodes,
            alpha: optional_step(o.alpha),
            eta: optional_step(o.eta),
            lambda: o.lambda,
            kappa_scale: o.kappa_scale,
            xi: o.xi,
            seed: o.seed,
            reward_domain: domain(o.reward_domain),
            diagnostics: o.diagnostics,
        };
        let demos = generate_demos(&inst.mdp, &inst.expert, o.n1, derive_seed(o.seed, DEMO_STREAM), "expert");
        let log = run_ogap(&inst.mdp, &inst.reward_features, &demos, &config)?;
        *out = boxed(GlRun { log, n1: o.n1, n2: None });
        Ok(())
    })
}

/// Samples N₁ demonstrations and N₂ offline trajectories, then runs the
/// offline learner.
#[no_mangle]
pub unsafe extern "C" fn gl_run_pgap(instance: *const GlInstance, options: *const GlPgapOptions, out: *mut *mut GlRun) -> GlStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let inst = &deref(instance, "instance")?.0;
        let o = *deref(options, "options")?;
        let config = PgapConfig {
            iterations: o.iterations,
            alpha: optional_step(o.alpha),
            eta: optional_step(o.eta),
            lambda: o.lambda,
            kappa_scale: o.kappa_scale,
            xi: o.xi,
            seed: o.seed,
            reward_domain: domain(o.reward_domain),
            diagnostics: o.diagnostics,
        };
        let demos = generate_demos(&inst.mdp, &inst.expert, o.n1, derive_seed(o.seed, DEMO_STREAM), "expert");
        let behavior = match o.behavior {
            GlBehavior::Expert => Behavior::Policy {
                policy: &inst.expert,
                id: "expert".into(),
            },
            GlBehavior::Uniform => Behavior::Uniform,
        };
        let data = generate_additional(&inst.mdp, behavior, o.n2, derive_seed(o.seed, DATA_STREAM));
        let (_, log) = run_pgap(&inst.mdp, &inst.reward_features, &demos, &data, &config)?;
        *out = boxed(GlRun {
            log,
            n1: o.n1,
            n2: Some(o.n2),
        });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gl_run_free(run: *mut GlRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of recorded episodes or iterations.
#[no_mangle]
pub unsafe extern "C" fn gl_run_len(run: *const GlRun, out: *mut usize) -> GlStatus {
    guard(|| {
        *out_ptr(out, "out")? = deref(run, "run")?.log.len();
        Ok(())
    })
}

/// Copy of the k-th iterate, 0-based.
#[no_mangle]
pub unsafe extern "C" fn gl_run_policy(run: *const GlRun, k: usize, out: *mut *mut GlPolicy) -> GlStatus {
    guard(|| {
        let log = &deref(run, "run")?.log;
        let episode = log
            .episodes
            .get(k)
            .ok_or_else(|| Failure(GlStatus::InvalidInput, format!("iterate {k} out of range ({} recorded)", log.len())))?;
        *out_ptr(out, "out")? = boxed(GlPolicy(episode.policy.clone()));
        Ok(())
    })
}

/// Worst-case cumulative regret over the reward ball, Regret(K).
#[no_mangle]
pub unsafe extern "C" fn gl_run_regret(instance: *const GlInstance, run: *const GlRun, out: *mut f64) -> GlStatus {
    guard(|| {
        let inst = &deref(instance, "instance")?.0;
        let log = &deref(run, "run")?.log;
        let report = worst_case_regret(&inst.mdp, &inst.expert, &log.policies(), &inst.reward_features)?;
        *out_ptr(out, "out")? = report.total();
        Ok(())
    })
}

/// Worst-case gap between the expert and the uniform mixture of iterates.
#[no_mangle]
pub unsafe extern "C" fn gl_run_gap(instance: *const GlInstance, run: *const GlRun, out: *mut f64) -> GlStatus {
    guard(|| {
        let inst = &deref(instance, "instance")?.0;
        let log = &deref(run, "run")?.log;
        let mixed = MixedPolicy::new(log.policies())?;
        *out_ptr(out, "out")? = optimality_gap(&inst.mdp, &inst.expert, &mixed, &inst.reward_features)?.gap;
        Ok(())
    })
}

/// Intrinsic uncertainty of an offline run's kernel estimate under the
/// expert's occupancy.
#[no_mangle]
pub unsafe extern "C" fn gl_run_intrinsic_uncertainty(instance: *const GlInstance, run: *const GlRun, out: *mut f64) -> GlStatus {
    guard(|| {
        let inst = &deref(instance, "instance")?.0;
        let log = &deref(run, "run")?.log;
        let kernel = log
            .kernel
            .as_ref()
            .filter(|_| log.algorithm == Algorithm::Pgap)
            .ok_or_else(|| Failure(GlStatus::InvalidInput, "run has no kernel estimate".into()))?;
        *out_ptr(out, "out")? = intrinsic_uncertainty(&inst.mdp, &inst.expert, &kernel.gamma)?;
        Ok(())
    })
}

/// Writes the run's artifacts (manifest, per-episode CSV and, with
/// `diagnostics`, raw tables) into `dir`.
#[no_mangle]
pub unsafe extern "C" fn gl_run_write(run: *const GlRun, dir: *const c_char, diagnostics: bool) -> GlStatus {
    guard(|| {
        let run = deref(run, "run")?;
        let dir = path_arg(dir, "dir")?;
        let reference = match run.n2 {
            Some(n2) => format!("ffi:n1={},n2={n2}", run.n1),
            None => format!("ffi:n1={}", run.n1),
        };
        run.log.write_dir(&dir, &reference, diagnostics)?;
        Ok(())
    })
}
