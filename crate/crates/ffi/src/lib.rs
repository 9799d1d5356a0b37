//! C ABI over the `hhvg` core library.
//!
//! Every function returns an [`HhvgStatus`]; on failure a message for the
//! calling thread is available from [`hhvg_last_error_message`]. Objects
//! are opaque handles created by `*_new` and released by `*_free`.
//! Matrices are row-major `double[16]`, vectors `double[4]`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hhvg::agent::{Agent, Variant};
use hhvg::config::{ExperimentConfig, Profile};
use hhvg::env::{self, EnvConfig, State};
use hhvg::harness::mann_whitney_u;
use hhvg::mathcore::{gaussian_kl, householder_cov, Gaussian, HouseholderCovParams, Mat4, Vec4};
use hhvg::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HhvgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Config = 4,
    Dependency = 5,
    Io = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HhvgStatus {
    match e {
        Error::Config(_) => HhvgStatus::Config,
        Error::Dependency(_) => HhvgStatus::Dependency,
        Error::Io(_) | Error::Format(_) => HhvgStatus::Io,
        e if e.is_numerical() => HhvgStatus::Numerical,
        _ => HhvgStatus::InvalidArgument,
    }
}

fn guard<F>(f: F) -> HhvgStatus
where
    F: FnOnce() -> Result<(), (HhvgStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HhvgStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            HhvgStatus::Panic
        }
    }
}

fn lib(e: Error) -> (HhvgStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (HhvgStatus, String) {
    (HhvgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read<const N: usize>(p: *const f64, what: &str) -> Result<[f64; N], (HhvgStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let mut out = [0.0; N];
    out.copy_from_slice(std::slice::from_raw_parts(p, N));
    Ok(out)
}

unsafe fn write<const N: usize>(p: *mut f64, v: &[f64; N], what: &str) -> Result<(), (HhvgStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    std::slice::from_raw_parts_mut(p, N).copy_from_slice(v);
    Ok(())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (HhvgStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (HhvgStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hhvg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Environment configuration handle.
pub struct HhvgEnv {
    cfg: EnvConfig,
}

/// Creates the default environment.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hhvg_env_new(out: *mut *mut HhvgEnv) -> HhvgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(HhvgEnv { cfg: EnvConfig::default() }));
        Ok(())
    })
}

/// Creates an environment from TOML text (fields not given keep their defaults).
///
/// # Safety
/// `toml` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hhvg_env_from_toml(toml: *const c_char, out: *mut *mut HhvgEnv) -> HhvgStatus {
    guard(|| {
        let text = str_arg(toml, "toml")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg: EnvConfig = ::toml::from_str(text).map_err(|e| (HhvgStatus::Config, format!("invalid environment: {e}")))?;
        cfg.validate().map_err(lib)?;
        *out = Box::into_raw(Box::new(HhvgEnv { cfg }));
        Ok(())
    })
}

/// # Safety
/// `env` must come from `hhvg_env_new`/`hhvg_env_from_toml` or be null.
#[no_mangle]
pub unsafe extern "C" fn hhvg_env_free(env: *mut HhvgEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Number of discrete actions.
///
/// # Safety
/// `env` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hhvg_env_num_actions(env: *const HhvgEnv, out: *mut u32) -> HhvgStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = env.cfg.action_grid().len() as u32;
        Ok(())
    })
}

/// Advances `state` (x, y, vx, vy) by one step under a grid action.
///
/// # Safety
/// `state_in` and `state_out` must point to 4 doubles; they may alias.
#[no_mangle]
pub unsafe extern "C" fn hhvg_env_step(
    env: *const HhvgEnv,
    state_in: *const f64,
    action_index: u32,
    state_out: *mut f64,
) -> HhvgStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        let s = State::from_array(read::<4>(state_in, "state_in")?);
        let next = env::step(s, action_index as usize, &env.cfg).map_err(lib)?;
        write(state_out, &next.to_array(), "state_out")
    })
}

/// Learning agent handle.
pub struct HhvgAgent {
    agent: Agent,
}

/// Summary of one agent step.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct HhvgStepReport {
    pub t: u64,
    pub state: [f64; 4],
    pub fm_loss: f64,
    /// NaN when the variant has no such component.
    pub vf_loss: f64,
    pub mm_loss: f64,
    pub ap_loss: f64,
    pub reward: f64,
}

/// Creates an agent of `variant` (`cb`, `cpe`, `pggr`, `prw`) with desk
/// settings in `env`. PG/IRS needs a reward database and is refused with
/// `Dependency`.
///
/// # Safety
/// `env` must be a live handle, `variant` a nul-terminated string and `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hhvg_agent_new(
    env: *const HhvgEnv,
    variant: *const c_char,
    seed: u64,
    out: *mut *mut HhvgAgent,
) -> HhvgStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        let v: Variant = str_arg(variant, "variant")?.parse().map_err(lib)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = ExperimentConfig::profile(Profile::Desk).agent_config();
        let agent = Agent::new(v, cfg, env.cfg.clone(), seed, None).map_err(lib)?;
        *out = Box::into_raw(Box::new(HhvgAgent { agent }));
        Ok(())
    })
}

/// # Safety
/// `agent` must come from `hhvg_agent_new` or be null.
#[no_mangle]
pub unsafe extern "C" fn hhvg_agent_free(agent: *mut HhvgAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}

/// Runs one act-and-learn step. On failure the agent is left unchanged.
///
/// # Safety
/// `agent` must be a live handle and `report` a valid pointer or null.
#[no_mangle]
pub unsafe extern "C" fn hhvg_agent_step(agent: *mut HhvgAgent, report: *mut HhvgStepReport) -> HhvgStatus {
    guard(|| {
        let a = agent.as_mut().ok_or_else(|| null("agent"))?;
        let r = a.agent.hhvg_step().map_err(lib)?;
        if let Some(out) = report.as_mut() {
            *out = HhvgStepReport {
                t: r.t,
                state: r.state.to_array(),
                fm_loss: r.fm_loss,
                vf_loss: r.vf_loss.unwrap_or(f64::NAN),
                mm_loss: r.mm_loss.unwrap_or(f64::NAN),
                ap_loss: r.ap_loss.unwrap_or(f64::NAN),
                reward: r.reward,
            };
        }
        Ok(())
    })
}

/// Current state of the agent.
///
/// # Safety
/// `agent` must be a live handle and `state_out` point to 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn hhvg_agent_state(agent: *const HhvgAgent, state_out: *mut f64) -> HhvgStatus {
    guard(|| {
        let a = agent.as_ref().ok_or_else(|| null("agent"))?;
        write(state_out, &a.agent.state().to_array(), "state_out")
    })
}

/// Forward-model mean prediction of the agent for `(state, accel)`.
///
/// # Safety
/// `state` must point to 4 doubles, `accel` to 2 and `out` to 4.
#[no_mangle]
pub unsafe extern "C" fn hhvg_agent_predict(
    agent: *const HhvgAgent,
    state: *const f64,
    accel: *const f64,
    out: *mut f64,
) -> HhvgStatus {
    guard(|| {
        let a = agent.as_ref().ok_or_else(|| null("agent"))?;
        let s = Vec4::from(read::<4>(state, "state")?);
        let u = read::<2>(accel, "accel")?;
        let f = a.agent.forward_model().fm_mean(&s, &u.into()).map_err(lib)?;
        write(out, &[f[0], f[1], f[2], f[3]], "out")
    })
}

unsafe fn gaussian(mean: *const f64, cov: *const f64, what: &str) -> Result<Gaussian<4>, (HhvgStatus, String)> {
    let m = Vec4::from(read::<4>(mean, what)?);
    let c = Mat4::from_row_slice(&read::<16>(cov, what)?);
    Gaussian::new(m, c).map_err(lib)
}

/// Closed-form `KL[N(mp, Cp) || N(mq, Cq)]` in four dimensions.
///
/// # Safety
/// Means point to 4 doubles, covariances to 16 (row-major), `out` to one.
#[no_mangle]
pub unsafe extern "C" fn hhvg_gaussian_kl(
    mean_p: *const f64,
    cov_p: *const f64,
    mean_q: *const f64,
    cov_q: *const f64,
    out: *mut f64,
) -> HhvgStatus {
    guard(|| {
        let p = gaussian(mean_p, cov_p, "p")?;
        let q = gaussian(mean_q, cov_q, "q")?;
        let k = gaussian_kl(&p, &q).map_err(lib)?;
        write(out, &[k], "out")
    })
}

/// Covariance `H diag(d) H` with `H` the reflection along `v`.
///
/// # Safety
/// `d` and `v` point to 4 doubles, `cov_out` to 16.
#[no_mangle]
pub unsafe extern "C" fn hhvg_householder_cov(d: *const f64, v: *const f64, cov_out: *mut f64) -> HhvgStatus {
    guard(|| {
        let params = HouseholderCovParams { d: Vec4::from(read::<4>(d, "d")?), v: Vec4::from(read::<4>(v, "v")?) };
        let c = householder_cov(&params).map_err(lib)?;
        let mut flat = [0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                flat[4 * i + j] = c[(i, j)];
            }
        }
        write(cov_out, &flat, "cov_out")
    })
}

/// Mann-Whitney U test of `x < y`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct HhvgUTest {
    pub u: f64,
    /// One-sided p-value `P(U <= u)`.
    pub p: f64,
    /// 1 when the exact distribution was used, 0 for the normal approximation.
    pub exact: i32,
    /// 1 when every pooled value was identical.
    pub degenerate: i32,
}

/// # Safety
/// `x` points to `nx` doubles, `y` to `ny`, `out` to one `HhvgUTest`.
#[no_mangle]
pub unsafe extern "C" fn hhvg_mann_whitney_u(
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    out: *mut HhvgUTest,
) -> HhvgStatus {
    guard(|| {
        if x.is_null() || y.is_null() {
            return Err(null("sample"));
        }
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let t = mann_whitney_u(std::slice::from_raw_parts(x, nx), std::slice::from_raw_parts(y, ny)).map_err(lib)?;
        *out = HhvgUTest {
            u: t.u,
            p: t.p,
            exact: i32::from(t.method == hhvg::harness::UMethod::Exact),
            degenerate: i32::from(t.degenerate),
        };
        Ok(())
    })
}
