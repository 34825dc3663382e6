//! C ABI for the aircomp power-control library.
//!
//! Objects cross the boundary as opaque handles created by `*_new` / solver
//! functions and released by the matching `*_free`. Every fallible function
//! returns an [`AircompStatus`]; on failure the message is available from
//! [`aircomp_last_error_message`] on the same thread. Arrays are passed as a
//! pointer plus length, and multi-state arrays are row-major (`n x k`).

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use aircomp::fading::{outer_solve, FadingSolution, OuterMethod, OuterOptions};
use aircomp::lowcomplexity::solve_lowcomplexity;
use aircomp::model::mse_single_state;
use aircomp::static_solver::solve_static;
use aircomp::waterfilling::solve_p3;
use aircomp::{ChannelVector, Denoise, Error, FadingEnsemble, SystemConfig};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AircompStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    DegenerateChannel = 4,
    Unsupported = 5,
    UnboundedInner = 6,
    InternalError = 7,
    Panic = 8,
}

impl From<&Error> for AircompStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Config(_) => AircompStatus::InvalidArgument,
            Error::DimensionMismatch { .. } => AircompStatus::DimensionMismatch,
            Error::DegenerateChannel { .. } => AircompStatus::DegenerateChannel,
            Error::Unsupported(_) => AircompStatus::Unsupported,
            Error::UnboundedInner { .. } => AircompStatus::UnboundedInner,
            _ => AircompStatus::InternalError,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(AircompStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(AircompStatus::from(&e), e.to_string())
    }
}

type FfiResult = std::result::Result<(), Failure>;

fn null(what: &str) -> Failure {
    Failure(AircompStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> FfiResult) -> AircompStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            AircompStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside aircomp".into());
            AircompStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> std::result::Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> std::result::Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write<T>(p: *mut T, v: T, what: &str) -> FfiResult {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> std::result::Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn check_len(expected: usize, got: usize) -> FfiResult {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got }.into());
    }
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
#[no_mangle]
pub unsafe extern "C" fn aircomp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Noise variance and per-device power budgets.
pub struct AircompSystem {
    inner: SystemConfig,
}

#[no_mangle]
pub unsafe extern "C" fn aircomp_system_new(noise_var: f64, budgets: *const f64, k: usize, out: *mut *mut AircompSystem) -> AircompStatus {
    guard(|| {
        let budgets = slice(budgets, k, "budgets")?;
        let inner = SystemConfig::new(noise_var, budgets.to_vec())?;
        write(out, Box::into_raw(Box::new(AircompSystem { inner })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn aircomp_system_free(system: *mut AircompSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// A finite set of weighted channel states.
pub struct AircompEnsemble {
    inner: FadingEnsemble,
}

/// `n` i.i.d. Rayleigh states with `h_k ~ CN(0, sigma_h_sq)`.
#[no_mangle]
pub unsafe extern "C" fn aircomp_ensemble_rayleigh(k: usize, n: usize, sigma_h_sq: f64, seed: u64, out: *mut *mut AircompEnsemble) -> AircompStatus {
    guard(|| {
        let inner = FadingEnsemble::rayleigh(k, n, sigma_h_sq, seed)?;
        write(out, Box::into_raw(Box::new(AircompEnsemble { inner })), "out")
    })
}

/// Builds an ensemble from row-major `n x k` channel power gains and `n` weights summing to one.
#[no_mangle]
pub unsafe extern "C" fn aircomp_ensemble_from_power_gains(
    power_gains: *const f64,
    weights: *const f64,
    n: usize,
    k: usize,
    out: *mut *mut AircompEnsemble,
) -> AircompStatus {
    guard(|| {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()).into());
        }
        let gains = slice(power_gains, n * k, "power_gains")?;
        let weights = slice(weights, n, "weights")?;
        let rows: Vec<Vec<f64>> = gains.chunks(k).map(<[f64]>::to_vec).collect();
        let inner = FadingEnsemble::from_power_gains(&rows, weights.to_vec())?;
        write(out, Box::into_raw(Box::new(AircompEnsemble { inner })), "out")
    })
}

/// Number of states, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn aircomp_ensemble_len(ensemble: *const AircompEnsemble) -> usize {
    ensemble.as_ref().map_or(0, |e| e.inner.len())
}

/// Copies the `k` channel power gains of one state into `out`.
#[no_mangle]
pub unsafe extern "C" fn aircomp_ensemble_power_gains(ensemble: *const AircompEnsemble, state: usize, out: *mut f64, k: usize) -> AircompStatus {
    guard(|| {
        let ens = &handle(ensemble, "ensemble")?.inner;
        if state >= ens.len() {
            return Err(Error::InvalidArgument(format!("state {state} out of range 0..{}", ens.len())).into());
        }
        check_len(ens.k(), k)?;
        slice_mut(out, k, "out")?.copy_from_slice(ens.state(state).power_gains());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn aircomp_ensemble_free(ensemble: *mut AircompEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

/// Optimal static policy for one channel state. `out_powers` receives `k`
/// values; the scalar outputs may be null when not needed.
#[no_mangle]
pub unsafe extern "C" fn aircomp_solve_static(
    system: *const AircompSystem,
    power_gains: *const f64,
    k: usize,
    out_powers: *mut f64,
    out_eta: *mut f64,
    out_k_star: *mut usize,
    out_objective: *mut f64,
) -> AircompStatus {
    guard(|| {
        let cfg = &handle(system, "system")?.inner;
        check_len(cfg.k(), k)?;
        let ch = ChannelVector::from_power_gains(slice(power_gains, k, "power_gains")?)?;
        let sol = solve_static(cfg, &ch)?;
        slice_mut(out_powers, k, "out_powers")?.copy_from_slice(&sol.powers);
        if !out_eta.is_null() {
            out_eta.write(sol.eta_star);
        }
        if !out_k_star.is_null() {
            out_k_star.write(sol.k_star);
        }
        if !out_objective.is_null() {
            out_objective.write(sol.objective);
        }
        Ok(())
    })
}

/// Scaled MSE of a policy in one state. Pass `eta = INFINITY` for a silent receiver.
#[no_mangle]
pub unsafe extern "C" fn aircomp_mse_single_state(
    system: *const AircompSystem,
    power_gains: *const f64,
    powers: *const f64,
    k: usize,
    eta: f64,
    out_mse: *mut f64,
) -> AircompStatus {
    guard(|| {
        let cfg = &handle(system, "system")?.inner;
        check_len(cfg.k(), k)?;
        let ch = ChannelVector::from_power_gains(slice(power_gains, k, "power_gains")?)?;
        let eta = if eta == f64::INFINITY { Denoise::Silent } else { Denoise::finite(eta)? };
        let report = mse_single_state(cfg, &ch, slice(powers, k, "powers")?, eta)?;
        write(out_mse, report.total_scaled, "out_mse")
    })
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AircompMethod {
    Auto = 0,
    Ellipsoid = 1,
    ProjectedNewton = 2,
    ProjectedSubgradient = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AircompFadingOptions {
    pub tol: f64,
    pub kkt_tol: f64,
    /// 0 selects the method's default iteration cap.
    pub max_iter: usize,
    pub mu_max: f64,
    pub method: AircompMethod,
}

#[no_mangle]
pub extern "C" fn aircomp_fading_options_default() -> AircompFadingOptions {
    let d = OuterOptions::default();
    AircompFadingOptions { tol: d.tol, kkt_tol: d.kkt_tol, max_iter: 0, mu_max: d.mu_max, method: AircompMethod::Auto }
}

impl From<&AircompFadingOptions> for OuterOptions {
    fn from(o: &AircompFadingOptions) -> Self {
        OuterOptions {
            tol: o.tol,
            kkt_tol: o.kkt_tol,
            max_iter: (o.max_iter > 0).then_some(o.max_iter),
            mu_max: o.mu_max,
            method: match o.method {
                AircompMethod::Auto => OuterMethod::Auto,
                AircompMethod::Ellipsoid => OuterMethod::Ellipsoid,
                AircompMethod::ProjectedNewton => OuterMethod::ProjectedNewton,
                AircompMethod::ProjectedSubgradient => OuterMethod::ProjectedSubgradient,
            },
        }
    }
}

/// Result of `aircomp_solve_fading`.
pub struct AircompFadingSolution {
    inner: FadingSolution,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AircompFadingSummary {
    pub dual_value: f64,
    /// Unscaled ensemble MSE of the returned policy.
    pub primal_value: f64,
    pub gap: f64,
    pub relative_gap: f64,
    /// Scaled ensemble MSE (primal value divided by K^2).
    pub mse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub num_warnings: usize,
}

/// Solves the fading problem; `options` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn aircomp_solve_fading(
    system: *const AircompSystem,
    ensemble: *const AircompEnsemble,
    options: *const AircompFadingOptions,
    out: *mut *mut AircompFadingSolution,
) -> AircompStatus {
    guard(|| {
        let cfg = &handle(system, "system")?.inner;
        let ens = &handle(ensemble, "ensemble")?.inner;
        let opts = options.as_ref().map_or_else(OuterOptions::default, OuterOptions::from);
        let inner = outer_solve(cfg, ens, &opts)?;
        write(out, Box::into_raw(Box::new(AircompFadingSolution { inner })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn aircomp_fading_summary(solution: *const AircompFadingSolution, out: *mut AircompFadingSummary) -> AircompStatus {
    guard(|| {
        let s = &handle(solution, "solution")?.inner;
        let summary = AircompFadingSummary {
            dual_value: s.dual_value,
            primal_value: s.primal_value,
            gap: s.gap,
            relative_gap: s.relative_gap,
            mse: s.total_scaled(),
            iterations: s.iterations,
            converged: s.converged,
            num_warnings: s.warnings.len(),
        };
        write(out, summary, "out")
    })
}

/// Copies the `k` optimal dual prices.
#[no_mangle]
pub unsafe extern "C" fn aircomp_fading_mu(solution: *const AircompFadingSolution, out: *mut f64, k: usize) -> AircompStatus {
    guard(|| {
        let s = &handle(solution, "solution")?.inner;
        check_len(s.mu_opt.len(), k)?;
        slice_mut(out, k, "out")?.copy_from_slice(&s.mu_opt);
        Ok(())
    })
}

/// Copies the `k` powers of one state and its denoising factor (`INFINITY` when silent).
#[no_mangle]
pub unsafe extern "C" fn aircomp_fading_state_policy(
    solution: *const AircompFadingSolution,
    state: usize,
    out_powers: *mut f64,
    k: usize,
    out_eta: *mut f64,
) -> AircompStatus {
    guard(|| {
        let s = &handle(solution, "solution")?.inner;
        if state >= s.policy.num_states() {
            return Err(Error::InvalidArgument(format!("state {state} out of range 0..{}", s.policy.num_states())).into());
        }
        check_len(s.policy.k(), k)?;
        slice_mut(out_powers, k, "out_powers")?.copy_from_slice(s.policy.powers(state));
        write(out_eta, s.policy.denoise(state).value(), "out_eta")
    })
}

#[no_mangle]
pub unsafe extern "C" fn aircomp_fading_solution_free(solution: *mut AircompFadingSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Truncated channel inversion with one denoising factor; `out_xi` receives
/// the `k` thresholds on `|h_k|^2`.
#[no_mangle]
pub unsafe extern "C" fn aircomp_solve_lowcomplexity(
    system: *const AircompSystem,
    ensemble: *const AircompEnsemble,
    out_eta: *mut f64,
    out_xi: *mut f64,
    k: usize,
    out_mse: *mut f64,
) -> AircompStatus {
    guard(|| {
        let cfg = &handle(system, "system")?.inner;
        let ens = &handle(ensemble, "ensemble")?.inner;
        check_len(cfg.k(), k)?;
        let policy = solve_lowcomplexity(cfg, ens, None)?;
        let out = slice_mut(out_xi, k, "out_xi")?;
        out.copy_from_slice(&policy.xi);
        write(out_eta, policy.eta, "out_eta")?;
        write(out_mse, policy.report(cfg, ens)?.total_scaled, "out_mse")
    })
}

/// Single power-limited device: its dual price, silence threshold on `|h|`
/// and the magnitude at which its power peaks.
#[no_mangle]
pub unsafe extern "C" fn aircomp_solve_waterfilling(
    system: *const AircompSystem,
    ensemble: *const AircompEnsemble,
    limited_device: usize,
    out_mu: *mut f64,
    out_threshold: *mut f64,
    out_peak_gain: *mut f64,
) -> AircompStatus {
    guard(|| {
        let cfg = &handle(system, "system")?.inner;
        let ens = &handle(ensemble, "ensemble")?.inner;
        let sol = solve_p3(cfg, ens, limited_device)?;
        write(out_mu, sol.mu1, "out_mu")?;
        write(out_threshold, sol.threshold, "out_threshold")?;
        write(out_peak_gain, sol.peak_gain, "out_peak_gain")
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aircomp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
