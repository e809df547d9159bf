//! C ABI over the `slah` crate.
//!
//! Objects are opaque handles created by `*_new` / `slah_fit` and released
//! with the matching `*_free`. Every fallible call returns a [`SlahStatus`];
//! on failure, [`slah_last_error`] copies a message describing the most
//! recent error on the calling thread. Missing KPI values are reported as
//! NaN. Panics never cross the boundary; they surface as
//! [`SlahStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use slah::harness::{run_oracle, ExperimentConfig};
use slah::healer::{propagate_alpha, weights, CouplingRow};
use slah::simulator::{EpisodeWindow, Simulator};
use slah::statlearn::{fit_with, FitOptions, KpiModel, Sample};
use slah::{FitError, HarnessError, HealError, ScenarioError, SimError};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlahStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Simulation = 4,
    Fit = 5,
    Healing = 6,
    Panic = 7,
}

/// Simulator bound to a network layout and traffic model.
pub struct SlahSimulator {
    inner: Simulator,
}

/// Fitted logistic KPI model.
pub struct SlahModel {
    inner: KpiModel,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(SlahStatus, String);

impl Failure {
    fn arg(msg: impl Into<String>) -> Self {
        Failure(SlahStatus::InvalidArgument, msg.into())
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let status = match e.category() {
            "simulation" => SlahStatus::Simulation,
            "fit" => SlahStatus::Fit,
            "healing" => SlahStatus::Healing,
            _ => SlahStatus::Config,
        };
        Failure(status, e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure(SlahStatus::Simulation, e.to_string())
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure(SlahStatus::Config, e.to_string())
    }
}

impl From<FitError> for Failure {
    fn from(e: FitError) -> Self {
        Failure(SlahStatus::Fit, e.to_string())
    }
}

impl From<HealError> for Failure {
    fn from(e: HealError) -> Self {
        Failure(SlahStatus::Healing, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SlahStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (SlahStatus::Ok, String::new()),
        Ok(Err(Failure(s, m))) => (s, m),
        Err(_) => (SlahStatus::Panic, "internal panic".to_string()),
    };
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
    status
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure(SlahStatus::NullPointer, format!("{name} is null")));
    }
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn slah_last_error(buf: *mut c_char, len: usize) -> usize {
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

/// Creates a simulator from a TOML experiment configuration. A null
/// `config_toml` selects the defaults.
///
/// # Safety
/// `config_toml` must be null or a NUL-terminated string; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn slah_simulator_new(config_toml: *const c_char, out: *mut *mut SlahSimulator) -> SlahStatus {
    guard(|| {
        non_null(out, "out")?;
        let cfg = parse_config(config_toml)?;
        let sim = cfg.simulator()?;
        *out = Box::into_raw(Box::new(SlahSimulator { inner: sim }));
        Ok(())
    })
}

unsafe fn parse_config(text: *const c_char) -> Result<ExperimentConfig, Failure> {
    if text.is_null() {
        return Ok(ExperimentConfig::default());
    }
    let s = CStr::from_ptr(text).to_str().map_err(|_| Failure::arg("config is not UTF-8"))?;
    Ok(ExperimentConfig::from_toml(s)?)
}

/// # Safety
/// `sim` must be null or a handle from [`slah_simulator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slah_simulator_free(sim: *mut SlahSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Number of eNBs, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn slah_simulator_num_enbs(sim: *const SlahSimulator) -> usize {
    sim.as_ref().map_or(0, |s| s.inner.layout().len())
}

/// Runs one episode with per-eNB `alphas` (length `n`, the eNB count) and
/// writes per-eNB BCR (percent) and FTT (seconds) into `bcr` and `ftt`,
/// each of length `n`.
///
/// # Safety
/// `sim` must be a live handle; array pointers must be valid for `n` elements.
#[no_mangle]
pub unsafe extern "C" fn slah_simulator_run_episode(
    sim: *const SlahSimulator,
    alphas: *const f64,
    n: usize,
    duration: u64,
    warmup: u64,
    seed: u64,
    bcr: *mut f64,
    ftt: *mut f64,
) -> SlahStatus {
    guard(|| {
        non_null(sim, "sim")?;
        let sim = &(*sim).inner;
        check_len(n, sim.layout().len())?;
        let alphas = slice(alphas, n, "alphas")?;
        let bcr = slice_mut(bcr, n, "bcr")?;
        let ftt = slice_mut(ftt, n, "ftt")?;
        let out = sim.run_episode(alphas, EpisodeWindow { duration, warmup }, seed)?;
        for (k, e) in out.report.enbs.iter().enumerate() {
            bcr[k] = e.bcr.unwrap_or(f64::NAN);
            ftt[k] = e.ftt.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Runs one episode and writes the row-major `n x n` interference matrix
/// into `matrix`.
///
/// # Safety
/// `sim` must be a live handle; `alphas` valid for `n` and `matrix` for
/// `n * n` elements.
#[no_mangle]
pub unsafe extern "C" fn slah_simulator_interference_matrix(
    sim: *const SlahSimulator,
    alphas: *const f64,
    n: usize,
    duration: u64,
    warmup: u64,
    seed: u64,
    matrix: *mut f64,
) -> SlahStatus {
    guard(|| {
        non_null(sim, "sim")?;
        let sim = &(*sim).inner;
        check_len(n, sim.layout().len())?;
        let alphas = slice(alphas, n, "alphas")?;
        let dst = slice_mut(matrix, n * n, "matrix")?;
        let m = sim.run_episode(alphas, EpisodeWindow { duration, warmup }, seed)?.matrix;
        for c in 0..n {
            for j in 0..n {
                dst[c * n + j] = m.get(c, j);
            }
        }
        Ok(())
    })
}

fn check_len(n: usize, expected: usize) -> Result<(), Failure> {
    if n != expected {
        return Err(Failure::arg(format!("expected {expected} eNBs, got {n}")));
    }
    Ok(())
}

/// Fits a logistic model to `n` samples `(xs[i], ys[i])`. `refine_bounds`
/// of zero keeps the fixed 10% margin bounds.
///
/// # Safety
/// `xs` and `ys` must be valid for `n` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn slah_fit(
    xs: *const f64,
    ys: *const f64,
    n: usize,
    refine_bounds: i32,
    out: *mut *mut SlahModel,
) -> SlahStatus {
    guard(|| {
        non_null(out, "out")?;
        let xs = slice(xs, n, "xs")?;
        let ys = slice(ys, n, "ys")?;
        let samples: Vec<Sample> = xs.iter().zip(ys).map(|(&x, &y)| Sample::new(x, y)).collect();
        let opts = FitOptions { refine_bounds: refine_bounds != 0, ..FitOptions::default() };
        let model = fit_with(&samples, &opts)?;
        *out = Box::into_raw(Box::new(SlahModel { inner: model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`slah_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slah_model_free(model: *mut SlahModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Model prediction at `x`; NaN for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn slah_model_predict(model: *const SlahModel, x: f64) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.inner.predict(x))
}

/// Writes the model parameters. Any output pointer may be null.
///
/// # Safety
/// `model` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn slah_model_params(
    model: *const SlahModel,
    beta0: *mut f64,
    beta1: *mut f64,
    y_lo: *mut f64,
    y_hi: *mut f64,
) -> SlahStatus {
    guard(|| {
        non_null(model, "model")?;
        let m = &(*model).inner;
        for (p, v) in [(beta0, m.beta0), (beta1, m.beta1), (y_lo, m.y_lo), (y_hi, m.y_hi)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

fn row_of(values: &[f64]) -> CouplingRow {
    CouplingRow::new((0..values.len()).collect(), values.to_vec())
}

/// Cost weights `I_j / sum(I)` of an interference row of length `n`.
///
/// # Safety
/// `interference` and `out` must be valid for `n` elements.
#[no_mangle]
pub unsafe extern "C" fn slah_weights(interference: *const f64, n: usize, out: *mut f64) -> SlahStatus {
    guard(|| {
        let w = weights(&row_of(slice(interference, n, "interference")?))?;
        slice_mut(out, n, "out")?.copy_from_slice(&w);
        Ok(())
    })
}

/// Neighbour alphas implied by `alpha_s` on the neighbour at index `s` of
/// the interference row.
///
/// # Safety
/// `interference` and `out` must be valid for `n` elements.
#[no_mangle]
pub unsafe extern "C" fn slah_propagate_alpha(
    alpha_s: f64,
    interference: *const f64,
    n: usize,
    s: usize,
    out: *mut f64,
) -> SlahStatus {
    guard(|| {
        let a = propagate_alpha(alpha_s, &row_of(slice(interference, n, "interference")?), s)?;
        slice_mut(out, n, "out")?.copy_from_slice(&a);
        Ok(())
    })
}

/// Runs the healing loop against the synthetic oracle described by the
/// `[oracle]` and `[slah]` sections of `config_toml` (null for defaults).
/// Writes the converged alpha, the true grid optimum and the number of
/// iterations.
///
/// # Safety
/// `config_toml` must be null or NUL-terminated; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn slah_oracle_heal(
    config_toml: *const c_char,
    seed: u64,
    alpha_s: *mut f64,
    optimum: *mut f64,
    iterations: *mut usize,
) -> SlahStatus {
    guard(|| {
        let cfg = parse_config(config_toml)?;
        let run = run_oracle(&cfg.oracle, &cfg.slah, seed)?;
        if !alpha_s.is_null() {
            *alpha_s = run.state.current_alpha_s;
        }
        if !optimum.is_null() {
            *optimum = run.optimum.alpha_s;
        }
        if !iterations.is_null() {
            *iterations = run.state.iteration;
        }
        Ok(())
    })
}
