//! C ABI over `chimera_tts`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_generate`
//! style constructors and released with the matching `*_free`. Every fallible
//! function returns a [`CtStatus`]; on failure the message is kept in a
//! thread-local buffer readable through [`ct_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::io::Cursor;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chimera_tts::annealers::{Annealer, AnnealerConfig, MfaSchedule, SaSchedule, SqaSchedule};
use chimera_tts::error::Error;
use chimera_tts::evt::{fit_gpd_mle_with, Distribution, FitOptions, GpdParams};
use chimera_tts::exact::{dp_ground_with, DpOptions};
use chimera_tts::harness::{estimate_tau, TtsOptions};
use chimera_tts::instances::{generate_instance, ChimeraGraph, CouplingInstance};
use chimera_tts::rng;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Parse = 3,
    SizeLimit = 4,
    ResourceLimit = 5,
    InsufficientData = 6,
    NonConvergence = 7,
    Io = 8,
    Internal = 9,
}

/// Annealing algorithm selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtAlgorithm {
    Sa = 0,
    Sqa = 1,
    Mfa = 2,
}

/// Opaque coupling instance.
pub struct CtInstance(CouplingInstance);

/// Parameters of a single annealing schedule.
///
/// `beta` is ignored for SA, `slices` only read for SQA and `table_size`
/// only for MFA. A zero `slices` or `table_size` selects the default.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CtSchedule {
    pub algorithm: CtAlgorithm,
    pub t_a: u64,
    pub beta: f64,
    pub slices: usize,
    pub table_size: usize,
}

/// Time-to-solution estimate for one instance.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CtTtsRecord {
    pub s: f64,
    pub tau: f64,
    pub repetitions: u64,
    pub successes: f64,
    pub is_upper_bound: bool,
}

/// Maximum likelihood GPD fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CtGpdFit {
    pub xi: f64,
    pub sigma: f64,
    pub u: f64,
    pub k: usize,
    pub xi_se: f64,
    pub sigma_se: f64,
    pub cov_xi_sigma: f64,
    pub log_likelihood: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CtStatus {
    match err {
        Error::InvalidParameter(_) | Error::Config(_) | Error::InvalidReparametrization(_) | Error::UnboundedQuantile(_) => {
            CtStatus::InvalidParameter
        }
        Error::Parse { .. } | Error::Json(_) => CtStatus::Parse,
        Error::SizeLimit(_) => CtStatus::SizeLimit,
        Error::ResourceLimit(_) => CtStatus::ResourceLimit,
        Error::NoExceedances { .. } | Error::InsufficientExceedances { .. } | Error::DegenerateSample(_) => {
            CtStatus::InsufficientData
        }
        Error::NonConvergence { .. } => CtStatus::NonConvergence,
        Error::Io { .. } => CtStatus::Io,
        Error::Stage { source, .. } => status_of(source),
        _ => CtStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard<F: FnOnce() -> Result<(), (CtStatus, String)>>(f: F) -> CtStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CtStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside chimera_tts".into());
            CtStatus::Internal
        }
    }
}

fn lift<T>(r: chimera_tts::error::Result<T>) -> Result<T, (CtStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (CtStatus, String) {
    (CtStatus::NullPointer, format!("{what} is null"))
}

unsafe fn instance_ref<'a>(h: *const CtInstance) -> Result<&'a CouplingInstance, (CtStatus, String)> {
    h.as_ref().map(|i| &i.0).ok_or_else(|| null("instance"))
}

fn to_config(s: &CtSchedule) -> Result<AnnealerConfig, (CtStatus, String)> {
    let cfg = match s.algorithm {
        CtAlgorithm::Sa => AnnealerConfig::Sa(SaSchedule::new(s.t_a)),
        CtAlgorithm::Sqa => {
            let mut q = SqaSchedule::new(s.t_a, s.beta);
            if s.slices != 0 {
                q.slices = s.slices;
            }
            AnnealerConfig::Sqa(q)
        }
        CtAlgorithm::Mfa => {
            let mut m = MfaSchedule::new(s.t_a, s.beta);
            if s.table_size != 0 {
                m.table_size = s.table_size;
            }
            AnnealerConfig::Mfa(m)
        }
    };
    lift(cfg.validate())?;
    Ok(cfg)
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ct_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ct_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Draws a random ±1 instance on the `l x l` Chimera graph.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ct_instance_generate(l: usize, seed: u64, id: u64, out: *mut *mut CtInstance) -> CtStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let graph = lift(ChimeraGraph::new(l))?;
        *out = Box::into_raw(Box::new(CtInstance(generate_instance(&graph, seed, id))));
        Ok(())
    })
}

/// Parses an instance from its text form.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ct_instance_parse(text: *const c_char, id: u64, out: *mut *mut CtInstance) -> CtStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if text.is_null() {
            return Err(null("text"));
        }
        let bytes = CStr::from_ptr(text).to_bytes();
        let inst = lift(CouplingInstance::read(Cursor::new(bytes), id, "<ffi>"))?;
        *out = Box::into_raw(Box::new(CtInstance(inst)));
        Ok(())
    })
}

/// Releases an instance; null is ignored.
///
/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ct_instance_free(h: *mut CtInstance) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of spins, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ct_instance_num_spins(h: *const CtInstance) -> usize {
    h.as_ref().map_or(0, |i| i.0.num_spins())
}

/// Text form of the instance as a newly allocated string; release it with
/// [`ct_string_free`].
///
/// # Safety
/// `h` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ct_instance_to_text(h: *const CtInstance, out: *mut *mut c_char) -> CtStatus {
    guard(|| {
        let inst = instance_ref(h)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let c = CString::new(inst.to_text()).map_err(|e| (CtStatus::Internal, e.to_string()))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ct_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Energy of `spins[0..n]`, each entry ±1.
///
/// # Safety
/// `spins` must point to `n` readable bytes and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn ct_instance_energy(h: *const CtInstance, spins: *const i8, n: usize, out: *mut i64) -> CtStatus {
    guard(|| {
        let inst = instance_ref(h)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if spins.is_null() {
            return Err(null("spins"));
        }
        let cfg = lift(chimera_tts::instances::SpinConfig::new(std::slice::from_raw_parts(spins, n).to_vec()))?;
        *out = lift(inst.energy(&cfg))?;
        Ok(())
    })
}

/// Exact ground-state energy. When `witness` is non-null it receives
/// `num_spins` entries of a ground configuration.
///
/// # Safety
/// `out` must be valid; `witness` null or writable for `num_spins` bytes.
#[no_mangle]
pub unsafe extern "C" fn ct_ground_energy(h: *const CtInstance, out: *mut i64, witness: *mut i8) -> CtStatus {
    guard(|| {
        let inst = instance_ref(h)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let opts = DpOptions { witness: !witness.is_null(), ..DpOptions::default() };
        let g = lift(dp_ground_with(inst, opts))?;
        *out = g.energy;
        if !witness.is_null() {
            let w = g.witness.ok_or((CtStatus::Internal, "no witness available".to_string()))?;
            ptr::copy_nonoverlapping(w.as_slice().as_ptr(), witness, w.len());
        }
        Ok(())
    })
}

/// One annealing repetition on the stream `(seed, instance id, repetition)`;
/// writes the fraction of the readout that reached `e0`.
///
/// # Safety
/// `h` must be live and `schedule`, `success_fraction` and `final_energy`
/// valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ct_anneal(
    h: *const CtInstance,
    schedule: *const CtSchedule,
    e0: i64,
    seed: u64,
    repetition: u64,
    success_fraction: *mut f64,
    final_energy: *mut i64,
) -> CtStatus {
    guard(|| {
        let inst = instance_ref(h)?;
        let cfg = to_config(schedule.as_ref().ok_or_else(|| null("schedule"))?)?;
        let frac = success_fraction.as_mut().ok_or_else(|| null("success_fraction"))?;
        let energy = final_energy.as_mut().ok_or_else(|| null("final_energy"))?;
        let mut r = rng::stream(seed, rng::Stage::Anneal, inst.id(), repetition);
        let outcome = cfg.run(inst, e0, &mut r);
        *frac = outcome.success_fraction;
        *energy = outcome.final_energy;
        Ok(())
    })
}

/// Repeats the schedule until `target_successes` or `cap` repetitions.
///
/// # Safety
/// `h` must be live and `schedule` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ct_estimate_tau(
    h: *const CtInstance,
    schedule: *const CtSchedule,
    e0: i64,
    target_successes: f64,
    cap: u64,
    seed: u64,
    out: *mut CtTtsRecord,
) -> CtStatus {
    guard(|| {
        let inst = instance_ref(h)?;
        let cfg = to_config(schedule.as_ref().ok_or_else(|| null("schedule"))?)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let opts = TtsOptions { target_successes, cap };
        let rec = lift(estimate_tau(inst, &cfg, e0, &opts, seed))?;
        *out = CtTtsRecord {
            s: rec.s,
            tau: rec.tau,
            repetitions: rec.repetitions,
            successes: rec.successes,
            is_upper_bound: rec.is_upper_bound,
        };
        Ok(())
    })
}

/// Maximum likelihood GPD fit to the values of `sample[0..n]` above `u`.
///
/// # Safety
/// `sample` must point to `n` readable doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn ct_fit_gpd(sample: *const f64, n: usize, u: f64, min_exceedances: usize, out: *mut CtGpdFit) -> CtStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if sample.is_null() && n > 0 {
            return Err(null("sample"));
        }
        let data = if n == 0 { &[][..] } else { std::slice::from_raw_parts(sample, n) };
        let opts = FitOptions { min_exceedances, ..FitOptions::default() };
        let fit = lift(fit_gpd_mle_with(data, u, &opts))?;
        *out = CtGpdFit {
            xi: fit.xi(),
            sigma: fit.sigma(),
            u: fit.u(),
            k: fit.k,
            xi_se: fit.xi_se,
            sigma_se: fit.sigma_se,
            cov_xi_sigma: fit.cov_xi_sigma,
            log_likelihood: fit.log_likelihood,
        };
        Ok(())
    })
}

/// GPD distribution function `W_{xi,u,sigma}(x)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ct_gpd_cdf(xi: f64, u: f64, sigma: f64, x: f64, out: *mut f64) -> CtStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = lift(GpdParams::new(xi, u, sigma))?.cdf(x);
        Ok(())
    })
}

/// GPD quantile function.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ct_gpd_quantile(xi: f64, u: f64, sigma: f64, p: f64, out: *mut f64) -> CtStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = lift(lift(GpdParams::new(xi, u, sigma))?.quantile(p))?;
        Ok(())
    })
}
