//! C ABI over the asymde library.
//!
//! Degree distributions are passed as opaque `AsymdeCode` handles created by
//! `asymde_code_parse` or `asymde_code_preset` and released with
//! `asymde_code_free`. Every fallible call returns an `AsymdeStatus`; on
//! failure `asymde_last_error` describes the most recent error on the calling
//! thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use asymde::bpsim::{run_sim, SimConfig, SimError};
use asymde::channels::{ChannelFamily, ChannelModel};
use asymde::de::{evolve, threshold_search_mode, DeError, DeMode, DeOptions};
use asymde::density::GridSpec;
use asymde::ensemble::DegreeDistribution;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AsymdeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    /// No threshold bracket, encoder failure or similar.
    Numerical = 4,
    Panic = 5,
}

/// Opaque degree-distribution handle.
pub struct AsymdeCode {
    inner: DegreeDistribution,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AsymdeSimResult {
    pub ber: f64,
    pub bler: f64,
    pub bit_errors: u64,
    pub tied_bits: u64,
    pub block_errors: u64,
    pub bits_total: u64,
    pub ber_given_0: f64,
    pub ber_given_1: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(AsymdeStatus, String);

impl From<DeError> for Failure {
    fn from(e: DeError) -> Self {
        let status = match e {
            DeError::NoIterations => AsymdeStatus::InvalidArgument,
            _ => AsymdeStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let status = match e {
            SimError::EncoderFailure => AsymdeStatus::Numerical,
            _ => AsymdeStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AsymdeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AsymdeStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AsymdeStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(AsymdeStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(AsymdeStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn code_arg<'a>(p: *const AsymdeCode) -> Result<&'a DegreeDistribution, Failure> {
    p.as_ref().map(|c| &c.inner).ok_or_else(|| null("code"))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn grid(bins: u32, llr_max: f64) -> Result<GridSpec, Failure> {
    GridSpec::new(bins as usize, -llr_max, llr_max)
        .map_err(|e| Failure(AsymdeStatus::InvalidArgument, e.to_string()))
}

fn mode(coset: i32) -> DeMode {
    if coset != 0 {
        DeMode::Coset
    } else {
        DeMode::Linear
    }
}

/// Message of the last failed call on this thread; valid until the next call.
#[no_mangle]
pub extern "C" fn asymde_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn asymde_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a degree file (`lambda <k> <f>` / `rho <k> <f>` lines).
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asymde_code_parse(
    text: *const c_char,
    out: *mut *mut AsymdeCode,
) -> AsymdeStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let inner = DegreeDistribution::parse(text)
            .map_err(|e| Failure(AsymdeStatus::Parse, e.to_string()))?;
        write(out, Box::into_raw(Box::new(AsymdeCode { inner })), "out")
    })
}

/// Named ensemble: `"3,6"`-style regular codes or `"12A"`, `"12B"`, `"12C"`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asymde_code_preset(
    name: *const c_char,
    out: *mut *mut AsymdeCode,
) -> AsymdeStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let inner = DegreeDistribution::preset(name)
            .map_err(|e| Failure(AsymdeStatus::Parse, e.to_string()))?;
        write(out, Box::into_raw(Box::new(AsymdeCode { inner })), "out")
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `code` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn asymde_code_free(code: *mut AsymdeCode) {
    if !code.is_null() {
        drop(Box::from_raw(code));
    }
}

/// Design rate `1 - ∫rho / ∫lambda`.
///
/// # Safety
/// `code` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asymde_code_design_rate(
    code: *const AsymdeCode,
    out: *mut f64,
) -> AsymdeStatus {
    guard(|| write(out, code_arg(code)?.derived_scalars().design_rate, "out"))
}

/// `1 / (lambda2 rho'(1))`; infinity when there are no degree-2 variables.
///
/// # Safety
/// `code` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asymde_code_stability_bound(
    code: *const AsymdeCode,
    out: *mut f64,
) -> AsymdeStatus {
    guard(|| write(out, code_arg(code)?.derived_scalars().stability_bound(), "out"))
}

/// Bhattacharyya parameter of a channel spec such as `"z:eps1=0.23"`.
///
/// # Safety
/// `channel` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asymde_channel_bhattacharyya(
    channel: *const c_char,
    out: *mut f64,
) -> AsymdeStatus {
    guard(|| {
        let ch = ChannelModel::parse(str_arg(channel, "channel")?)
            .map_err(|e| Failure(AsymdeStatus::Parse, e.to_string()))?;
        write(out, ch.bhattacharyya(), "out")
    })
}

/// Runs density evolution on a `bins`-bin grid over `[-llr_max, llr_max]`
/// and reports the final error probability, `<CBP>` and whether the
/// stability region was reached. `coset != 0` selects the coset ensemble.
///
/// # Safety
/// Pointers must be valid; `channel` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn asymde_run_de(
    code: *const AsymdeCode,
    channel: *const c_char,
    bins: u32,
    llr_max: f64,
    max_iter: u32,
    coset: i32,
    out_pe: *mut f64,
    out_cbp: *mut f64,
    out_converged: *mut i32,
) -> AsymdeStatus {
    guard(|| {
        let d = code_arg(code)?;
        let ch = ChannelModel::parse(str_arg(channel, "channel")?)
            .map_err(|e| Failure(AsymdeStatus::Parse, e.to_string()))?;
        if out_pe.is_null() || out_cbp.is_null() || out_converged.is_null() {
            return Err(null("output"));
        }
        let init = ch.initial_density_pair(grid(bins, llr_max)?);
        let trace = evolve(&init, d, DeOptions::new(max_iter as usize).mode(mode(coset)), |_| {})?;
        write(out_pe, trace.last().p_e, "out_pe")?;
        write(out_cbp, trace.last().cbp, "out_cbp")?;
        write(out_converged, trace.converged() as i32, "out_converged")
    })
}

/// Decoding threshold over a family (`"bec"`, `"bsc"`, `"z"`, `"biawgnc"`,
/// `"cbiawgnc"`) by bisection to `precision`.
///
/// # Safety
/// Pointers must be valid; `family` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn asymde_threshold(
    code: *const AsymdeCode,
    family: *const c_char,
    bins: u32,
    llr_max: f64,
    max_iter: u32,
    precision: f64,
    coset: i32,
    out: *mut f64,
) -> AsymdeStatus {
    guard(|| {
        let d = code_arg(code)?;
        let fam = ChannelFamily::parse(str_arg(family, "family")?)
            .map_err(|e| Failure(AsymdeStatus::Parse, e.to_string()))?;
        if !(precision > 0.0) {
            return Err(Failure(AsymdeStatus::InvalidArgument, "precision must be positive".into()));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let r = threshold_search_mode(&fam, d, grid(bins, llr_max)?, max_iter as usize, precision, mode(coset))?;
        write(out, r.threshold, "out")
    })
}

/// Monte Carlo BP simulation on one sampled length-`n` graph.
///
/// # Safety
/// Pointers must be valid; `channel` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn asymde_simulate(
    code: *const AsymdeCode,
    n: u64,
    channel: *const c_char,
    codewords: u64,
    bp_iters: u32,
    seed: u64,
    out: *mut AsymdeSimResult,
) -> AsymdeStatus {
    guard(|| {
        let d = code_arg(code)?.clone();
        let ch = ChannelModel::parse(str_arg(channel, "channel")?)
            .map_err(|e| Failure(AsymdeStatus::Parse, e.to_string()))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = SimConfig {
            bp_iters: bp_iters as usize,
            num_codewords: codewords as usize,
            master_seed: seed,
            ..SimConfig::new(d, n as usize, ch)
        };
        let r = run_sim(&cfg)?;
        write(
            out,
            AsymdeSimResult {
                ber: r.ber,
                bler: r.bler,
                bit_errors: r.bit_errors,
                tied_bits: r.tied_bits,
                block_errors: r.block_errors,
                bits_total: r.bits_total,
                ber_given_0: r.ber_given_bit[0],
                ber_given_1: r.ber_given_bit[1],
            },
            "out",
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_message_round_trip() {
        set_error("bad\0thing");
        let s = unsafe { CStr::from_ptr(asymde_last_error()) };
        assert_eq!(s.to_str().unwrap(), "bad thing");
    }

    #[test]
    fn panics_are_contained() {
        assert_eq!(guard(|| panic!("boom")), AsymdeStatus::Panic);
    }
}
