//! C ABI over the simulation library.
//!
//! Objects cross the boundary as opaque handles created by constructors
//! such as `cb_channel_from_unitary` and released with the matching
//! `*_free`. Every call returns
//! a [`CbStatus`]; on failure `cb_last_error_message` describes the cause.
//! Complex matrices are passed as row-major interleaved `re, im` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use choi_bench::choi::ChoiMatrix;
use choi_bench::haar::SamplerSpec;
use choi_bench::pauli::Subset;
use choi_bench::rng::RngStream;
use choi_bench::tensor::{c, CMatrix, DenseOperator};
use choi_bench::tomography::{error_decompose, Preparation, TomoResult};
use choi_bench::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CbStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad argument, unsupported request or dimension limit.
    InvalidArgument = 2,
    /// Input that is not a valid state or channel.
    InvalidInput = 3,
    Numerical = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
    BufferTooSmall = 6,
}

/// Channel stored as its Choi matrix.
pub struct CbChannel {
    inner: ChoiMatrix,
}

/// Outcome of a tomography error decomposition.
pub struct CbTomoResult {
    inner: TomoResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> CbStatus {
    match e.exit_code() {
        2 => CbStatus::InvalidArgument,
        3 => CbStatus::InvalidInput,
        _ => CbStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), CbStatus>) -> CbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CbStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            CbStatus::Panic
        }
    }
}

fn lift<T>(r: choi_bench::Result<T>) -> Result<T, CbStatus> {
    r.map_err(|e| {
        set_error(&e.to_string());
        status_of(&e)
    })
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), CbStatus> {
    if p.is_null() {
        set_error(&format!("{what} is null"));
        return Err(CbStatus::NullPointer);
    }
    Ok(())
}

/// # Safety
/// `data` must point to `2 * dim * dim` readable doubles.
unsafe fn read_matrix(data: *const f64, dim: usize) -> Result<CMatrix, CbStatus> {
    non_null(data, "matrix data")?;
    let len = dim.checked_mul(dim).and_then(|n| n.checked_mul(2)).ok_or_else(|| {
        set_error("dimension overflows");
        CbStatus::InvalidArgument
    })?;
    let raw = std::slice::from_raw_parts(data, len);
    Ok(CMatrix::from_fn(dim, dim, |r, col| {
        let k = 2 * (r * dim + col);
        c(raw[k], raw[k + 1])
    }))
}

fn into_handle<T>(value: T, out: *mut *mut T) {
    // SAFETY: callers check `out` before building `value`.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Channel `ρ ↦ U ρ U†` for a `dim x dim` unitary, `dim` a power of two.
///
/// # Safety
/// `data` must point to `2 * dim * dim` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_channel_from_unitary(data: *const f64, dim: usize, out: *mut *mut CbChannel) -> CbStatus {
    guard(|| {
        non_null(out, "out")?;
        let u = lift(DenseOperator::qubits(read_matrix(data, dim)?))?;
        let inner = lift(ChoiMatrix::from_unitary(&u))?;
        into_handle(CbChannel { inner }, out);
        Ok(())
    })
}

/// Channel from `count` consecutive `dim x dim` Kraus operators.
///
/// # Safety
/// `data` must point to `2 * count * dim * dim` doubles and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cb_channel_from_kraus(
    data: *const f64,
    dim: usize,
    count: usize,
    out: *mut *mut CbChannel,
) -> CbStatus {
    guard(|| {
        non_null(out, "out")?;
        if count == 0 {
            set_error("at least one Kraus operator is required");
            return Err(CbStatus::InvalidArgument);
        }
        let stride = 2 * dim * dim;
        let kraus = (0..count)
            .map(|k| lift(DenseOperator::qubits(read_matrix(data.add(k * stride), dim)?)))
            .collect::<Result<Vec<_>, _>>()?;
        let inner = lift(ChoiMatrix::from_kraus(&kraus))?;
        into_handle(CbChannel { inner }, out);
        Ok(())
    })
}

/// # Safety
/// `channel` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cb_channel_free(channel: *mut CbChannel) {
    if !channel.is_null() {
        drop(Box::from_raw(channel));
    }
}

/// # Safety
/// `channel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cb_channel_num_qubits(channel: *const CbChannel, out: *mut usize) -> CbStatus {
    guard(|| {
        non_null(channel, "channel")?;
        non_null(out, "out")?;
        *out = (*channel).inner.n();
        Ok(())
    })
}

/// Reduced channel on the qubits set in `mask` (bit `q` is qubit `q`), with
/// the rest starting maximally mixed.
///
/// # Safety
/// `channel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cb_channel_reduce(channel: *const CbChannel, mask: u32, out: *mut *mut CbChannel) -> CbStatus {
    guard(|| {
        non_null(channel, "channel")?;
        non_null(out, "out")?;
        let inner = lift((*channel).inner.reduce(Subset(mask)))?;
        into_handle(CbChannel { inner }, out);
        Ok(())
    })
}

/// Largest deviation of either Choi marginal from the identity; zero for a
/// unital trace-preserving channel.
///
/// # Safety
/// `channel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cb_channel_stochasticity_deviation(channel: *const CbChannel, out: *mut f64) -> CbStatus {
    guard(|| {
        non_null(channel, "channel")?;
        non_null(out, "out")?;
        *out = (*channel).inner.stochasticity_deviation();
        Ok(())
    })
}

/// Copy the measurement-form Choi matrix into `buf` as interleaved doubles.
/// `*len` holds the buffer length on entry and the required length on exit.
///
/// # Safety
/// `channel` must be a live handle, `len` readable and writable, and `buf`
/// must hold `*len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cb_channel_choi(channel: *const CbChannel, buf: *mut f64, len: *mut usize) -> CbStatus {
    guard(|| {
        non_null(channel, "channel")?;
        non_null(len, "len")?;
        let m = (*channel).inner.to_measurement();
        let mat = m.matrix().matrix();
        let d = mat.nrows();
        let need = 2 * d * d;
        let have = *len;
        *len = need;
        if have < need {
            set_error(&format!("buffer holds {have} doubles, {need} needed"));
            return Err(CbStatus::BufferTooSmall);
        }
        non_null(buf, "buf")?;
        let out = std::slice::from_raw_parts_mut(buf, need);
        for r in 0..d {
            for col in 0..d {
                let k = 2 * (r * d + col);
                out[k] = mat[(r, col)].re;
                out[k + 1] = mat[(r, col)].im;
            }
        }
        Ok(())
    })
}

/// Simulated reduced tomography of `channel` on the qubits in `mask`. The
/// complement is prepared from Haar groups of `prep_ell` qubits, or exactly
/// mixed when `prep_ell` is zero.
///
/// # Safety
/// `channel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cb_tomography_run(
    channel: *const CbChannel,
    mask: u32,
    prep_ell: usize,
    nu: usize,
    trials: usize,
    seed: u64,
    out: *mut *mut CbTomoResult,
) -> CbStatus {
    guard(|| {
        non_null(channel, "channel")?;
        non_null(out, "out")?;
        let phi = &(*channel).inner;
        let s = Subset(mask);
        if s.is_empty() || s.len() > phi.n() {
            set_error("subset mask is empty or too large");
            return Err(CbStatus::InvalidArgument);
        }
        let prep = if prep_ell == 0 {
            Preparation::Uniform
        } else {
            Preparation::Sampled(lift(SamplerSpec::haar_lbit(phi.n() - s.len(), prep_ell))?)
        };
        let inner = lift(error_decompose(phi, s, &prep, nu, trials, RngStream::new(seed, 0)))?;
        into_handle(CbTomoResult { inner }, out);
        Ok(())
    })
}

/// Mean squared errors `[prep, meas, total]` and their standard errors
/// `[se_prep, se_meas, se_total]`.
///
/// # Safety
/// `result` must be a live handle; `means` and `stderrs` must each hold
/// three doubles, or be null to skip.
#[no_mangle]
pub unsafe extern "C" fn cb_tomo_result_errors(
    result: *const CbTomoResult,
    means: *mut f64,
    stderrs: *mut f64,
) -> CbStatus {
    guard(|| {
        non_null(result, "result")?;
        let r = &(*result).inner;
        let vals = [r.delta_prep_sq, r.delta_meas_sq, r.delta_total_sq];
        for (k, e) in vals.iter().enumerate() {
            if !means.is_null() {
                *means.add(k) = e.mean;
            }
            if !stderrs.is_null() {
                *stderrs.add(k) = e.stderr;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cb_tomo_result_free(result: *mut CbTomoResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Uhlmann fidelity `(Tr|√ρ1 √ρ2|)²` of two `dim x dim` density matrices.
///
/// # Safety
/// `rho1` and `rho2` must each point to `2 * dim * dim` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_uhlmann_fidelity(rho1: *const f64, rho2: *const f64, dim: usize, out: *mut f64) -> CbStatus {
    guard(|| {
        non_null(out, "out")?;
        let a = lift(DenseOperator::qubits(read_matrix(rho1, dim)?))?;
        let b = lift(DenseOperator::qubits(read_matrix(rho2, dim)?))?;
        *out = lift(choi_bench::fidelity::uhlmann(&a, &b))?;
        Ok(())
    })
}
