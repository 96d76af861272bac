//! C ABI for cubemu.
//!
//! Fallible calls return a [`CubemuStatus`]. On failure a description is
//! kept per thread and read back with [`cubemu_last_error`]. Matrices and
//! hardware models are opaque handles owned by the caller and released with
//! their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cubemu::errmodel;
use cubemu::gemm::{self, CubeOrder, SampleSpec};
use cubemu::pipesim::{self, Mode, SimOptions};
use cubemu::planner::{self, BlockPlan, HardwareModel};
use cubemu::sgcm::{self, AnyMatrix};
use cubemu::split;
use cubemu::{Error, Half, Matrix};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubemuStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Overflow = 4,
    Dimension = 5,
    Plan = 6,
    NoFeasiblePlan = 7,
    Degenerate = 8,
    Format = 9,
    Config = 10,
    Io = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubemuMethod {
    Hgemm = 0,
    CubeElementwise = 1,
    CubeTermwise = 2,
    F32Reference = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubemuOrder {
    Elementwise = 0,
    Termwise = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubemuMode {
    Single = 0,
    Double = 1,
}

/// Row-major binary32 matrix.
pub struct CubemuMatrix {
    inner: Matrix<f32>,
}

pub struct CubemuHardware {
    inner: HardwareModel,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubemuBlockPlan {
    pub b_m: usize,
    pub b_k: usize,
    pub b_n: usize,
    pub n_fused: usize,
    pub f: f64,
}

/// Main-memory traffic in elements.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubemuTraffic {
    pub a_read: u64,
    pub b_read: u64,
    pub c_readwrite: u64,
    pub total: u64,
    pub total_model: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubemuPipeline {
    pub total_time: f64,
    pub cube_busy: f64,
    pub utilization: f64,
    pub effective_flops: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CubemuStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::Domain(_) => CubemuStatus::Domain,
            Error::Overflow(_) => CubemuStatus::Overflow,
            Error::Dimension(_) => CubemuStatus::Dimension,
            Error::Plan(_) => CubemuStatus::Plan,
            Error::NoFeasiblePlan { .. } => CubemuStatus::NoFeasiblePlan,
            Error::Degenerate => CubemuStatus::Degenerate,
            Error::Format { .. } => CubemuStatus::Format,
            Error::Config(_) => CubemuStatus::Config,
            Error::Io(_) => CubemuStatus::Io,
            Error::AtElement { .. } => unreachable!("root strips element wrappers"),
        };
        Failure(status, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn set_last_error(msg: Option<String>) {
    let c = msg.map(|m| CString::new(m.replace('\0', " ")).expect("interior NULs removed"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Outcome) -> CubemuStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(None);
            CubemuStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(Some(msg));
            status
        }
        Err(_) => {
            set_last_error(Some("internal panic".into()));
            CubemuStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CubemuStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(p: *mut T, v: T, what: &str) -> Outcome {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, need: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err(Failure(CubemuStatus::InvalidArgument, format!("{what} holds {len} elements, {need} needed")));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    let s = deref(p, "path")?;
    let s = CStr::from_ptr(s).to_str().map_err(|_| Failure(CubemuStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(Path::new(s))
}

unsafe fn give<T>(out: *mut *mut T, v: T) -> Outcome {
    write_out(out, Box::into_raw(Box::new(v)), "out")
}

fn plan_of(p: &CubemuBlockPlan) -> BlockPlan {
    BlockPlan { b_m: p.b_m, b_k: p.b_k, b_n: p.b_n, n_fused: p.n_fused, f: p.f }
}

fn plan_to_c(p: &BlockPlan) -> CubemuBlockPlan {
    CubemuBlockPlan { b_m: p.b_m, b_k: p.b_k, b_n: p.b_n, n_fused: p.n_fused, f: p.f }
}

fn traffic_to_c(t: &planner::TrafficReport) -> CubemuTraffic {
    CubemuTraffic {
        a_read: t.a_read,
        b_read: t.b_read,
        c_readwrite: t.c_readwrite,
        total: t.total,
        total_model: t.total_model,
    }
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn cubemu_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated name of a status code.
#[no_mangle]
pub extern "C" fn cubemu_status_name(status: CubemuStatus) -> *const c_char {
    let s: &'static CStr = match status {
        CubemuStatus::Ok => c"ok",
        CubemuStatus::NullPointer => c"null pointer",
        CubemuStatus::InvalidArgument => c"invalid argument",
        CubemuStatus::Domain => c"domain error",
        CubemuStatus::Overflow => c"overflow",
        CubemuStatus::Dimension => c"dimension mismatch",
        CubemuStatus::Plan => c"invalid plan",
        CubemuStatus::NoFeasiblePlan => c"no feasible plan",
        CubemuStatus::Degenerate => c"degenerate reference",
        CubemuStatus::Format => c"format error",
        CubemuStatus::Config => c"config error",
        CubemuStatus::Io => c"I/O error",
        CubemuStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// binary16 bits of `x` rounded to nearest even.
#[no_mangle]
pub extern "C" fn cubemu_half_from_f32(x: f32) -> u16 {
    Half::from_f32(x).to_bits()
}

#[no_mangle]
pub extern "C" fn cubemu_half_to_f32(bits: u16) -> f32 {
    Half::from_bits(bits).to_f32()
}

/// Splits `x` into binary16 bits `high` and `low_scaled` with
/// `x ~= high + low_scaled * 2^-sb`.
///
/// # Safety
/// `high` and `low` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_split_scalar(x: f32, sb: i32, high: *mut u16, low: *mut u16) -> CubemuStatus {
    guard(|| {
        let (p, _) = split::split_scalar(x, sb)?;
        write_out(high, p.high.to_bits(), "high")?;
        write_out(low, p.low_scaled.to_bits(), "low")
    })
}

/// Copies `rows * cols` row-major values from `data` (zeros when `data` is
/// null) into a new matrix.
///
/// # Safety
/// `data`, when not null, must point to `rows * cols` readable floats; `out`
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f32,
    out: *mut *mut CubemuMatrix,
) -> CubemuStatus {
    guard(|| {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(CubemuStatus::InvalidArgument, "matrix size overflows".into()))?;
        let values = if data.is_null() { vec![0f32; len] } else { std::slice::from_raw_parts(data, len).to_vec() };
        give(out, CubemuMatrix { inner: Matrix::from_vec(rows, cols, values)? })
    })
}

/// Uniform random matrix over `[-2^e, 2^e]` (`is_signed`) or `[0, 2^e]`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_matrix_generate(
    rows: usize,
    cols: usize,
    e_offset: i32,
    is_signed: bool,
    seed: u64,
    out: *mut *mut CubemuMatrix,
) -> CubemuStatus {
    guard(|| {
        let m = gemm::generate_matrix(rows, cols, SampleSpec::new(e_offset, is_signed, seed))?;
        give(out, CubemuMatrix { inner: m })
    })
}

/// Reads an SGCM file; any element type is converted to binary32.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_matrix_load(path: *const c_char, out: *mut *mut CubemuMatrix) -> CubemuStatus {
    guard(|| {
        let m = sgcm::load(path_arg(path)?)?.into_f32()?;
        give(out, CubemuMatrix { inner: m })
    })
}

/// Writes `m` as a binary32 SGCM file.
///
/// # Safety
/// `m` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cubemu_matrix_save(m: *const CubemuMatrix, path: *const c_char) -> CubemuStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        Ok(sgcm::save(path_arg(path)?, &AnyMatrix::F32(m.inner.clone()))?)
    })
}

/// Row count, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cubemu_matrix_rows(m: *const CubemuMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.rows())
}

/// Column count, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cubemu_matrix_cols(m: *const CubemuMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.cols())
}

/// Copies the row-major values into `dst`, which holds `len` floats.
///
/// # Safety
/// `m` must be a live handle; `dst` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_matrix_read(m: *const CubemuMatrix, dst: *mut f32, len: usize) -> CubemuStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        let src = m.inner.as_slice();
        out_slice(dst, len, src.len(), "dst")?.copy_from_slice(src);
        Ok(())
    })
}

/// Releases a matrix. Null is ignored.
///
/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cubemu_matrix_free(m: *mut CubemuMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Splits every element with the strict domain checks; `high` and `low`
/// receive binary16 bits, each holding `len` entries.
///
/// # Safety
/// `m` must be a live handle; `high` and `low` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_split_matrix(
    m: *const CubemuMatrix,
    sb: i32,
    high: *mut u16,
    low: *mut u16,
    len: usize,
) -> CubemuStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        let s = split::split_matrix(&m.inner, sb)?;
        let need = m.inner.as_slice().len();
        let hi = out_slice(high, len, need, "high")?;
        for (d, h) in hi.iter_mut().zip(s.high.as_slice()) {
            *d = h.to_bits();
        }
        let lo = out_slice(low, len, need, "low")?;
        for (d, h) in lo.iter_mut().zip(s.low_scaled.as_slice()) {
            *d = h.to_bits();
        }
        Ok(())
    })
}

/// `a * b` with the chosen method; `sb` applies to the cube methods.
///
/// # Safety
/// `a` and `b` must be live handles; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_gemm(
    method: CubemuMethod,
    sb: i32,
    a: *const CubemuMatrix,
    b: *const CubemuMatrix,
    out: *mut *mut CubemuMatrix,
) -> CubemuStatus {
    guard(|| {
        let (a, b) = (&deref(a, "a")?.inner, &deref(b, "b")?.inner);
        let c = match method {
            CubemuMethod::Hgemm => gemm::hgemm(a, b)?,
            CubemuMethod::CubeElementwise => gemm::sgemm_cube(a, b, sb, CubeOrder::Elementwise)?,
            CubemuMethod::CubeTermwise => gemm::sgemm_cube(a, b, sb, CubeOrder::Termwise)?,
            CubemuMethod::F32Reference => gemm::sgemm_f32_reference(a, b)?,
        };
        give(out, CubemuMatrix { inner: c })
    })
}

/// binary64 product of `a` and `b` written row-major into `dst`.
///
/// # Safety
/// `a` and `b` must be live handles; `dst` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_gemm_oracle(
    a: *const CubemuMatrix,
    b: *const CubemuMatrix,
    dst: *mut f64,
    len: usize,
) -> CubemuStatus {
    guard(|| {
        let c = gemm::dgemm_oracle(&deref(a, "a")?.inner, &deref(b, "b")?.inner)?;
        out_slice(dst, len, c.as_slice().len(), "dst")?.copy_from_slice(c.as_slice());
        Ok(())
    })
}

/// Split GEMM executed block by block under `plan`.
///
/// # Safety
/// `a` and `b` must be live handles; `plan` readable; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_gemm_blocked(
    a: *const CubemuMatrix,
    b: *const CubemuMatrix,
    sb: i32,
    plan: *const CubemuBlockPlan,
    order: CubemuOrder,
    out: *mut *mut CubemuMatrix,
) -> CubemuStatus {
    guard(|| {
        let order = match order {
            CubemuOrder::Elementwise => CubeOrder::Elementwise,
            CubemuOrder::Termwise => CubeOrder::Termwise,
        };
        let plan = plan_of(deref(plan, "plan")?);
        let c = gemm::sgemm_cube_blocked(&deref(a, "a")?.inner, &deref(b, "b")?.inner, sb, &plan, order)?;
        give(out, CubemuMatrix { inner: c })
    })
}

/// Relative Frobenius error of `c` against the binary64 product `a * b`.
///
/// # Safety
/// `a`, `b` and `c` must be live handles; `err` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_relative_error(
    a: *const CubemuMatrix,
    b: *const CubemuMatrix,
    c: *const CubemuMatrix,
    err: *mut f64,
) -> CubemuStatus {
    guard(|| {
        let oracle = gemm::dgemm_oracle(&deref(a, "a")?.inner, &deref(b, "b")?.inner)?;
        let c = deref(c, "c")?;
        if c.inner.shape() != oracle.shape() {
            return Err(Error::Dimension(format!("result is {:?}, product is {:?}", c.inner.shape(), oracle.shape())).into());
        }
        write_out(err, gemm::relative_error(&oracle, &c.inner)?, "err")
    })
}

/// Method tag, as used in CSV reports.
#[no_mangle]
pub extern "C" fn cubemu_method_name(method: CubemuMethod) -> *const c_char {
    let s: &'static CStr = match method {
        CubemuMethod::Hgemm => c"hgemm",
        CubemuMethod::CubeElementwise => c"cube_elementwise",
        CubemuMethod::CubeTermwise => c"cube_termwise",
        CubemuMethod::F32Reference => c"f32_reference",
    };
    s.as_ptr()
}

/// Probability that the unscaled low part underflows at offset exponent
/// `e_offset`; `include_gradual` also counts subnormal results.
#[no_mangle]
pub extern "C" fn cubemu_p_underflow(e_offset: i32, include_gradual: bool) -> f64 {
    errmodel::p_underflow(e_offset, include_gradual)
}

/// Worst-case mantissa bits kept by the split at `e_offset` and `sb`.
#[no_mangle]
pub extern "C" fn cubemu_precision_bits(e_offset: i32, sb: i32) -> u32 {
    errmodel::precision_bits(e_offset, sb)
}

/// Scaling exponent for data whose binary16 exponents span
/// `[e_min, e_max]`. `best_effort` is set when no value meets both bounds.
///
/// # Safety
/// `sb` and `best_effort` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_recommend_sb(e_min: i32, e_max: i32, sb: *mut i32, best_effort: *mut bool) -> CubemuStatus {
    guard(|| {
        let c = split::recommend_sb(e_min, e_max)?;
        write_out(sb, c.sb, "sb")?;
        write_out(best_effort, c.best_effort, "best_effort")
    })
}

/// Built-in hardware model.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_hardware_default(out: *mut *mut CubemuHardware) -> CubemuStatus {
    guard(|| give(out, CubemuHardware { inner: HardwareModel::default() }))
}

/// Hardware model from JSON; absent fields keep their defaults.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_hardware_from_json(json: *const c_char, out: *mut *mut CubemuHardware) -> CubemuStatus {
    guard(|| {
        let text = CStr::from_ptr(deref(json, "json")?)
            .to_str()
            .map_err(|_| Failure(CubemuStatus::InvalidArgument, "json is not UTF-8".into()))?;
        give(out, CubemuHardware { inner: HardwareModel::from_json(text)? })
    })
}

/// Releases a hardware model. Null is ignored.
///
/// # Safety
/// `hw` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cubemu_hardware_free(hw: *mut CubemuHardware) {
    if !hw.is_null() {
        drop(Box::from_raw(hw));
    }
}

/// Validated plan for a block shape. `n_fused == 0` derives it from the L1
/// capacity.
///
/// # Safety
/// `hw` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_plan_new(
    hw: *const CubemuHardware,
    b_m: usize,
    b_k: usize,
    b_n: usize,
    n_fused: usize,
    out: *mut CubemuBlockPlan,
) -> CubemuStatus {
    guard(|| {
        let hw = &deref(hw, "hw")?.inner;
        let plan = match n_fused {
            0 => BlockPlan::new(hw, b_m, b_k, b_n)?,
            nf => BlockPlan::with_n_fused(hw, b_m, b_k, b_n, nf)?,
        };
        write_out(out, plan_to_c(&plan), "out")
    })
}

/// Minimum-traffic plan for an `m x k x n` product. `traffic` may be null.
///
/// # Safety
/// `hw` must be a live handle; `plan` valid for writes; `traffic` null or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_plan_search(
    hw: *const CubemuHardware,
    m: usize,
    k: usize,
    n: usize,
    plan: *mut CubemuBlockPlan,
    traffic: *mut CubemuTraffic,
) -> CubemuStatus {
    guard(|| {
        let r = planner::search(&deref(hw, "hw")?.inner, m, k, n)?;
        write_out(plan, plan_to_c(&r.plan), "plan")?;
        if !traffic.is_null() {
            traffic.write(traffic_to_c(&r.traffic));
        }
        Ok(())
    })
}

/// Main-memory traffic of `plan` on an `m x k x n` product.
///
/// # Safety
/// `hw` must be a live handle; `plan` readable; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_plan_traffic(
    hw: *const CubemuHardware,
    plan: *const CubemuBlockPlan,
    m: usize,
    k: usize,
    n: usize,
    out: *mut CubemuTraffic,
) -> CubemuStatus {
    guard(|| {
        let t = planner::traffic(&deref(hw, "hw")?.inner, m, k, n, &plan_of(deref(plan, "plan")?))?;
        write_out(out, traffic_to_c(&t), "out")
    })
}

/// Analytic row-block height at fill fraction `f`, and its next multiple
/// of 16.
///
/// # Safety
/// `hw` must be a live handle; `exact` and `rounded` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_optimal_bm(
    hw: *const CubemuHardware,
    f: f64,
    exact: *mut f64,
    rounded: *mut usize,
) -> CubemuStatus {
    guard(|| {
        let o = planner::optimal_bm(&deref(hw, "hw")?.inner, f)?;
        write_out(exact, o.exact, "exact")?;
        write_out(rounded, o.rounded, "rounded")
    })
}

/// Simulated timing of the three split passes under `plan`.
///
/// # Safety
/// `hw` must be a live handle; `plan` readable; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cubemu_pipesim(
    hw: *const CubemuHardware,
    plan: *const CubemuBlockPlan,
    m: usize,
    k: usize,
    n: usize,
    mode: CubemuMode,
    out: *mut CubemuPipeline,
) -> CubemuStatus {
    guard(|| {
        let mode = match mode {
            CubemuMode::Single => Mode::Single,
            CubemuMode::Double => Mode::Double,
        };
        let hw = &deref(hw, "hw")?.inner;
        let plan = plan_of(deref(plan, "plan")?);
        let t = pipesim::simulate_with(hw, &plan, m, k, n, mode, SimOptions::default())?;
        let summary = CubemuPipeline {
            total_time: t.total_time,
            cube_busy: t.cube_busy,
            utilization: t.utilization,
            effective_flops: t.effective_flops,
        };
        write_out(out, summary, "out")
    })
}
