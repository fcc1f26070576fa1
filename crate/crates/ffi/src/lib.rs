//! C ABI over `qmckit`.
//!
//! Every fallible call returns a [`QmcStatus`]; on failure the message is
//! available from [`qmc_last_error`] on the same thread. Objects are opaque
//! handles created by `*_new` functions and released with the matching
//! `*_free`. No function unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use qmckit::dnet::{DigitalNet, DnetConfig, DnetOrder, DnetRandomization, GeneratingMatrixSet};
use qmckit::fastgram::{GramKind, SpectralGram};
use qmckit::kernels::{KernelFamily, KernelSpec};
use qmckit::lattice::{Lattice, LatticeGeneratingVector, LatticeOrder};
use qmckit::rqmc::{self, AdaptiveOptions, RqmcResult, SamplerSpec};
use qmckit::{transforms, PointGenerator, QmcError};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QmcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Range = 4,
    Exhausted = 5,
    Precision = 6,
    Unsupported = 7,
    Structure = 8,
    Singular = 9,
    Parse = 10,
    Io = 11,
    Dof = 12,
    Panic = 255,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QmcKernelFamily {
    /// Shift-invariant kernel for lattices.
    Si = 0,
    /// Digitally-shift-invariant kernel for base-2 nets.
    Dsi = 1,
}

/// Plain-data summary of an RQMC estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QmcRqmcResult {
    pub mean: f64,
    pub sigma: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub level: f64,
    pub n: u64,
    pub reps: u64,
    /// 1 when the tolerance was met (always 1 in fixed mode).
    pub tolerance_met: i32,
}

/// Opaque point generator.
pub struct QmcGenerator {
    inner: Box<dyn PointGenerator + Send>,
}

/// Opaque eigen-decomposed Gram matrix.
pub struct QmcGram {
    inner: SpectralGram,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &QmcError) -> QmcStatus {
    match e {
        QmcError::InvalidBase(_) | QmcError::InvalidArgument(_) | QmcError::UnknownIntegrand(_) | QmcError::Order(_) => {
            QmcStatus::InvalidArgument
        }
        QmcError::Range { .. } | QmcError::TooManyDigits { .. } => QmcStatus::Range,
        QmcError::Shape(_) | QmcError::Length { .. } | QmcError::NotPowerOfTwo(_) | QmcError::KindMismatch(_) => {
            QmcStatus::Shape
        }
        QmcError::Exhausted { .. } => QmcStatus::Exhausted,
        QmcError::Precision(_) => QmcStatus::Precision,
        QmcError::Unsupported(_) | QmcError::Interlacing(_) => QmcStatus::Unsupported,
        QmcError::Structure(_) => QmcStatus::Structure,
        QmcError::SingularGram { .. } => QmcStatus::Singular,
        QmcError::Parse { .. } | QmcError::Expression { .. } => QmcStatus::Parse,
        QmcError::Io { .. } => QmcStatus::Io,
        QmcError::Dof(_) => QmcStatus::Dof,
    }
}

enum Fail {
    Null(&'static str),
    Qmc(QmcError),
}

impl From<QmcError> for Fail {
    fn from(e: QmcError) -> Self {
        Fail::Qmc(e)
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QmcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QmcStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            QmcStatus::NullPointer
        }
        Ok(Err(Fail::Qmc(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            QmcStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Qmc(QmcError::InvalidArgument(format!("{what} is not valid UTF-8"))))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

fn kernel(family: QmcKernelFamily, d: usize, alpha: u32, gamma: f64, eta: f64) -> Result<KernelSpec, QmcError> {
    let fam = match family {
        QmcKernelFamily::Si => KernelFamily::SiBernoulli,
        QmcKernelFamily::Dsi => KernelFamily::DsiWalsh,
    };
    KernelSpec::uniform(fam, d, alpha, gamma, eta)
}

fn to_c(r: &RqmcResult) -> QmcRqmcResult {
    QmcRqmcResult {
        mean: r.mean,
        sigma: r.sigma,
        ci_lo: r.ci_lo,
        ci_hi: r.ci_hi,
        level: r.level,
        n: r.n as u64,
        reps: r.reps as u64,
        tolerance_met: r.tolerance_met as i32,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qmc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; valid until the next
/// failing call on the same thread. Never null.
#[no_mangle]
pub extern "C" fn qmc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Generator from a sampler name such as `"lattice"`, `"dnet-lms"`,
/// `"dnet-lms-alpha2"`, `"halton-qrng"` or `"iid"`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qmc_sampler_new(
    name: *const c_char,
    d: usize,
    reps: usize,
    seed: u64,
    out: *mut *mut QmcGenerator,
) -> QmcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let spec = SamplerSpec::parse(string(name, "name")?)?;
        let inner = spec.build(d, reps, seed)?;
        *out = Box::into_raw(Box::new(QmcGenerator { inner }));
        Ok(())
    })
}

/// Randomly shifted lattice with the built-in generating vector. Linear
/// order (`linear != 0`) fixes the size to `n`, a power of two; radical
/// inverse order ignores `n`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qmc_lattice_new(
    d: usize,
    linear: i32,
    n: u64,
    reps: usize,
    seed: u64,
    out: *mut *mut QmcGenerator,
) -> QmcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let order = if linear != 0 { LatticeOrder::Linear } else { LatticeOrder::RadicalInverse };
        let lat = Lattice::shifted(LatticeGeneratingVector::default_for(d)?, order, reps, seed)?.with_size(n)?;
        *out = Box::into_raw(Box::new(QmcGenerator { inner: Box::new(lat) }));
        Ok(())
    })
}

/// Built-in base-2 net with interlacing order `alpha` and randomization
/// `"none"`, `"shift"`, `"permutation"`, `"lms"`, `"lms-shift"` or `"nus"`.
///
/// # Safety
/// `randomization` must be NUL-terminated and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qmc_dnet_new(
    d: usize,
    alpha: usize,
    randomization: *const c_char,
    gray_code: i32,
    reps: usize,
    seed: u64,
    out: *mut *mut QmcGenerator,
) -> QmcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let rand = DnetRandomization::parse(string(randomization, "randomization")?)?;
        let c = GeneratingMatrixSet::sobol(alpha.max(1) * d)?;
        let cfg = DnetConfig {
            alpha,
            order: if gray_code != 0 { DnetOrder::GrayCode } else { DnetOrder::RadicalInverse },
            randomization: rand,
            reps,
            seed,
            ..DnetConfig::default()
        };
        let net = DigitalNet::new(&c, cfg)?;
        *out = Box::into_raw(Box::new(QmcGenerator { inner: Box::new(net) }));
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a handle from a `*_new` call not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qmc_generator_free(g: *mut QmcGenerator) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Dimension of the generator, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qmc_generator_dim(g: *const QmcGenerator) -> usize {
    g.as_ref().map_or(0, |g| g.inner.dim())
}

/// Replication count, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qmc_generator_replications(g: *const QmcGenerator) -> usize {
    g.as_ref().map_or(0, |g| g.inner.replications())
}

/// Writes points `start..start + count` of replication `rep` row-major
/// into `out`, which must hold `count * dim` doubles.
///
/// # Safety
/// `g` must be a live handle and `out` valid for `out_len` writes.
#[no_mangle]
pub unsafe extern "C" fn qmc_generator_fill(
    g: *const QmcGenerator,
    rep: usize,
    start: u64,
    count: usize,
    out: *mut f64,
    out_len: usize,
) -> QmcStatus {
    guard(|| {
        let g = g.as_ref().ok_or(Fail::Null("generator"))?;
        let d = g.inner.dim();
        if out_len != count * d {
            return Err(QmcError::Length {
                expected: count * d,
                got: out_len,
            }
            .into());
        }
        if rep >= g.inner.replications() {
            return Err(QmcError::InvalidArgument(format!(
                "replication {rep} out of range (have {})",
                g.inner.replications()
            ))
            .into());
        }
        let buf = slice_mut(out, out_len, "out")?;
        g.inner.fill(rep, start, buf)?;
        Ok(())
    })
}

/// Orthonormal Walsh-Hadamard transform in place; `n` a power of two.
///
/// # Safety
/// `data` must be valid for `n` reads and writes.
#[no_mangle]
pub unsafe extern "C" fn qmc_fwht(data: *mut f64, n: usize) -> QmcStatus {
    guard(|| {
        transforms::fwht_inplace(slice_mut(data, n, "data")?)?;
        Ok(())
    })
}

unsafe fn complex_inplace(
    re: *mut f64,
    im: *mut f64,
    n: usize,
    f: fn(&mut [Complex64]) -> qmckit::Result<()>,
) -> Result<(), Fail> {
    let re = slice_mut(re, n, "re")?;
    let im = slice_mut(im, n, "im")?;
    let mut z: Vec<Complex64> = re.iter().zip(im.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect();
    f(&mut z)?;
    for ((a, b), v) in re.iter_mut().zip(im.iter_mut()).zip(z) {
        *a = v.re;
        *b = v.im;
    }
    Ok(())
}

/// Orthonormal FFT with bit-reversed input order, in place on split
/// real/imaginary arrays.
///
/// # Safety
/// `re` and `im` must each be valid for `n` reads and writes.
#[no_mangle]
pub unsafe extern "C" fn qmc_fftbr(re: *mut f64, im: *mut f64, n: usize) -> QmcStatus {
    guard(|| complex_inplace(re, im, n, transforms::fftbr_inplace))
}

/// Inverse of [`qmc_fftbr`].
///
/// # Safety
/// As for [`qmc_fftbr`].
#[no_mangle]
pub unsafe extern "C" fn qmc_ifftbr(re: *mut f64, im: *mut f64, n: usize) -> QmcStatus {
    guard(|| complex_inplace(re, im, n, transforms::ifftbr_inplace))
}

/// Product kernel `gamma * prod_j (1 + eta K_alpha(x_j, y_j))`.
///
/// # Safety
/// `x` and `y` must hold `d` doubles, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qmc_kernel_eval(
    family: QmcKernelFamily,
    alpha: u32,
    gamma: f64,
    eta: f64,
    x: *const f64,
    y: *const f64,
    d: usize,
    out: *mut f64,
) -> QmcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let spec = kernel(family, d, alpha, gamma, eta)?;
        *out = spec.eval(slice(x, d, "x")?, slice(y, d, "y")?)?;
        Ok(())
    })
}

/// Gram matrix of `n` points (row-major `n x d`) in radical-inverse order:
/// lattice points with the SI kernel or base-2 net points with the DSI kernel.
///
/// # Safety
/// `points` must hold `n * d` doubles and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qmc_gram_new(
    family: QmcKernelFamily,
    alpha: u32,
    gamma: f64,
    eta: f64,
    points: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut QmcGram,
) -> QmcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let spec = kernel(family, d, alpha, gamma, eta)?;
        let kind = match family {
            QmcKernelFamily::Si => GramKind::SiLattice,
            QmcKernelFamily::Dsi => GramKind::DsiDnet,
        };
        let pts = slice(points, n * d, "points")?;
        let inner = SpectralGram::build(kind, &spec, pts, d)?;
        *out = Box::into_raw(Box::new(QmcGram { inner }));
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a live Gram handle.
#[no_mangle]
pub unsafe extern "C" fn qmc_gram_free(g: *mut QmcGram) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Size of the Gram matrix, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live Gram handle.
#[no_mangle]
pub unsafe extern "C" fn qmc_gram_size(g: *const QmcGram) -> usize {
    g.as_ref().map_or(0, |g| g.inner.n())
}

unsafe fn gram_apply(
    g: *const QmcGram,
    y: *const f64,
    out: *mut f64,
    n: usize,
    solve: bool,
) -> Result<(), Fail> {
    let g = g.as_ref().ok_or(Fail::Null("gram"))?;
    let y = slice(y, n, "y")?;
    let res = if solve { g.inner.solve(y)? } else { g.inner.matvec(y)? };
    slice_mut(out, n, "out")?.copy_from_slice(&res);
    Ok(())
}

/// `out = K y` in `O(n log n)`.
///
/// # Safety
/// `y` and `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn qmc_gram_matvec(g: *const QmcGram, y: *const f64, out: *mut f64, n: usize) -> QmcStatus {
    guard(|| gram_apply(g, y, out, n, false))
}

/// `out = K^-1 y`; fails with `SINGULAR` on a numerically singular matrix.
///
/// # Safety
/// `y` and `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn qmc_gram_solve(g: *const QmcGram, y: *const f64, out: *mut f64, n: usize) -> QmcStatus {
    guard(|| gram_apply(g, y, out, n, true))
}

/// Eigenvalues in transform order as split real/imaginary arrays.
///
/// # Safety
/// `re` and `im` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn qmc_gram_eigenvalues(g: *const QmcGram, re: *mut f64, im: *mut f64, n: usize) -> QmcStatus {
    guard(|| {
        let g = g.as_ref().ok_or(Fail::Null("gram"))?;
        let ev = g.inner.eigenvalues();
        if ev.len() != n {
            return Err(QmcError::Length { expected: ev.len(), got: n }.into());
        }
        let re = slice_mut(re, n, "re")?;
        let im = slice_mut(im, n, "im")?;
        for (k, z) in ev.iter().enumerate() {
            re[k] = z.re;
            im[k] = z.im;
        }
        Ok(())
    })
}

/// Squared discrepancy of the cubature with weights `w`.
///
/// # Safety
/// `w` must hold `n` doubles and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qmc_gram_discrepancy(g: *const QmcGram, w: *const f64, n: usize, out: *mut f64) -> QmcStatus {
    guard(|| {
        let g = g.as_ref().ok_or(Fail::Null("gram"))?;
        let out = out_ptr(out, "out")?;
        *out = g.inner.discrepancy(slice(w, n, "w")?)?;
        Ok(())
    })
}

/// Fixed-`n` RQMC estimate of a catalog integrand.
///
/// # Safety
/// `integrand` and `sampler` must be NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qmc_integrate_fixed(
    integrand: *const c_char,
    d: usize,
    sampler: *const c_char,
    n: usize,
    reps: usize,
    tau: f64,
    seed: u64,
    out: *mut QmcRqmcResult,
) -> QmcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let f = rqmc::integrand_library(string(integrand, "integrand")?, d)?;
        let s = SamplerSpec::parse(string(sampler, "sampler")?)?;
        *out = to_c(&rqmc::rqmc_fixed(&f, &s, n, reps, tau, seed)?);
        Ok(())
    })
}

/// Adaptive doubling estimate; `out->tolerance_met` reports whether
/// `abs_tol` was reached before `n_max`.
///
/// # Safety
/// As for [`qmc_integrate_fixed`].
#[no_mangle]
pub unsafe extern "C" fn qmc_integrate_adaptive(
    integrand: *const c_char,
    d: usize,
    sampler: *const c_char,
    reps: usize,
    tau: f64,
    abs_tol: f64,
    n0: usize,
    n_max: usize,
    seed: u64,
    out: *mut QmcRqmcResult,
) -> QmcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let f = rqmc::integrand_library(string(integrand, "integrand")?, d)?;
        let s = SamplerSpec::parse(string(sampler, "sampler")?)?;
        let opts = AdaptiveOptions { tau, abs_tol, n0, n_max };
        *out = to_c(&rqmc::rqmc_adaptive(&f, &s, reps, opts, seed)?);
        Ok(())
    })
}

/// `p`-quantile of Student's t with `nu` degrees of freedom.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qmc_student_t_quantile(nu: f64, p: f64, out: *mut f64) -> QmcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = rqmc::student_t_quantile(nu, p)?;
        Ok(())
    })
}
