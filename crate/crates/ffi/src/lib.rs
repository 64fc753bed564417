//! C interface to `pinnbasis`.
//!
//! Networks and bases are opaque heap handles created by `pb_*_new`,
//! `pb_*_load` or `pb_*_build` and released with the matching `pb_*_free`.
//! Every fallible call returns a [`PbStatus`]; on failure the message is
//! available from [`pb_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use pinnbasis::basis::{OrthonormalBasis, SpectralBasis};
use pinnbasis::network::FeatureNetwork;
use pinnbasis::nitsche::{assemble, error_norms, residual_norms, solve, Norms};
use pinnbasis::problems::lookup;
use pinnbasis::quadrature::{Domain, PointSet, QuadratureRule};
use pinnbasis::trainer::{train_adam, TrainConfig};
use pinnbasis::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Numerical = 5,
    UnknownProblem = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbDomainKind {
    Interval = 0,
    Box = 1,
    LShape = 2,
}

/// Interval `(ax, bx)`, box `(ax, bx) x (ay, by)`, or the fixed L-shape
/// (bounds ignored).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PbDomain {
    pub kind: PbDomainKind,
    pub ax: f64,
    pub bx: f64,
    pub ay: f64,
    pub by: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PbNorms {
    pub l2: f64,
    pub linf: f64,
}

/// Opaque trained or freshly initialised network.
pub struct PbNetwork {
    inner: FeatureNetwork,
}

/// Opaque orthonormal basis extracted from a network.
pub struct PbBasis {
    inner: OrthonormalBasis,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(PbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io(_) => PbStatus::Io,
            Error::Json(_) | Error::Format(_) => PbStatus::Format,
            Error::UnknownProblem(_) => PbStatus::UnknownProblem,
            Error::NonFinite(_)
            | Error::Diverged { .. }
            | Error::SvdFailed
            | Error::Singular
            | Error::Unstable { .. } => PbStatus::Numerical,
            _ => PbStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PbStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(PbStatus::InvalidArgument, msg.into())
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> PbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            PbStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            PbStatus::Panic
        }
    }
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn domain_of(d: &PbDomain) -> Result<Domain, Failure> {
    let domain = match d.kind {
        PbDomainKind::Interval => Domain::Interval { a: d.ax, b: d.bx },
        PbDomainKind::Box => Domain::Box { ax: d.ax, bx: d.bx, ay: d.ay, by: d.by },
        PbDomainKind::LShape => Domain::LShape,
    };
    domain.validate()?;
    Ok(domain)
}

fn points(x: &[f64], dim: usize) -> Result<PointSet, Failure> {
    Ok(PointSet::from_flat(dim, x.to_vec())?)
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next `pb_*` call on the same thread.
#[no_mangle]
pub extern "C" fn pb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Glorot-initialised network with layer widths `dims[0..n_dims]`.
///
/// # Safety
/// `dims` must point to `n_dims` readable values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pb_network_new(dims: *const usize, n_dims: usize, seed: u64, out: *mut *mut PbNetwork) -> PbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dims = slice(dims, n_dims, "dims")?;
        let inner = FeatureNetwork::new(dims, seed)?;
        *out = Box::into_raw(Box::new(PbNetwork { inner }));
        Ok(())
    })
}

/// Loads a network saved by the library.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pb_network_load(path: *const c_char, out: *mut *mut PbNetwork) -> PbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = PathBuf::from(c_str(path, "path")?);
        let inner = FeatureNetwork::load(&path)?;
        *out = Box::into_raw(Box::new(PbNetwork { inner }));
        Ok(())
    })
}

/// # Safety
/// `net` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pb_network_save(net: *const PbNetwork, path: *const c_char) -> PbStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        let path = PathBuf::from(c_str(path, "path")?);
        net.inner.save(&path)?;
        Ok(())
    })
}

/// Releases a network; null is ignored.
///
/// # Safety
/// `net` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pb_network_free(net: *mut PbNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Input dimension, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pb_network_input_dim(net: *const PbNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.inner.input_dim())
}

/// Width of the last hidden layer, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pb_network_n_features(net: *const PbNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.inner.n_features())
}

/// Network output at `n_points` points stored point-major in `x`.
///
/// # Safety
/// `x` must hold `n_points * input_dim` values and `out` room for `n_points`.
#[no_mangle]
pub unsafe extern "C" fn pb_network_eval(net: *const PbNetwork, x: *const f64, n_points: usize, out: *mut f64) -> PbStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        let d = net.inner.input_dim();
        let pts = points(slice(x, n_points * d, "x")?, d)?;
        let out = slice_mut(out, n_points, "out")?;
        let u = net.inner.forward_batch(&pts, false)?.output_values();
        out.copy_from_slice(&u);
        Ok(())
    })
}

/// Trains `net` in place with Adam on a registered stationary problem;
/// zero counts select the library defaults for the problem's domain.
///
/// # Safety
/// `net` must be a live handle, `problem` a NUL-terminated string and
/// `final_loss` null or writable.
#[no_mangle]
pub unsafe extern "C" fn pb_network_train(
    net: *mut PbNetwork,
    problem: *const c_char,
    epochs: usize,
    learning_rate: f64,
    n_collocation: usize,
    n_boundary: usize,
    seed: u64,
    final_loss: *mut f64,
) -> PbStatus {
    guard(|| {
        let net = net.as_mut().ok_or_else(|| null("net"))?;
        let spec = lookup(c_str(problem, "problem")?)?;
        let problem = spec.stationary()?;
        let mut cfg = TrainConfig::for_domain(&problem.domain);
        cfg.epochs = epochs;
        cfg.learning_rate = learning_rate;
        cfg.seed = seed;
        if n_collocation > 0 {
            cfg.n_collocation = n_collocation;
        }
        if n_boundary > 0 {
            cfg.n_boundary = n_boundary;
        }
        let outcome = train_adam(&net.inner, problem, &cfg)?;
        if let Some(l) = final_loss.as_mut() {
            *l = outcome.loss_history.last().copied().unwrap_or(f64::NAN);
        }
        net.inner = outcome.network;
        Ok(())
    })
}

/// Extracts the orthonormal basis of `net` on a Gauss rule of `order`
/// points per axis and patch.
///
/// # Safety
/// `net` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pb_basis_build(net: *const PbNetwork, domain: PbDomain, order: usize, out: *mut *mut PbBasis) -> PbStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let rule = QuadratureRule::new(domain_of(&domain)?, order)?;
        let inner = OrthonormalBasis::build(&net.inner, &rule)?;
        *out = Box::into_raw(Box::new(PbBasis { inner }));
        Ok(())
    })
}

/// Releases a basis; null is ignored.
///
/// # Safety
/// `basis` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pb_basis_free(basis: *mut PbBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Number of retained basis functions, or 0 for a null handle.
///
/// # Safety
/// `basis` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pb_basis_r_max(basis: *const PbBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.inner.r_max())
}

/// Values of the first `count` basis functions at `n_points` points,
/// written row-major (`n_points` rows of `count`).
///
/// # Safety
/// `x` must hold `n_points * dim` values and `out` room for
/// `n_points * count`.
#[no_mangle]
pub unsafe extern "C" fn pb_basis_eval(
    basis: *const PbBasis,
    x: *const f64,
    n_points: usize,
    count: usize,
    out: *mut f64,
) -> PbStatus {
    guard(|| {
        let basis = basis.as_ref().ok_or_else(|| null("basis"))?;
        let d = basis.inner.dim();
        let pts = points(slice(x, n_points * d, "x")?, d)?;
        let out = slice_mut(out, n_points * count, "out")?;
        let t = basis.inner.tabulate(&pts, count)?;
        for i in 0..n_points {
            for k in 0..count {
                out[i * count + k] = t.values[(i, k)];
            }
        }
        Ok(())
    })
}

/// Solves a registered stationary problem with the first `r + 1` basis
/// functions; writes `r + 1` coefficients and, when the pointers are
/// non-null, error (if an exact solution is known, else NaN) and residual
/// norms on a rule of `fine_order` points.
///
/// # Safety
/// `basis` must be a live handle, `problem` a NUL-terminated string,
/// `coefficients` writable for `r + 1` values, `error` and `residual` null
/// or writable.
#[no_mangle]
pub unsafe extern "C" fn pb_poisson_solve(
    basis: *const PbBasis,
    problem: *const c_char,
    r: usize,
    beta: f64,
    fine_order: usize,
    coefficients: *mut f64,
    error: *mut PbNorms,
    residual: *mut PbNorms,
) -> PbStatus {
    guard(|| {
        let basis = basis.as_ref().ok_or_else(|| null("basis"))?;
        let spec = lookup(c_str(problem, "problem")?)?;
        let problem = spec.stationary()?;
        if problem.domain != basis.inner.domain() {
            return Err(invalid(format!("problem {} is posed on a different domain than the basis", problem.id)));
        }
        let out = slice_mut(coefficients, r + 1, "coefficients")?;
        let build = QuadratureRule::new(basis.inner.domain(), basis.inner.build_order())?;
        let fine = QuadratureRule::new(basis.inner.domain(), fine_order)?;
        let system = assemble(&basis.inner, r, problem, beta, &build)?;
        let sol = solve(&system)?;
        out.copy_from_slice(sol.coefficients.as_slice());
        if let Some(e) = error.as_mut() {
            let n = match &problem.exact {
                Some(ex) => {
                    let t = basis.inner.tabulate(&fine.interior_nodes, r + 1)?;
                    let u = &t.values * &sol.coefficients;
                    error_norms(u.as_slice(), &ex.value, &fine)
                }
                None => Norms::nan(),
            };
            *e = PbNorms { l2: n.l2, linf: n.linf };
        }
        if let Some(res) = residual.as_mut() {
            let n = residual_norms(&basis.inner, &sol.coefficients, problem, &fine)?;
            *res = PbNorms { l2: n.l2, linf: n.linf };
        }
        Ok(())
    })
}
