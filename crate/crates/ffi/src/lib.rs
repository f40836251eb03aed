//! C ABI over `pmelab`.
//!
//! Every function returns a [`PmeStatus`]; on failure the message is kept in
//! a thread-local slot readable through [`pme_last_error`]. Solver output is
//! owned by an opaque [`PmeTrajectory`] that the caller releases with
//! [`pme_trajectory_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use pmelab::abp::{abp_measure_estimate, make_params};
use pmelab::dyadic::{select, Alternative};
use pmelab::grid::SpatialGrid;
use pmelab::pucci::{pucci, EllipticityInterval, Sign, SymmetricMatrix};
use pmelab::refsol::{traveling_front, BarenblattPressure};
use pmelab::scheme::{solve, Snapshots, SolverConfig, Trajectory};
use pmelab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    CflViolated = 4,
    NonFinite = 5,
    Hypothesis = 6,
    Invariant = 7,
    EmptySet = 8,
    Insufficient = 9,
    Io = 10,
    Panic = 11,
}

impl From<&Error> for PmeStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidGrid(_) | Error::GridMismatch(_) | Error::StencilOutOfBounds(_) => {
                PmeStatus::InvalidGrid
            }
            Error::NonFinite { .. } | Error::OutOfRange { .. } => PmeStatus::NonFinite,
            Error::EmptyRegion | Error::EmptyContactSet(_) => PmeStatus::EmptySet,
            Error::InvalidParameter(_) | Error::Config(_) => PmeStatus::InvalidArgument,
            Error::CflViolated { .. } => PmeStatus::CflViolated,
            Error::Hypothesis(_) => PmeStatus::Hypothesis,
            Error::Invariant(_) => PmeStatus::Invariant,
            Error::Insufficient(_) => PmeStatus::Insufficient,
            Error::Io(_) | Error::Json(_) => PmeStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, recording any error or panic for [`pme_last_error`].
fn guard(f: impl FnOnce() -> Result<(), (PmeStatus, String)>) -> PmeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PmeStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PmeStatus::Panic
        }
    }
}

fn lib(e: Error) -> (PmeStatus, String) {
    (PmeStatus::from(&e), e.to_string())
}

fn null(name: &str) -> (PmeStatus, String) {
    (PmeStatus::NullPointer, format!("{name} is null"))
}

fn bad(msg: impl Into<String>) -> (PmeStatus, String) {
    (PmeStatus::InvalidArgument, msg.into())
}

fn ell(lambda: f64, big_lambda: f64) -> Result<EllipticityInterval, (PmeStatus, String)> {
    EllipticityInterval::new(lambda, big_lambda).map_err(lib)
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pme_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static nul-terminated version string.
#[no_mangle]
pub extern "C" fn pme_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

unsafe fn read_matrix(m: *const f64, dim: usize) -> Result<SymmetricMatrix, (PmeStatus, String)> {
    if m.is_null() {
        return Err(null("m"));
    }
    if !(1..=2).contains(&dim) {
        return Err(bad(format!("dim must be 1 or 2, got {dim}")));
    }
    let v = slice::from_raw_parts(m, dim * dim);
    let rows: Vec<Vec<f64>> = v.chunks(dim).map(|r| r.to_vec()).collect();
    SymmetricMatrix::from_rows(&rows).map_err(lib)
}

unsafe fn pucci_entry(
    m: *const f64,
    dim: usize,
    lambda: f64,
    big_lambda: f64,
    sign: Sign,
    out: *mut f64,
) -> PmeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = read_matrix(m, dim)?;
        *out = pucci(&a, ell(lambda, big_lambda)?, sign);
        Ok(())
    })
}

/// Maximal Pucci operator of the row-major symmetric `dim x dim` matrix `m`.
///
/// # Safety
/// `m` must point to `dim * dim` doubles and `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn pme_pucci_plus(
    m: *const f64,
    dim: usize,
    lambda: f64,
    big_lambda: f64,
    out: *mut f64,
) -> PmeStatus {
    pucci_entry(m, dim, lambda, big_lambda, Sign::Plus, out)
}

/// Minimal Pucci operator.
///
/// # Safety
/// As for [`pme_pucci_plus`].
#[no_mangle]
pub unsafe extern "C" fn pme_pucci_minus(
    m: *const f64,
    dim: usize,
    lambda: f64,
    big_lambda: f64,
    out: *mut f64,
) -> PmeStatus {
    pucci_entry(m, dim, lambda, big_lambda, Sign::Minus, out)
}

/// Pressure with constant `c` in dimension `n` at `(x, t)`, `t > 0`.
///
/// # Safety
/// `x` must point to `n` doubles and `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn pme_barenblatt_pressure(
    n: usize,
    c: f64,
    x: *const f64,
    t: f64,
    out: *mut f64,
) -> PmeStatus {
    guard(|| {
        if x.is_null() || out.is_null() {
            return Err(null("x or out"));
        }
        let p = BarenblattPressure::new(n, c).map_err(lib)?;
        *out = p.eval(slice::from_raw_parts(x, n), t).map_err(lib)?;
        Ok(())
    })
}

/// `(e.x + t)_+` with `e` and `x` of length `dim`.
///
/// # Safety
/// `e` and `x` must point to `dim` doubles and `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn pme_traveling_front(
    e: *const f64,
    x: *const f64,
    dim: usize,
    t: f64,
    out: *mut f64,
) -> PmeStatus {
    guard(|| {
        if e.is_null() || x.is_null() || out.is_null() {
            return Err(null("e, x or out"));
        }
        *out = traveling_front(
            slice::from_raw_parts(e, dim),
            slice::from_raw_parts(x, dim),
            t,
        );
        Ok(())
    })
}

/// Solver settings. The box is `[-half_width, half_width]^dim` with `nx`
/// nodes per axis; boundary nodes keep their initial values.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PmeSolveParams {
    pub dim: usize,
    pub nx: usize,
    pub half_width: f64,
    pub lambda: f64,
    pub big_lambda: f64,
    pub b: f64,
    /// `+1` for the maximal operator, `-1` for the minimal one.
    pub sign: i32,
    pub cfl_safety: f64,
    pub t_start: f64,
    pub t_final: f64,
    /// Spacing of stored slices; zero keeps every step.
    pub snapshot_dt: f64,
}

/// Solver output; opaque to C.
pub struct PmeTrajectory {
    traj: Trajectory,
    cfg: SolverConfig,
}

/// Solves from `initial` (row-major over the nodes, `len = nx^dim`) and
/// stores the result in `*out`.
///
/// # Safety
/// `params` must be valid, `initial` must point to `len` doubles and `out`
/// to a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pme_solve(
    params: *const PmeSolveParams,
    initial: *const f64,
    len: usize,
    out: *mut *mut PmeTrajectory,
) -> PmeStatus {
    guard(|| {
        if params.is_null() || initial.is_null() || out.is_null() {
            return Err(null("params, initial or out"));
        }
        *out = ptr::null_mut();
        let p = *params;
        let sign = match p.sign {
            1 => Sign::Plus,
            -1 => Sign::Minus,
            s => return Err(bad(format!("sign must be +1 or -1, got {s}"))),
        };
        let space = SpatialGrid::centered(p.dim, p.half_width, p.nx).map_err(lib)?;
        if len != space.len() {
            return Err(bad(format!(
                "initial has {len} values, grid has {}",
                space.len()
            )));
        }
        let cfg = SolverConfig::new(ell(p.lambda, p.big_lambda)?, p.b, sign, p.dim)
            .and_then(|c| c.with_cfl(p.cfl_safety))
            .map_err(lib)?;
        let snaps = if p.snapshot_dt > 0.0 {
            Snapshots::Every(p.snapshot_dt)
        } else {
            Snapshots::EveryStep
        };
        let traj = solve(
            &space,
            slice::from_raw_parts(initial, len),
            &cfg,
            p.t_start,
            p.t_final,
            &snaps,
        )
        .map_err(lib)?;
        *out = Box::into_raw(Box::new(PmeTrajectory { traj, cfg }));
        Ok(())
    })
}

/// Releases a trajectory. Null is ignored.
///
/// # Safety
/// `traj` must come from [`pme_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pme_trajectory_free(traj: *mut PmeTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of stored slices, or 0 for null.
///
/// # Safety
/// `traj` must be null or a live trajectory.
#[no_mangle]
pub unsafe extern "C" fn pme_trajectory_n_times(traj: *const PmeTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.traj.grid().n_times())
}

/// Nodes per slice, or 0 for null.
///
/// # Safety
/// `traj` must be null or a live trajectory.
#[no_mangle]
pub unsafe extern "C" fn pme_trajectory_n_nodes(traj: *const PmeTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.traj.grid().space().len())
}

/// Accepted solver steps, or 0 for null.
///
/// # Safety
/// `traj` must be null or a live trajectory.
#[no_mangle]
pub unsafe extern "C" fn pme_trajectory_steps(traj: *const PmeTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.traj.steps())
}

/// Copies the slice times into `out`, which holds `len` doubles.
///
/// # Safety
/// `traj` must be live and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pme_trajectory_times(
    traj: *const PmeTrajectory,
    out: *mut f64,
    len: usize,
) -> PmeStatus {
    guard(|| {
        let t = traj.as_ref().ok_or_else(|| null("traj"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let times = t.traj.grid().times();
        if len != times.len() {
            return Err(bad(format!("buffer holds {len}, need {}", times.len())));
        }
        slice::from_raw_parts_mut(out, len).copy_from_slice(times);
        Ok(())
    })
}

/// Copies slice `k` into `out`, which holds `len` doubles.
///
/// # Safety
/// `traj` must be live and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pme_trajectory_slice(
    traj: *const PmeTrajectory,
    k: usize,
    out: *mut f64,
    len: usize,
) -> PmeStatus {
    guard(|| {
        let t = traj.as_ref().ok_or_else(|| null("traj"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let u = &t.traj.snapshots;
        if k >= u.grid().n_times() {
            return Err(bad(format!("slice {k} out of range")));
        }
        let s = u.slice(k);
        if len != s.len() {
            return Err(bad(format!("buffer holds {len}, need {}", s.len())));
        }
        slice::from_raw_parts_mut(out, len).copy_from_slice(s);
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PmeAbpResult {
    pub sublevel_fraction: f64,
    pub elliptic_regime: bool,
    pub passed: bool,
    pub contact_t: f64,
    pub contact_u: f64,
    pub contact_count: usize,
}

/// Generation-zero measure estimate with level one and threshold `eta`,
/// using the ellipticity the trajectory was solved with.
///
/// # Safety
/// `traj` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pme_abp_check(
    traj: *const PmeTrajectory,
    eta: f64,
    out: *mut PmeAbpResult,
) -> PmeStatus {
    guard(|| {
        let t = traj.as_ref().ok_or_else(|| null("traj"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let u = &t.traj.snapshots;
        let params = make_params(t.cfg.ell, u.space().dim())
            .and_then(|p| p.with_bounds(1.0, eta))
            .map_err(lib)?;
        let r = abp_measure_estimate(u, &params).map_err(lib)?;
        *out = PmeAbpResult {
            sublevel_fraction: r.sublevel_fraction,
            elliptic_regime: r.elliptic_regime,
            passed: r.passed,
            contact_t: r.contact.1,
            contact_u: r.contact.2,
            contact_count: r.contact_count,
        };
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmeAlternative {
    UnionBig = 0,
    ZeroSetBig = 1,
    Neither = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PmeSelectionResult {
    pub alternative: PmeAlternative,
    pub union_measure: f64,
    pub zero_set_measure: f64,
    pub selected_cubes: usize,
    pub deepest_generation: u32,
    pub non_nested: bool,
}

/// Dyadic selection down to generation `k_max`.
///
/// # Safety
/// `traj` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pme_dyadic_select(
    traj: *const PmeTrajectory,
    k_max: u32,
    out: *mut PmeSelectionResult,
) -> PmeStatus {
    guard(|| {
        let t = traj.as_ref().ok_or_else(|| null("traj"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let u = &t.traj.snapshots;
        let params = make_params(t.cfg.ell, u.space().dim()).map_err(lib)?;
        let s = select(u, &params, k_max).map_err(lib)?;
        *out = PmeSelectionResult {
            alternative: match s.alternative {
                Alternative::UnionBig => PmeAlternative::UnionBig,
                Alternative::ZeroSetBig => PmeAlternative::ZeroSetBig,
                Alternative::Neither => PmeAlternative::Neither,
            },
            union_measure: s.union_measure,
            zero_set_measure: s.zero_set_measure,
            selected_cubes: s.cubes.len(),
            deepest_generation: s.deepest_generation,
            non_nested: s.is_non_nested(),
        };
        Ok(())
    })
}
