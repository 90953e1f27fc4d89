//! C interface to the sfwg solver.
//!
//! Objects are opaque handles created by `sfwg_*_new`/`sfwg_solve` and
//! released with the matching `*_free`. Every fallible call returns an
//! [`SfwgStatus`]; on failure a message is available from
//! [`sfwg_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sfwg::error_norms::{energy_error, l2_error, EnergyErrorMode};
use sfwg::mesh::Point;
use sfwg::solver::{solve, KappaInterpolation, LinearSolverKind, Method, Penalty, SolverConfig};
use sfwg::{Benchmark, Error, GradientDegree, GridFamily, PolygonalMesh, Rect, WeakFunction, WgSpace};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfwgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Mesh = 3,
    Numerical = 4,
    NotConverged = 5,
    Diverged = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfwgGrid {
    Rect = 0,
    Qph = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfwgMethod {
    Kacanov = 0,
    Richardson = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfwgKappaInterp {
    Projected = 0,
    Pointwise = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfwgPenalty {
    None = 0,
    GlobalH = 1,
    LocalH = 2,
}

/// Solver settings. Obtain defaults from [`sfwg_solve_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SfwgSolveOptions {
    /// Benchmark problem, 1 or 2.
    pub example: u8,
    /// Polynomial degree of the weak functions, 1 to 6.
    pub k: u32,
    /// Gradient degree; 0 selects `k + 1`.
    pub j: u32,
    pub method: SfwgMethod,
    /// Kačanov relaxation in (0, 1].
    pub theta: f64,
    /// Richardson step; 0 selects `α/β²`.
    pub eps: f64,
    pub tol: f64,
    pub max_iter: u32,
    pub kappa_interp: SfwgKappaInterp,
    pub penalty: SfwgPenalty,
    /// Use preconditioned CG instead of sparse Cholesky.
    pub use_cg: bool,
    pub condense: bool,
}

/// Opaque polygonal mesh.
pub struct SfwgMesh {
    mesh: PolygonalMesh,
}

/// Opaque discrete solution together with its space and problem.
pub struct SfwgSolution {
    space: WgSpace,
    bench: Benchmark,
    u: WeakFunction,
    iterations: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SfwgStatus {
    match e {
        Error::InvalidArgument(_) => SfwgStatus::InvalidArgument,
        Error::Geometry { .. } | Error::NonConforming(_) | Error::MeshFormat { .. } => SfwgStatus::Mesh,
        Error::SingularLocal { .. } | Error::NotPositiveDefinite(_) | Error::LinearSolver(_) => SfwgStatus::Numerical,
        Error::NotConverged { .. } => SfwgStatus::NotConverged,
        Error::Diverged { .. } => SfwgStatus::Diverged,
        Error::Io(_) | Error::Csv(_) => SfwgStatus::Io,
    }
}

enum Fail {
    Status(SfwgStatus, String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(SfwgStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status and the thread's
/// last error message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SfwgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SfwgStatus::Ok,
        Ok(Err(Fail::Status(s, msg))) => {
            set_last_error(msg);
            s
        }
        Ok(Err(Fail::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            SfwgStatus::Panic
        }
    }
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length without
/// the terminator, or 0 if there is none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sfwg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: the caller guarantees `len` writable bytes at `buf`.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sfwg_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => c"unknown",
    };
    VERSION.as_ptr()
}

/// Builds a refinement level of a grid family on the unit square.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn sfwg_mesh_new(grid: SfwgGrid, level: u32, out: *mut *mut SfwgMesh) -> SfwgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let family = match grid {
            SfwgGrid::Rect => GridFamily::Rect,
            SfwgGrid::Qph => GridFamily::Qph,
        };
        let mesh = family.build(level, Rect::unit_square())?;
        // SAFETY: checked non-null; the caller owns the slot.
        unsafe { *out = Box::into_raw(Box::new(SfwgMesh { mesh })) };
        Ok(())
    })
}

/// Builds a mesh from vertex coordinates and counterclockwise polygons.
/// `xy` holds `2 * num_vertices` interleaved coordinates; polygon `c` uses
/// `indices[offsets[c] .. offsets[c + 1]]`, so `offsets` has
/// `num_cells + 1` entries.
///
/// # Safety
/// All arrays must hold the stated number of elements; `out` must be a
/// valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn sfwg_mesh_from_polygons(
    xy: *const f64,
    num_vertices: usize,
    offsets: *const usize,
    indices: *const usize,
    num_cells: usize,
    out: *mut *mut SfwgMesh,
) -> SfwgStatus {
    guard(|| {
        if xy.is_null() || offsets.is_null() || indices.is_null() || out.is_null() {
            return Err(null("an argument"));
        }
        // SAFETY: lengths are the caller's contract.
        let xy = unsafe { std::slice::from_raw_parts(xy, 2 * num_vertices) };
        let offsets = unsafe { std::slice::from_raw_parts(offsets, num_cells + 1) };
        let total = offsets[num_cells];
        let indices = unsafe { std::slice::from_raw_parts(indices, total) };
        let vertices: Vec<Point> = xy.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect();
        let mut polys = Vec::with_capacity(num_cells);
        for w in offsets.windows(2) {
            if w[0] > w[1] || w[1] > total {
                return Err(Fail::Status(SfwgStatus::InvalidArgument, "polygon offsets must be nondecreasing".into()));
            }
            polys.push(indices[w[0]..w[1]].to_vec());
        }
        let mesh = PolygonalMesh::from_polygons(vertices, polys)?;
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(SfwgMesh { mesh })) };
        Ok(())
    })
}

/// # Safety
/// `mesh` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sfwg_mesh_free(mesh: *mut SfwgMesh) {
    if !mesh.is_null() {
        // SAFETY: created by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(mesh) });
    }
}

/// Number of cells, or 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sfwg_mesh_num_cells(mesh: *const SfwgMesh) -> usize {
    unsafe { mesh.as_ref() }.map_or(0, |m| m.mesh.num_cells())
}

/// Number of edges, or 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sfwg_mesh_num_edges(mesh: *const SfwgMesh) -> usize {
    unsafe { mesh.as_ref() }.map_or(0, |m| m.mesh.num_edges())
}

/// Mesh size (largest cell diameter), or NaN for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sfwg_mesh_h(mesh: *const SfwgMesh) -> f64 {
    unsafe { mesh.as_ref() }.map_or(f64::NAN, |m| m.mesh.h())
}

#[no_mangle]
pub extern "C" fn sfwg_solve_options_default() -> SfwgSolveOptions {
    let d = SolverConfig::default();
    SfwgSolveOptions {
        example: 1,
        k: 1,
        j: 0,
        method: SfwgMethod::Kacanov,
        theta: 1.0,
        eps: 0.0,
        tol: d.tol,
        max_iter: d.max_iter as u32,
        kappa_interp: SfwgKappaInterp::Projected,
        penalty: SfwgPenalty::None,
        use_cg: false,
        condense: d.condense,
    }
}

fn config(o: &SfwgSolveOptions, bench: &Benchmark) -> SolverConfig {
    let method = match o.method {
        SfwgMethod::Kacanov => Method::Kacanov { theta: o.theta },
        SfwgMethod::Richardson => {
            let k = &bench.kappa;
            Method::Richardson { eps: if o.eps > 0.0 { o.eps } else { k.alpha / (k.beta * k.beta) } }
        }
    };
    let mut c = SolverConfig {
        method,
        tol: o.tol,
        max_iter: o.max_iter as usize,
        linear: if o.use_cg { LinearSolverKind::cg() } else { LinearSolverKind::Cholesky },
        condense: o.condense,
        ..SolverConfig::default()
    };
    c.form.interpolation = match o.kappa_interp {
        SfwgKappaInterp::Projected => KappaInterpolation::Projected,
        SfwgKappaInterp::Pointwise => KappaInterpolation::Pointwise,
    };
    c.form.penalty = match o.penalty {
        SfwgPenalty::None => Penalty::None,
        SfwgPenalty::GlobalH => Penalty::GlobalH,
        SfwgPenalty::LocalH => Penalty::LocalH,
    };
    c
}

/// Solves a benchmark problem on `mesh`. The mesh is copied; the handle
/// stays owned by the caller.
///
/// # Safety
/// `mesh` must be a live handle, `options` null (defaults) or valid, and
/// `out` a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn sfwg_solve(mesh: *const SfwgMesh, options: *const SfwgSolveOptions, out: *mut *mut SfwgSolution) -> SfwgStatus {
    guard(|| {
        let mesh = unsafe { mesh.as_ref() }.ok_or_else(|| null("mesh"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let o = unsafe { options.as_ref() }.copied().unwrap_or_else(|| sfwg_solve_options_default());
        let bench = Benchmark::example(o.example)?;
        let degree = if o.j == 0 { GradientDegree::KPlus1 } else { GradientDegree::Fixed(o.j as usize) };
        let space = WgSpace::new(mesh.mesh.clone(), o.k as usize, degree)?;
        let cfg = config(&o, &bench);
        let sol = solve(&space, &bench.kappa, &|p| bench.forcing(p), &cfg, None)?;
        let handle = SfwgSolution { space, bench, u: sol.u, iterations: sol.iterations };
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(handle)) };
        Ok(())
    })
}

/// # Safety
/// `solution` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sfwg_solution_free(solution: *mut SfwgSolution) {
    if !solution.is_null() {
        // SAFETY: created by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(solution) });
    }
}

/// L² and energy errors against the benchmark's exact solution.
///
/// # Safety
/// `solution` must be a live handle; `l2` and `energy` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sfwg_solution_errors(solution: *const SfwgSolution, l2: *mut f64, energy: *mut f64) -> SfwgStatus {
    guard(|| {
        let s = unsafe { solution.as_ref() }.ok_or_else(|| null("solution"))?;
        if l2.is_null() || energy.is_null() {
            return Err(null("output pointer"));
        }
        let a = l2_error(&s.space, &s.u, &s.bench.exact);
        let b = energy_error(&s.space, &s.u, &s.bench.exact, EnergyErrorMode::Pointwise)?;
        unsafe {
            *l2 = a;
            *energy = b;
        }
        Ok(())
    })
}

/// Nonlinear iterations used, or 0 for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sfwg_solution_iterations(solution: *const SfwgSolution) -> usize {
    unsafe { solution.as_ref() }.map_or(0, |s| s.iterations)
}

/// Length of the full coefficient vector (cell blocks, then edge blocks).
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sfwg_solution_num_coefficients(solution: *const SfwgSolution) -> usize {
    unsafe { solution.as_ref() }.map_or(0, |s| s.u.len())
}

/// Copies the coefficient vector into `buf`. Fails with `BufferTooSmall`
/// when `len` is short; `written` receives the required length either way.
///
/// # Safety
/// `solution` must be a live handle, `buf` point to `len` writable doubles
/// and `written` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sfwg_solution_coefficients(solution: *const SfwgSolution, buf: *mut f64, len: usize, written: *mut usize) -> SfwgStatus {
    guard(|| {
        let s = unsafe { solution.as_ref() }.ok_or_else(|| null("solution"))?;
        if written.is_null() {
            return Err(null("written"));
        }
        let n = s.u.len();
        unsafe { *written = n };
        if len < n {
            return Err(Fail::Status(SfwgStatus::BufferTooSmall, format!("buffer holds {len} values, {n} needed")));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        unsafe { ptr::copy_nonoverlapping(s.u.coeffs.as_ptr(), buf, n) };
        Ok(())
    })
}

/// Interior polynomial of the solution on `cell` evaluated at `(x, y)`.
///
/// # Safety
/// `solution` must be a live handle and `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sfwg_solution_eval(solution: *const SfwgSolution, cell: usize, x: f64, y: f64, value: *mut f64) -> SfwgStatus {
    guard(|| {
        let s = unsafe { solution.as_ref() }.ok_or_else(|| null("solution"))?;
        if value.is_null() {
            return Err(null("value"));
        }
        if cell >= s.space.mesh().num_cells() {
            return Err(Fail::Status(SfwgStatus::InvalidArgument, format!("cell {cell} out of range")));
        }
        unsafe { *value = s.space.eval_interior(&s.u, cell, &Point::new(x, y)) };
        Ok(())
    })
}
