//! C interface to `nlfem`.
//!
//! Objects are opaque heap handles created by `nlfem_*_new`-style functions
//! and released with the matching `*_free`. Every function returns an
//! [`NlfemStatus`]; on failure, [`nlfem_last_error`] describes what went
//! wrong on the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nlfem::assembly::assemble;
use nlfem::linalg::SymMatrix;
use nlfem::solve::{solve_bvp, BvpProblem, Forcing, Operator};
use nlfem::{generate_mesh, Error, Kernel, Mesh1D, MeshSpec};

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlfemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Numerical = 4,
    Panic = 5,
}

/// A one-dimensional mesh.
pub struct NlfemMesh(Mesh1D);

/// An interaction kernel.
pub struct NlfemKernel(Kernel);

/// A symmetric stiffness matrix.
pub struct NlfemMatrix(SymMatrix);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> NlfemStatus {
    match e {
        Error::InvalidParameter { .. } | Error::IndexOutOfRange(_) | Error::UnsupportedKernel(_) | Error::MeshMismatch(_) => {
            NlfemStatus::InvalidArgument
        }
        _ => NlfemStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (NlfemStatus, String)>) -> NlfemStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NlfemStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(format!("internal panic: {msg}"));
            NlfemStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (NlfemStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (NlfemStatus, String) {
    (NlfemStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (NlfemStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), (NlfemStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next call into the library on the
/// same thread.
#[no_mangle]
pub extern "C" fn nlfem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn new_mesh(spec: MeshSpec, out: *mut *mut NlfemMesh) -> NlfemStatus {
    guard(|| {
        let mesh = generate_mesh(&spec).map_err(lib_err)?;
        unsafe { store(out, NlfemMesh(mesh)) }
    })
}

/// Uniform mesh of `(a, b)` with `interior` interior nodes.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn nlfem_mesh_uniform(a: f64, b: f64, interior: usize, out: *mut *mut NlfemMesh) -> NlfemStatus {
    new_mesh(MeshSpec::Uniform { a, b, interior }, out)
}

/// Mesh of `(a, b)` with `elements` elements graded toward both endpoints
/// with exponent `gamma`.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn nlfem_mesh_graded(
    a: f64,
    b: f64,
    elements: usize,
    gamma: f64,
    out: *mut *mut NlfemMesh,
) -> NlfemStatus {
    new_mesh(MeshSpec::GradedBoundary { a, b, elements, gamma }, out)
}

/// Mesh from `len` strictly increasing node coordinates, endpoints included.
///
/// # Safety
/// `nodes` must point to `len` readable doubles and `out` must be valid for
/// writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn nlfem_mesh_from_nodes(nodes: *const f64, len: usize, out: *mut *mut NlfemMesh) -> NlfemStatus {
    guard(|| {
        if nodes.is_null() {
            return Err(null("nodes"));
        }
        let v = std::slice::from_raw_parts(nodes, len).to_vec();
        let mesh = Mesh1D::from_nodes(v).map_err(lib_err)?;
        store(out, NlfemMesh(mesh))
    })
}

/// Number of nodes, endpoints included.
///
/// # Safety
/// `mesh` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn nlfem_mesh_node_count(mesh: *const NlfemMesh, out: *mut usize) -> NlfemStatus {
    guard(|| {
        let m = deref(mesh, "mesh")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.0.nodes().len();
        Ok(())
    })
}

/// Copies the node coordinates into `buf`, which must hold at least the
/// node count.
///
/// # Safety
/// `mesh` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn nlfem_mesh_nodes(mesh: *const NlfemMesh, buf: *mut f64, len: usize) -> NlfemStatus {
    guard(|| {
        let m = deref(mesh, "mesh")?;
        copy_out(m.0.nodes(), buf, len)
    })
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), (NlfemStatus, String)> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len < src.len() {
        return Err((NlfemStatus::BufferTooSmall, format!("buffer holds {len}, need {}", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// # Safety
/// `mesh` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nlfem_mesh_free(mesh: *mut NlfemMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

fn new_kernel(make: impl FnOnce() -> nlfem::Result<Kernel>, out: *mut *mut NlfemKernel) -> NlfemStatus {
    guard(|| {
        let k = make().map_err(lib_err)?;
        unsafe { store(out, NlfemKernel(k)) }
    })
}

/// Fractional kernel `(2 - alpha) / delta^(2 - alpha) * s^(-1 - alpha)` on `(0, delta)`.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn nlfem_kernel_fractional(alpha: f64, delta: f64, out: *mut *mut NlfemKernel) -> NlfemStatus {
    new_kernel(|| Kernel::fractional(alpha, delta), out)
}

/// Constant kernel `3 / delta^3` on `(0, delta)`.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn nlfem_kernel_box(delta: f64, out: *mut *mut NlfemKernel) -> NlfemStatus {
    new_kernel(|| Kernel::constant_box(delta), out)
}

/// Fractional-Laplacian kernel `C_alpha s^(-1 - alpha)` cut off at `delta`.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn nlfem_kernel_truncated_infinite(alpha: f64, delta: f64, out: *mut *mut NlfemKernel) -> NlfemStatus {
    new_kernel(|| Kernel::truncated_infinite(alpha, delta), out)
}

/// # Safety
/// `kernel` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nlfem_kernel_free(kernel: *mut NlfemKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Stiffness matrix of `kernel` on `mesh`.
///
/// # Safety
/// `mesh` and `kernel` must be live handles and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn nlfem_assemble(
    mesh: *const NlfemMesh,
    kernel: *const NlfemKernel,
    out: *mut *mut NlfemMatrix,
) -> NlfemStatus {
    guard(|| {
        let m = deref(mesh, "mesh")?;
        let k = deref(kernel, "kernel")?;
        let s = assemble(&m.0, &k.0).map_err(lib_err)?;
        store(out, NlfemMatrix(s))
    })
}

/// Dimension (number of interior nodes).
///
/// # Safety
/// `matrix` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn nlfem_matrix_size(matrix: *const NlfemMatrix, out: *mut usize) -> NlfemStatus {
    guard(|| {
        let s = deref(matrix, "matrix")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.0.n();
        Ok(())
    })
}

/// Largest `|i - j|` with a stored entry.
///
/// # Safety
/// `matrix` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn nlfem_matrix_half_bandwidth(matrix: *const NlfemMatrix, out: *mut usize) -> NlfemStatus {
    guard(|| {
        let s = deref(matrix, "matrix")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.0.half_bandwidth();
        Ok(())
    })
}

/// Entry `(i, j)`, zero-based.
///
/// # Safety
/// `matrix` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn nlfem_matrix_get(matrix: *const NlfemMatrix, i: usize, j: usize, out: *mut f64) -> NlfemStatus {
    guard(|| {
        let s = deref(matrix, "matrix")?;
        let n = s.0.n();
        if i >= n || j >= n {
            return Err((NlfemStatus::InvalidArgument, format!("index ({i}, {j}) outside {n} x {n}")));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.0.get(i, j);
        Ok(())
    })
}

/// # Safety
/// `matrix` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nlfem_matrix_free(matrix: *mut NlfemMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// Solves the volume-constrained problem with forcing given by its values at
/// every node (`f_len` = node count). A null `kernel` selects `-u''`.
/// Writes the interior solution (node count - 2 values) to `u`.
///
/// # Safety
/// `mesh` must be a live handle, `kernel` null or live, `f` readable for
/// `f_len` doubles and `u` writable for `u_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nlfem_solve_bvp(
    mesh: *const NlfemMesh,
    kernel: *const NlfemKernel,
    f: *const f64,
    f_len: usize,
    u: *mut f64,
    u_len: usize,
) -> NlfemStatus {
    guard(|| {
        let m = deref(mesh, "mesh")?;
        if f.is_null() {
            return Err(null("f"));
        }
        let operator = match kernel.as_ref() {
            Some(k) => Operator::Nonlocal(k.0.clone()),
            None => Operator::Local,
        };
        let values = std::slice::from_raw_parts(f, f_len).to_vec();
        let problem = BvpProblem { mesh: m.0.clone(), operator, forcing: Forcing::NodalValues(values), lambda: 0.0 };
        let sol = solve_bvp(&problem).map_err(lib_err)?;
        copy_out(&sol.u, u, u_len)
    })
}
