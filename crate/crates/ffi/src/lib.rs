//! C ABI for the surfhps solver.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every function returns a [`SurfhpsStatus`];
//! on failure a message is available from [`surfhps_last_error`] on the
//! same thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use surfhps::apps::{node_weights, project_mean_zero};
use surfhps::cli::MeshFamily;
use surfhps::hierarchy::Factorization;
use surfhps::mesh::{load_mesh, SurfaceMesh};
use surfhps::solver::solve;
use surfhps::surface_ops::CoefficientField;
use surfhps::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfhpsStatus {
    Ok = 0,
    /// Null pointer, wrong buffer length or malformed string.
    InvalidArgument = 1,
    /// Mesh, file or configuration problem.
    InputError = 2,
    /// Singular operator, divergence or other numerical failure.
    NumericalError = 3,
    /// Internal panic caught at the boundary.
    Panic = 4,
}

/// Surface mesh handle.
pub struct SurfhpsMesh {
    mesh: SurfaceMesh,
}

/// Factored operator handle; owns a copy of its mesh.
pub struct SurfhpsFactorization {
    fact: Factorization<f64>,
    weights: Vec<Vec<f64>>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Argument(String),
    Solver(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Solver(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SurfhpsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SurfhpsStatus::Ok,
        Ok(Err(Failure::Argument(m))) => {
            set_error(m);
            SurfhpsStatus::InvalidArgument
        }
        Ok(Err(Failure::Solver(e))) => {
            set_error(e.to_string());
            if e.is_numerical() {
                SurfhpsStatus::NumericalError
            } else {
                SurfhpsStatus::InputError
            }
        }
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {m}"));
            SurfhpsStatus::Panic
        }
    }
}

fn arg(msg: &str) -> Failure {
    Failure::Argument(msg.to_string())
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| arg(&format!("{name} is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| arg(&format!("{name} is null")))
}

unsafe fn string<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(arg(&format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| arg(&format!("{name} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const c_double, len: usize, want: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len != want {
        return Err(arg(&format!("{name} has length {len}, expected {want}")));
    }
    if want == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(arg(&format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut c_double, len: usize, want: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if len != want {
        return Err(arg(&format!("{name} has length {len}, expected {want}")));
    }
    if want == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(arg(&format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next surfhps call on the same thread.
#[no_mangle]
pub extern "C" fn surfhps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn surfhps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a mesh from a generator family (`sphere`, `cube`, `blob`,
/// `torus`, `deformed-torus`, `twisted-torus`).
///
/// # Safety
/// `family` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfhps_mesh_generate(
    family: *const c_char,
    refine: usize,
    order: usize,
    out: *mut *mut SurfhpsMesh,
) -> SurfhpsStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let family: MeshFamily = string(family, "family")?.parse()?;
        let mesh = family.generate(refine, order)?;
        *out = Box::into_raw(Box::new(SurfhpsMesh { mesh }));
        Ok(())
    })
}

/// Reads a mesh file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfhps_mesh_load(path: *const c_char, out: *mut *mut SurfhpsMesh) -> SurfhpsStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let mesh = load_mesh(Path::new(string(path, "path")?))?;
        *out = Box::into_raw(Box::new(SurfhpsMesh { mesh }));
        Ok(())
    })
}

/// # Safety
/// `mesh` must come from a surfhps constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn surfhps_mesh_free(mesh: *mut SurfhpsMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Element count, nodes per element and closedness (1 for closed).
///
/// # Safety
/// `mesh` must be a valid handle; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn surfhps_mesh_info(
    mesh: *const SurfhpsMesh,
    elements: *mut usize,
    nodes_per_element: *mut usize,
    closed: *mut i32,
) -> SurfhpsStatus {
    guard(|| {
        let m = &deref(mesh, "mesh")?.mesh;
        let p = m.order();
        if let Some(e) = elements.as_mut() {
            *e = m.len();
        }
        if let Some(n) = nodes_per_element.as_mut() {
            *n = (p + 1) * (p + 1);
        }
        if let Some(c) = closed.as_mut() {
            *c = i32::from(m.closed());
        }
        Ok(())
    })
}

/// Writes node coordinates as `x y z` triples, element by element;
/// `len` must be three times the node count.
///
/// # Safety
/// `mesh` must be a valid handle and `xyz` point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn surfhps_mesh_nodes(mesh: *const SurfhpsMesh, xyz: *mut c_double, len: usize) -> SurfhpsStatus {
    guard(|| {
        let m = &deref(mesh, "mesh")?.mesh;
        let out = slice_mut(xyz, len, 3 * m.num_nodes(), "xyz")?;
        for (dst, x) in out.chunks_exact_mut(3).zip(m.elements().iter().flat_map(|e| &e.nodes)) {
            dst.copy_from_slice(x);
        }
        Ok(())
    })
}

/// Factors `Δ_Γ + shift`; `shift = 0` gives the Laplace–Beltrami operator.
///
/// # Safety
/// `mesh` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfhps_factor_helmholtz(
    mesh: *const SurfhpsMesh,
    shift: c_double,
    out: *mut *mut SurfhpsFactorization,
) -> SurfhpsStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let m = &deref(mesh, "mesh")?.mesh;
        if !shift.is_finite() {
            return Err(arg("shift must be finite"));
        }
        let fact = Factorization::new(m, &CoefficientField::helmholtz(shift))?;
        let weights = node_weights(m)?;
        *out = Box::into_raw(Box::new(SurfhpsFactorization { fact, weights }));
        Ok(())
    })
}

/// # Safety
/// `fact` must come from a surfhps constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn surfhps_factorization_free(fact: *mut SurfhpsFactorization) {
    if !fact.is_null() {
        drop(Box::from_raw(fact));
    }
}

/// Number of Dirichlet boundary nodes; zero on closed surfaces.
///
/// # Safety
/// `fact` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfhps_factorization_boundary_count(
    fact: *const SurfhpsFactorization,
    out: *mut usize,
) -> SurfhpsStatus {
    guard(|| {
        let n = deref(fact, "fact")?.fact.n_root_boundary();
        *deref_mut(out, "out")? = n;
        Ok(())
    })
}

/// Dirichlet node coordinates as `x y z` triples; `len` is three times the
/// boundary count.
///
/// # Safety
/// `fact` must be a valid handle and `xyz` point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn surfhps_factorization_boundary_points(
    fact: *const SurfhpsFactorization,
    xyz: *mut c_double,
    len: usize,
) -> SurfhpsStatus {
    guard(|| {
        let f = &deref(fact, "fact")?.fact;
        let out = slice_mut(xyz, len, 3 * f.n_root_boundary(), "xyz")?;
        for (dst, x) in out.chunks_exact_mut(3).zip(f.root_points()) {
            dst.copy_from_slice(x);
        }
        Ok(())
    })
}

/// Solves with load `f` at every node (mesh node order) and Dirichlet data
/// `g` at the boundary points, writing nodal values to `u`. For the closed
/// Laplace–Beltrami operator the load's mean is removed and the returned
/// solution has zero mean.
///
/// # Safety
/// `fact` must be a valid handle; `f`, `u` hold one double per mesh node
/// and `g` one per boundary point (`g` may be null when that count is 0).
#[no_mangle]
pub unsafe extern "C" fn surfhps_solve(
    fact: *mut SurfhpsFactorization,
    f: *const c_double,
    f_len: usize,
    g: *const c_double,
    g_len: usize,
    u: *mut c_double,
    u_len: usize,
) -> SurfhpsStatus {
    guard(|| {
        let h = deref_mut(fact, "fact")?;
        let mesh = h.fact.mesh();
        let nodes = mesh.num_nodes();
        let per = nodes / mesh.len();
        let f = slice(f, f_len, nodes, "f")?;
        let g = slice(g, g_len, h.fact.n_root_boundary(), "g")?;
        let out = slice_mut(u, u_len, nodes, "u")?;
        let mut load: Vec<Vec<f64>> = f.chunks(per).map(<[f64]>::to_vec).collect();
        let fix = h.fact.fix_applied();
        if fix {
            project_mean_zero(&h.weights, &mut load);
        }
        h.fact.update_rhs(&load)?;
        let mut values = solve(&h.fact, g)?.values;
        if fix {
            project_mean_zero(&h.weights, &mut values);
        }
        for (dst, v) in out.iter_mut().zip(values.iter().flatten()) {
            *dst = *v;
        }
        Ok(())
    })
}
