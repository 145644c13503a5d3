//! C interface to the `sgf` library.
//!
//! Every function returns an [`SgfStatus`]. On failure the message is kept per
//! thread and can be read with [`sgf_last_error_message`]. Handles are opaque
//! and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use sgf::analytic::{gf_disk_dirichlet, gf_free_space, gf_groundwater, gf_rectangle_dirichlet, GroundwaterParams, SeriesParams};
use sgf::config::RunConfig;
use sgf::estimate::{emax_with_count, sigma_g, GreensField, GridGeometry};
use sgf::io::{read_field, write_field};
use sgf::params::{predicted_variation, recommended_dt, walkers_for_variation};
use sgf::pipeline::{run_estimate, EstimateRun};
use sgf::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgfStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    GeometryMismatch = 3,
    Domain = 4,
    Runtime = 5,
    Io = 6,
    Parse = 7,
    Panic = 8,
}

/// Which field of a snapshot to fetch from a run.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgfFieldKind {
    Raw = 0,
    Smoothed = 1,
    Reference = 2,
}

/// Coefficients of the linearly accelerating groundwater model.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SgfGroundwaterParams {
    pub d0: f64,
    pub v0: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub gamma: f64,
}

impl From<SgfGroundwaterParams> for GroundwaterParams {
    fn from(p: SgfGroundwaterParams) -> Self {
        GroundwaterParams {
            d0: p.d0,
            v0: p.v0,
            a1: p.a1,
            a2: p.a2,
            b1: p.b1,
            b2: p.b2,
            psi1: p.psi1,
            psi2: p.psi2,
            gamma: p.gamma,
        }
    }
}

/// A Green's function sampled on a uniform grid.
pub struct SgfField(GreensField);

/// The result of an estimation run.
pub struct SgfRun(EstimateRun);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SgfStatus {
    match e {
        Error::Config { .. } => SgfStatus::Config,
        Error::GeometryMismatch(_) => SgfStatus::GeometryMismatch,
        Error::Domain(_) | Error::Precondition(_) => SgfStatus::Domain,
        Error::Io(_) => SgfStatus::Io,
        Error::Parse(_) => SgfStatus::Parse,
        _ => SgfStatus::Runtime,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SgfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgfStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            SgfStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            SgfStatus::Panic
        }
    }
}

fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    // SAFETY: callers pass either null or a valid, writable pointer.
    unsafe { p.as_mut() }.ok_or(Failure::Null(name))
}

fn input<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass either null or a valid pointer to a live object.
    unsafe { p.as_ref() }.ok_or(Failure::Null(name))
}

fn text<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    // SAFETY: non-null and nul-terminated by contract.
    Ok(unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Error::config(name, "not valid UTF-8"))?)
}

fn path<'a>(p: *const c_char, name: &'static str) -> Result<&'a Path, Failure> {
    text(p, name).map(Path::new)
}

/// Copies the last error message of this thread into `buf` (nul-terminated,
/// truncated to `len`). Returns the full message length excluding the nul.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sgf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Free-space Green's function of isotropic diffusion.
///
/// # Safety
/// `result` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sgf_gf_free_space(x: f64, y: f64, xp: f64, yp: f64, tau: f64, d0: f64, result: *mut f64) -> SgfStatus {
    guard(|| {
        *out(result, "result")? = gf_free_space([x, y], [xp, yp], tau, d0)?;
        Ok(())
    })
}

/// Green's function of a rectangle `[x0, x1] x [y0, y1]` with absorbing walls.
///
/// # Safety
/// `extents` must be null or point to 4 values; `result` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sgf_gf_rectangle_dirichlet(
    x: f64,
    y: f64,
    xp: f64,
    yp: f64,
    tau: f64,
    d0: f64,
    extents: *const f64,
    result: *mut f64,
) -> SgfStatus {
    guard(|| {
        let e = input(extents, "extents")?;
        let e = std::slice::from_raw_parts(e, 4);
        let v = gf_rectangle_dirichlet([x, y], [xp, yp], tau, d0, [e[0], e[1], e[2], e[3]], &SeriesParams::default())?;
        *out(result, "result")? = v;
        Ok(())
    })
}

/// Green's function of a disk with an absorbing wall.
///
/// # Safety
/// `result` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sgf_gf_disk_dirichlet(
    x: f64,
    y: f64,
    xp: f64,
    yp: f64,
    tau: f64,
    d0: f64,
    cx: f64,
    cy: f64,
    radius: f64,
    result: *mut f64,
) -> SgfStatus {
    guard(|| {
        let v = gf_disk_dirichlet([x, y], [xp, yp], tau, d0, [cx, cy], radius, &SeriesParams::default())?;
        *out(result, "result")? = v;
        Ok(())
    })
}

/// Groundwater Green's function, response at `(x, y, t)` to an impulse at `(xp, yp, tp)`.
///
/// # Safety
/// `params` must be null or valid; `result` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sgf_gf_groundwater(
    x: f64,
    y: f64,
    t: f64,
    xp: f64,
    yp: f64,
    tp: f64,
    params: *const SgfGroundwaterParams,
    result: *mut f64,
) -> SgfStatus {
    guard(|| {
        let p: GroundwaterParams = (*input(params, "params")?).into();
        *out(result, "result")? = gf_groundwater([x, y], t, [xp, yp], tp, &p)?;
        Ok(())
    })
}

/// Time step whose diffusion length covers one cell of area `da`.
///
/// # Safety
/// `result` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sgf_recommended_dt(da: f64, d0: f64, result: *mut f64) -> SgfStatus {
    guard(|| {
        *out(result, "result")? = recommended_dt(da, d0)?;
        Ok(())
    })
}

/// # Safety
/// `result` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sgf_predicted_variation(d0: f64, dt: f64, dx: f64, dy: f64, n_walkers: u64, result: *mut f64) -> SgfStatus {
    guard(|| {
        *out(result, "result")? = predicted_variation(d0, dt, dx, dy, n_walkers)?;
        Ok(())
    })
}

/// # Safety
/// `result` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sgf_walkers_for_variation(target: f64, d0: f64, dt: f64, dx: f64, dy: f64, result: *mut u64) -> SgfStatus {
    guard(|| {
        *out(result, "result")? = walkers_for_variation(target, d0, dt, dx, dy)?;
        Ok(())
    })
}

/// Creates a field from `nx * ny` row-major values (rows bottom to top).
///
/// # Safety
/// `extents` must point to 4 values, `values` to `nx * ny` values, `field` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgf_field_new(
    extents: *const f64,
    nx: usize,
    ny: usize,
    time: f64,
    values: *const f64,
    field: *mut *mut SgfField,
) -> SgfStatus {
    guard(|| {
        let e = std::slice::from_raw_parts(input(extents, "extents")?, 4);
        let g = GridGeometry::new(e[0], e[1], e[2], e[3], nx, ny)?;
        let v = std::slice::from_raw_parts(input(values, "values")?, g.len());
        let mut f = GreensField::zeros(g, time);
        f.values.copy_from_slice(v);
        *out(field, "field")? = Box::into_raw(Box::new(SgfField(f)));
        Ok(())
    })
}

/// Reads a field CSV.
///
/// # Safety
/// `file` must be a nul-terminated path; `field` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgf_field_read(file: *const c_char, field: *mut *mut SgfField) -> SgfStatus {
    guard(|| {
        let f = read_field(path(file, "file")?)?;
        *out(field, "field")? = Box::into_raw(Box::new(SgfField(f)));
        Ok(())
    })
}

/// Writes `<dir>/<name>.csv` and its JSON sidecar.
///
/// # Safety
/// `field` must be a live handle; `dir` and `name` nul-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sgf_field_write(field: *const SgfField, dir: *const c_char, name: *const c_char) -> SgfStatus {
    guard(|| {
        let f = input(field, "field")?;
        write_field(path(dir, "dir")?, text(name, "name")?, &f.0, serde_json::Value::Null)?;
        Ok(())
    })
}

/// Releases a field handle. Null is ignored.
///
/// # Safety
/// `field` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sgf_field_free(field: *mut SgfField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// # Safety
/// `field` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgf_field_dims(field: *const SgfField, nx: *mut usize, ny: *mut usize, time: *mut f64) -> SgfStatus {
    guard(|| {
        let g = input(field, "field")?.0.geometry;
        *out(nx, "nx")? = g.nx;
        *out(ny, "ny")? = g.ny;
        *out(time, "time")? = input(field, "field")?.0.time;
        Ok(())
    })
}

/// Copies the values (row-major, rows bottom to top) into `values`, which holds `len` entries.
///
/// # Safety
/// `field` must be a live handle; `values` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn sgf_field_values(field: *const SgfField, values: *mut f64, len: usize) -> SgfStatus {
    guard(|| {
        let f = &input(field, "field")?.0;
        if len != f.values.len() {
            return Err(Error::config("len", format!("field has {} values, buffer holds {len}", f.values.len())).into());
        }
        std::slice::from_raw_parts_mut(out(values, "values")?, len).copy_from_slice(&f.values);
        Ok(())
    })
}

/// Largest relative error over cells where `exact > floor_fraction * max(exact)`.
///
/// # Safety
/// Handles must be live; `emax` must be writable, `masked_cells` may be null.
#[no_mangle]
pub unsafe extern "C" fn sgf_emax(
    estimate: *const SgfField,
    exact: *const SgfField,
    floor_fraction: f64,
    emax: *mut f64,
    masked_cells: *mut usize,
) -> SgfStatus {
    guard(|| {
        let (e, n) = emax_with_count(&input(estimate, "estimate")?.0, &input(exact, "exact")?.0, floor_fraction)?;
        *out(emax, "emax")? = e;
        if let Some(m) = masked_cells.as_mut() {
            *m = n;
        }
        Ok(())
    })
}

/// Mean absolute deviation between an estimate and a reference.
///
/// # Safety
/// Handles must be live; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgf_sigma_g(estimate: *const SgfField, reference: *const SgfField, result: *mut f64) -> SgfStatus {
    guard(|| {
        *out(result, "result")? = sigma_g(&input(estimate, "estimate")?.0, &input(reference, "reference")?.0)?;
        Ok(())
    })
}

/// Runs the estimation described by a TOML config (or JSON manifest).
///
/// # Safety
/// `config` must be a nul-terminated path; `run` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgf_run_estimate(config: *const c_char, run: *mut *mut SgfRun) -> SgfStatus {
    guard(|| {
        let cfg = RunConfig::load(path(config, "config")?)?;
        let r = run_estimate(&cfg)?;
        *out(run, "run")? = Box::into_raw(Box::new(SgfRun(r)));
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle; `count` writable.
#[no_mangle]
pub unsafe extern "C" fn sgf_run_snapshot_count(run: *const SgfRun, count: *mut usize) -> SgfStatus {
    guard(|| {
        *out(count, "count")? = input(run, "run")?.0.snapshots.len();
        Ok(())
    })
}

/// Copies one field of snapshot `index` into a new handle. Fields that were
/// not produced (no smoothing or no reference configured) give `SGF_STATUS_CONFIG`.
///
/// # Safety
/// `run` must be a live handle; `field` writable.
#[no_mangle]
pub unsafe extern "C" fn sgf_run_snapshot_field(run: *const SgfRun, index: usize, kind: SgfFieldKind, field: *mut *mut SgfField) -> SgfStatus {
    guard(|| {
        let r = &input(run, "run")?.0;
        let s = r
            .snapshots
            .get(index)
            .ok_or_else(|| Error::config("index", format!("run has {} snapshots", r.snapshots.len())))?;
        let f = match kind {
            SgfFieldKind::Raw => Some(&s.raw),
            SgfFieldKind::Smoothed => s.smoothed.as_ref(),
            SgfFieldKind::Reference => s.reference.as_ref(),
        }
        .ok_or_else(|| Error::config("kind", "field not produced by this run"))?;
        *out(field, "field")? = Box::into_raw(Box::new(SgfField(f.clone())));
        Ok(())
    })
}

/// Releases a run handle. Null is ignored.
///
/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sgf_run_free(run: *mut SgfRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
