//! C ABI over the `qlnls` solvers.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `*_new`/constructor function and released by the matching `*_free`.
//! Fallible functions return one of the `QLNLS_*` status codes; the message
//! of the most recent failure on the calling thread is available through
//! [`qlnls_last_error`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qlnls::cli::{self, Command, RunConfig};
use qlnls::nash_moser::{control_nonlinear, solve_cauchy_nonlinear};
use qlnls::spectral::{Field, Grid, Traj};
use qlnls::{Error, C64};

pub const QLNLS_OK: i32 = 0;
/// Bad configuration key or value.
pub const QLNLS_ERR_CONFIG: i32 = 2;
/// A precondition or admissibility gate rejected the input.
pub const QLNLS_ERR_PRECONDITION: i32 = 3;
/// A numerical target was missed (accuracy, divergence, control).
pub const QLNLS_ERR_NUMERICAL: i32 = 4;
pub const QLNLS_ERR_NULL: i32 = 10;
/// Caller buffer shorter than required.
pub const QLNLS_ERR_BUFFER: i32 = 11;
pub const QLNLS_ERR_UTF8: i32 = 12;
pub const QLNLS_ERR_INDEX: i32 = 13;
pub const QLNLS_ERR_PANIC: i32 = 99;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> i32 {
    e.exit_code()
}

struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QLNLS_OK,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            QLNLS_ERR_PANIC
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(QLNLS_ERR_NULL, format!("{name} is null"))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(QLNLS_ERR_UTF8, format!("{name} is not UTF-8")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn qlnls_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Key/value run configuration.
pub struct QlnlsConfig {
    map: BTreeMap<String, String>,
}

impl QlnlsConfig {
    fn parsed(&self) -> Result<RunConfig, Failure> {
        Ok(RunConfig::from_map(&self.map)?)
    }
}

/// New configuration holding every default.
#[no_mangle]
pub extern "C" fn qlnls_config_new() -> *mut QlnlsConfig {
    Box::into_raw(Box::new(QlnlsConfig { map: BTreeMap::new() }))
}

/// # Safety
/// `cfg` must come from [`qlnls_config_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qlnls_config_free(cfg: *mut QlnlsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Sets one key; the whole configuration is re-validated and the change is
/// rolled back if it does not parse.
///
/// # Safety
/// `cfg` must be a live configuration; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn qlnls_config_set(cfg: *mut QlnlsConfig, key: *const c_char, value: *const c_char) -> i32 {
    guard(|| {
        let cfg = out(cfg, "cfg")?;
        let key = text(key, "key")?.to_string();
        let value = text(value, "value")?.to_string();
        let old = cfg.map.insert(key.clone(), value);
        if let Err(e) = RunConfig::from_map(&cfg.map) {
            match old {
                Some(v) => cfg.map.insert(key, v),
                None => cfg.map.remove(&key),
            };
            return Err(e.into());
        }
        Ok(())
    })
}

/// Reads `key = value` lines from a file into `cfg`.
///
/// # Safety
/// `cfg` must be a live configuration; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qlnls_config_load(cfg: *mut QlnlsConfig, path: *const c_char) -> i32 {
    guard(|| {
        let cfg = out(cfg, "cfg")?;
        let path = text(path, "path")?;
        let body = std::fs::read_to_string(path).map_err(|e| Failure(QLNLS_ERR_CONFIG, format!("{path}: {e}")))?;
        let mut map = cfg.map.clone();
        map.extend(cli::config::parse_text(&body)?);
        RunConfig::from_map(&map)?;
        cfg.map = map;
        Ok(())
    })
}

/// Runs a subcommand (`simulate`, `reduce`, `observe`, `control-lin`,
/// `control`, `cauchy`, `check`) and writes its artifacts to `out_dir`.
///
/// # Safety
/// `cfg` must be a live configuration; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn qlnls_run(cfg: *const QlnlsConfig, command: *const c_char, out_dir: *const c_char) -> i32 {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        let command: Command = text(command, "command")?.parse()?;
        let mut map = cfg.map.clone();
        map.insert("out".into(), text(out_dir, "out_dir")?.to_string());
        let rc = RunConfig::from_map(&map)?;
        cli::run_config(command, &rc, &RunConfig::resolved(&map))?;
        Ok(())
    })
}

/// Complex field sampled on an `n`-point periodic grid.
pub struct QlnlsField {
    field: Field,
}

/// Builds a field from node values `re[j] + i im[j]`, `j < n`.
///
/// # Safety
/// `re` and `im` must point to `n` readable doubles; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qlnls_field_new(
    n: usize,
    re: *const f64,
    im: *const f64,
    result: *mut *mut QlnlsField,
) -> i32 {
    guard(|| {
        let result = out(result, "result")?;
        *result = ptr::null_mut();
        if re.is_null() || im.is_null() {
            return Err(null("re/im"));
        }
        let grid = Grid::new(n)?;
        let re = std::slice::from_raw_parts(re, n);
        let im = std::slice::from_raw_parts(im, n);
        let values = re.iter().zip(im).map(|(&a, &b)| C64::new(a, b)).collect();
        *result = Box::into_raw(Box::new(QlnlsField {
            field: Field::from_values(&grid, values),
        }));
        Ok(())
    })
}

/// # Safety
/// `f` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qlnls_field_free(f: *mut QlnlsField) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Number of grid nodes, or 0 for a null handle.
///
/// # Safety
/// `f` must be null or a live field.
#[no_mangle]
pub unsafe extern "C" fn qlnls_field_len(f: *const QlnlsField) -> usize {
    f.as_ref().map(|f| f.field.n()).unwrap_or(0)
}

/// Copies the node values into `re`/`im` of length `len >= n`.
///
/// # Safety
/// `f` must be a live field; `re`, `im` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qlnls_field_values(f: *const QlnlsField, re: *mut f64, im: *mut f64, len: usize) -> i32 {
    guard(|| {
        let f = handle(f, "field")?;
        copy_values(&f.field, re, im, len)
    })
}

unsafe fn copy_values(f: &Field, re: *mut f64, im: *mut f64, len: usize) -> Result<(), Failure> {
    if re.is_null() || im.is_null() {
        return Err(null("re/im"));
    }
    if len < f.n() {
        return Err(Failure(QLNLS_ERR_BUFFER, format!("buffer of {len} for {} nodes", f.n())));
    }
    for (j, v) in f.values().iter().enumerate() {
        *re.add(j) = v.re;
        *im.add(j) = v.im;
    }
    Ok(())
}

/// `(sum_k <k>^{2s} |c_k|^2)^{1/2}`.
///
/// # Safety
/// `f` must be a live field; `result` writable.
#[no_mangle]
pub unsafe extern "C" fn qlnls_field_sobolev_norm(f: *const QlnlsField, s: f64, result: *mut f64) -> i32 {
    guard(|| {
        let f = handle(f, "field")?;
        if !(s >= 0.0) {
            return Err(Failure(QLNLS_ERR_PRECONDITION, format!("Sobolev index must be >= 0, got {s}")));
        }
        *out(result, "result")? = f.field.sobolev_norm(s);
        Ok(())
    })
}

/// Sampled trajectory `t_i = i T / (n_t - 1)`.
pub struct QlnlsTraj {
    traj: Traj,
}

/// # Safety
/// `t` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qlnls_traj_free(t: *mut QlnlsTraj) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of time samples, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live trajectory.
#[no_mangle]
pub unsafe extern "C" fn qlnls_traj_samples(t: *const QlnlsTraj) -> usize {
    t.as_ref().map(|t| t.traj.len()).unwrap_or(0)
}

/// Number of grid nodes per sample, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live trajectory.
#[no_mangle]
pub unsafe extern "C" fn qlnls_traj_nodes(t: *const QlnlsTraj) -> usize {
    t.as_ref().map(|t| t.traj.grid().n()).unwrap_or(0)
}

/// Copies the node values of sample `i`.
///
/// # Safety
/// `t` must be a live trajectory; `re`, `im` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qlnls_traj_sample(t: *const QlnlsTraj, i: usize, re: *mut f64, im: *mut f64, len: usize) -> i32 {
    guard(|| {
        let t = handle(t, "traj")?;
        let s = t
            .traj
            .samples
            .get(i)
            .ok_or_else(|| Failure(QLNLS_ERR_INDEX, format!("sample {i} of {}", t.traj.len())))?;
        copy_values(s, re, im, len)
    })
}

/// Result of a nonlinear solve.
pub struct QlnlsSolution {
    state: Traj,
    control: Option<Traj>,
    residual: f64,
    check: f64,
    iterations: usize,
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qlnls_solution_free(s: *mut QlnlsSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Final Nash-Moser residual.
///
/// # Safety
/// `s` must be a live solution.
#[no_mangle]
pub unsafe extern "C" fn qlnls_solution_residual(s: *const QlnlsSolution) -> f64 {
    s.as_ref().map(|s| s.residual).unwrap_or(f64::NAN)
}

/// Independent cross-check: the re-simulated endpoint miss for control, the
/// relative gap to the direct integrator for the Cauchy problem.
///
/// # Safety
/// `s` must be a live solution.
#[no_mangle]
pub unsafe extern "C" fn qlnls_solution_check(s: *const QlnlsSolution) -> f64 {
    s.as_ref().map(|s| s.check).unwrap_or(f64::NAN)
}

/// # Safety
/// `s` must be a live solution.
#[no_mangle]
pub unsafe extern "C" fn qlnls_solution_iterations(s: *const QlnlsSolution) -> usize {
    s.as_ref().map(|s| s.iterations).unwrap_or(0)
}

/// New handle on the state trajectory.
///
/// # Safety
/// `s` must be a live solution; `result` writable.
#[no_mangle]
pub unsafe extern "C" fn qlnls_solution_state(s: *const QlnlsSolution, result: *mut *mut QlnlsTraj) -> i32 {
    guard(|| {
        let s = handle(s, "solution")?;
        *out(result, "result")? = Box::into_raw(Box::new(QlnlsTraj { traj: s.state.clone() }));
        Ok(())
    })
}

/// New handle on the masked control `chi f`; fails with `QLNLS_ERR_INDEX`
/// for a Cauchy solution.
///
/// # Safety
/// `s` must be a live solution; `result` writable.
#[no_mangle]
pub unsafe extern "C" fn qlnls_solution_control(s: *const QlnlsSolution, result: *mut *mut QlnlsTraj) -> i32 {
    guard(|| {
        let s = handle(s, "solution")?;
        let result = out(result, "result")?;
        *result = ptr::null_mut();
        let c = s
            .control
            .clone()
            .ok_or_else(|| Failure(QLNLS_ERR_INDEX, "solution carries no control".into()))?;
        *result = Box::into_raw(Box::new(QlnlsTraj { traj: c }));
        Ok(())
    })
}

fn check_grid(cfg: &RunConfig, f: &Field, name: &str) -> Result<(), Failure> {
    if f.n() != cfg.n {
        let e = Error::GridMismatch(f.n(), cfg.n);
        return Err(Failure(status_of(&e), format!("{name}: {e}")));
    }
    Ok(())
}

/// Steers `u_in` to `u_end` with a control supported in the configured arc.
///
/// # Safety
/// Handles must be live; `result` writable.
#[no_mangle]
pub unsafe extern "C" fn qlnls_control(
    cfg: *const QlnlsConfig,
    u_in: *const QlnlsField,
    u_end: *const QlnlsField,
    result: *mut *mut QlnlsSolution,
) -> i32 {
    guard(|| {
        let result = out(result, "result")?;
        *result = ptr::null_mut();
        let rc = handle(cfg, "cfg")?.parsed()?;
        let u_in = &handle(u_in, "u_in")?.field;
        let u_end = &handle(u_end, "u_end")?.field;
        check_grid(&rc, u_in, "u_in")?;
        check_grid(&rc, u_end, "u_end")?;
        let g = qlnls::hamiltonian::builtin(&rc.density, rc.kappa0)?;
        let cut = qlnls::hum::make_cutoff(&rc.grid(), rc.arc.0, rc.arc.1, rc.plateau)?;
        let sol = control_nonlinear(g.as_ref(), u_in, u_end, rc.times(), &cut, &rc.nonlinear_options())?;
        let f = sol.state.f.as_ref().expect("control iterate");
        *result = Box::into_raw(Box::new(QlnlsSolution {
            control: Some(cut.apply_traj(f)),
            residual: sol.state.final_residual,
            check: sol.resimulated_endpoint,
            iterations: sol.state.log.len(),
            state: sol.state.u,
        }));
        Ok(())
    })
}

/// Solves the nonlinear Cauchy problem from `u_in` over the configured horizon.
///
/// # Safety
/// Handles must be live; `result` writable.
#[no_mangle]
pub unsafe extern "C" fn qlnls_cauchy(
    cfg: *const QlnlsConfig,
    u_in: *const QlnlsField,
    result: *mut *mut QlnlsSolution,
) -> i32 {
    guard(|| {
        let result = out(result, "result")?;
        *result = ptr::null_mut();
        let rc = handle(cfg, "cfg")?.parsed()?;
        let u_in = &handle(u_in, "u_in")?.field;
        check_grid(&rc, u_in, "u_in")?;
        let g = qlnls::hamiltonian::builtin(&rc.density, rc.kappa0)?;
        let sol = solve_cauchy_nonlinear(g.as_ref(), u_in, rc.times(), &rc.nonlinear_options())?;
        *result = Box::into_raw(Box::new(QlnlsSolution {
            control: None,
            residual: sol.state.final_residual,
            check: sol.cross_check,
            iterations: sol.state.log.len(),
            state: sol.state.u,
        }));
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qlnls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
