//! C ABI over `ymb-core`.
//!
//! Objects are opaque handles created by `ymb_*_new`/`ymb_config_*` and
//! released by the matching `*_free`. Every fallible call returns a
//! [`YmbStatus`]; on failure `ymb_last_error` holds a message for the calling
//! thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ymb_core::cli::commands::{fixture_rotation, glue_at, Setup};
use ymb_core::cli::config::RunConfig;
use ymb_core::cli::{execute, Command};
use ymb_core::fields::quadrature::BubbleGrid;
use ymb_core::fields::ChartQuadrature;
use ymb_core::gluing::{j_eps, relative_chern, GluedConnection};
use ymb_core::instanton::{action_and_asd, InstantonParams};
use ymb_core::reduced::{MomentContext, MomentReport};
use ymb_core::YmbError;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum YmbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Solver = 3,
    Io = 4,
    Panic = 5,
}

/// Run configuration.
pub struct YmbConfig(RunConfig);

/// A glued connection at one ε together with what its expansion needs.
pub struct YmbGlued {
    glued: GluedConnection,
    report: MomentReport,
    grid: BubbleGrid,
}

/// Terms of `J_ε = 8π² + ε²YM(A̲_ε) + 𝓕_ε + r₁` at one parameter point.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct YmbExpansion {
    pub eps: f64,
    pub lambda: f64,
    pub j: f64,
    pub instanton: f64,
    pub small_action: f64,
    pub reduced: f64,
    pub r1: f64,
    pub chern: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(YmbStatus, String);

impl From<YmbError> for Failure {
    fn from(e: YmbError) -> Self {
        let status = match e {
            YmbError::InvalidParams(_) | YmbError::GridMismatch(..) | YmbError::SingularPoint => {
                YmbStatus::InvalidArgument
            }
            YmbError::Io(_) | YmbError::Cache(_) => YmbStatus::Io,
            _ => YmbStatus::Solver,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(YmbStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> YmbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => YmbStatus::Ok,
        Ok(Err(Failure(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("panic inside ymb".into());
            YmbStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Failure(YmbStatus::InvalidArgument, format!("{what}: {e}")))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ymb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn ymb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Default configuration. Never NULL.
#[no_mangle]
pub extern "C" fn ymb_config_default() -> *mut YmbConfig {
    Box::into_raw(Box::new(YmbConfig(RunConfig::default())))
}

/// Parses a JSON config (or a run manifest) from a string.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ymb_config_from_json(json: *const c_char, out: *mut *mut YmbConfig) -> YmbStatus {
    guard(|| {
        let text = c_str(json, "json")?;
        let mut v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Failure(YmbStatus::InvalidArgument, e.to_string()))?;
        if v.get("manifest_version").is_some() {
            v = v["config"].take();
        }
        let cfg: RunConfig =
            serde_json::from_value(v).map_err(|e| Failure(YmbStatus::InvalidArgument, e.to_string()))?;
        cfg.validate()?;
        put(out, Box::into_raw(Box::new(YmbConfig(cfg))), "out")
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ymb_config_free(cfg: *mut YmbConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Sets the output directory used by [`ymb_run`].
///
/// # Safety
/// `cfg` must be a live handle; `dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ymb_config_set_out(cfg: *mut YmbConfig, dir: *const c_char) -> YmbStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.0.out = c_str(dir, "dir")?.into();
        Ok(())
    })
}

/// `ε²𝓨𝓜_ε` and `ε²‖F⁻‖²` of the 1-instanton centered at `p[0..4]` with scale
/// `lambda`, over ℝ⁴ on the default bubble rule.
///
/// # Safety
/// `p` must point at 4 doubles; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ymb_instanton_action(
    p: *const f64,
    lambda: f64,
    action: *mut f64,
    anti_self_dual: *mut f64,
) -> YmbStatus {
    guard(|| {
        if p.is_null() {
            return Err(null("p"));
        }
        let p: [f64; 4] = std::slice::from_raw_parts(p, 4).try_into().expect("4 values");
        let ip = InstantonParams::new(p, lambda)?;
        let quad = ChartQuadrature::r4(ip.p, ip.lambda, &BubbleGrid::default());
        let (a, m) = action_and_asd(&ip, &quad);
        put(action, a, "action")?;
        put(anti_self_dual, m, "anti_self_dual")
    })
}

/// Glues the bubble of `cfg` (center `p`, rotation `g` or the optimal one,
/// `λ² = lambda_ratio·ε`) onto the small solution at `eps`.
///
/// # Safety
/// `cfg` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ymb_glued_new(cfg: *const YmbConfig, eps: f64, out: *mut *mut YmbGlued) -> YmbStatus {
    guard(|| {
        let cfg = &borrow(cfg, "cfg")?.0;
        let setup = Setup::new(cfg)?;
        let ctx = MomentContext::new(Some(&setup.d0), &cfg.grids.reduced_fine, cfg.glue.d0);
        let report = ctx.report(&cfg.p)?;
        let (g, _) = fixture_rotation(cfg, &report)?;
        let glued = glue_at(cfg, &setup, g, eps)?;
        let h = YmbGlued {
            glued,
            report,
            grid: cfg.grids.bubble.clone(),
        };
        put(out, Box::into_raw(Box::new(h)), "out")
    })
}

/// # Safety
/// `glued` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ymb_glued_free(glued: *mut YmbGlued) {
    if !glued.is_null() {
        drop(Box::from_raw(glued));
    }
}

/// Bubble scale `λ` of the glued connection.
///
/// # Safety
/// `glued` must be a live handle; `lambda` writable.
#[no_mangle]
pub unsafe extern "C" fn ymb_glued_lambda(glued: *const YmbGlued, lambda: *mut f64) -> YmbStatus {
    guard(|| put(lambda, borrow(glued, "glued")?.glued.q.lambda, "lambda"))
}

/// Relative Chern number against the small solution.
///
/// # Safety
/// `glued` must be a live handle; `chern` writable.
#[no_mangle]
pub unsafe extern "C" fn ymb_glued_relative_chern(glued: *const YmbGlued, chern: *mut f64) -> YmbStatus {
    guard(|| {
        let h = borrow(glued, "glued")?;
        put(chern, relative_chern(&h.glued, &h.grid), "chern")
    })
}

/// `J_ε` and its expansion terms.
///
/// # Safety
/// `glued` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ymb_glued_expansion(glued: *const YmbGlued, out: *mut YmbExpansion) -> YmbStatus {
    guard(|| {
        let h = borrow(glued, "glued")?;
        let r = j_eps(&h.glued, &h.report, &h.grid)?;
        let e = YmbExpansion {
            eps: r.q.eps,
            lambda: r.q.lambda,
            j: r.j,
            instanton: r.instanton,
            small_action: r.small_action,
            reduced: r.reduced,
            r1: r.r1,
            chern: r.chern,
        };
        put(out, e, "out")
    })
}

/// Runs a CLI command (`"instanton-check"`, `"landscape"`, `"expansion-study"`,
/// `"probe"`, `"small-solution"`) writing artifacts to the config's output
/// directory. `pass` receives whether every check passed.
///
/// # Safety
/// `cfg` must be a live handle; `command` NUL-terminated; `pass` writable.
#[no_mangle]
pub unsafe extern "C" fn ymb_run(cfg: *const YmbConfig, command: *const c_char, pass: *mut bool) -> YmbStatus {
    guard(|| {
        let cfg = &borrow(cfg, "cfg")?.0;
        let name = c_str(command, "command")?;
        let cmd = Command::from_name(name)
            .ok_or_else(|| Failure(YmbStatus::InvalidArgument, format!("unknown command {name:?}")))?;
        let ok = execute(cmd, cfg)?;
        put(pass, ok, "pass")
    })
}
