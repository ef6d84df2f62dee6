//! C ABI for `ionprobe`.
//!
//! Every fallible function returns an [`IonprobeStatus`]; on failure the
//! message is available from [`ionprobe_last_error`] on the same thread.
//! Outputs are written through caller-provided pointers. Handles are opaque
//! and must be released with their `_free` function. Strings returned by the
//! library are released with [`ionprobe_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ionprobe::couplings::{self, CouplingKind};
use ionprobe::dynamics::{self, DriveSet};
use ionprobe::engineering::{self, EngineeringProblem, EngineeringSolution};
use ionprobe::fock::{self, MotionalState, ProbeState, Sign};
use ionprobe::multi_ion::{self, ChainConfig};
use ionprobe::protocols::{self, CouplingMean, MeasurementPlan, MomentEstimate, MomentRoute, Shots, TwoEtaModel};
use ionprobe::reconstruction::{self, MomentVector};
use ionprobe::{cli, CMatrix, Error, C64};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IonprobeStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Singular = 3,
    IllConditioned = 4,
    Precision = 5,
    Undefined = 6,
    Inconsistent = 7,
    Resource = 8,
    Parse = 9,
    Io = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IonprobeCoupling {
    F0 = 0,
    F1 = 1,
}

impl From<IonprobeCoupling> for CouplingKind {
    fn from(k: IonprobeCoupling) -> Self {
        match k {
            IonprobeCoupling::F0 => CouplingKind::F0,
            IonprobeCoupling::F1 => CouplingKind::F1,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IonprobeTwoEtaModel {
    Bare = 0,
    DebyeWaller = 1,
}

/// Motional density matrix.
pub struct IonprobeMotionalState {
    inner: MotionalState,
}

/// Solved laser-weight engineering problem.
pub struct IonprobeEngineering {
    inner: EngineeringSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> IonprobeStatus {
    match err {
        Error::Domain(_) => IonprobeStatus::Domain,
        Error::Singular(_) => IonprobeStatus::Singular,
        Error::IllConditioned { .. } => IonprobeStatus::IllConditioned,
        Error::Precision(_) => IonprobeStatus::Precision,
        Error::Undefined(_) => IonprobeStatus::Undefined,
        Error::Inconsistent(_) => IonprobeStatus::Inconsistent,
        Error::Resource { .. } => IonprobeStatus::Resource,
        Error::Parse(_) => IonprobeStatus::Parse,
        Error::Io(_) => IonprobeStatus::Io,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
    Buffer { needed: usize, given: usize },
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn run(f: impl FnOnce() -> Result<(), Fail>) -> IonprobeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IonprobeStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            IonprobeStatus::NullPointer
        }
        Ok(Err(Fail::Buffer { needed, given })) => {
            set_error(format!("buffer holds {given} values, {needed} needed"));
            IonprobeStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("internal panic".into());
            IonprobeStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write<T>(p: *mut T, v: T, what: &'static str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn fill(out: *mut f64, len: usize, values: &[f64]) -> Result<(), Fail> {
    if len < values.len() {
        return Err(Fail::Buffer { needed: values.len(), given: len });
    }
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(Fail::Null("output buffer"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

unsafe fn state_ref<'a>(s: *const IonprobeMotionalState) -> Result<&'a MotionalState, Fail> {
    s.as_ref().map(|s| &s.inner).ok_or(Fail::Null("state"))
}

fn sign_of(sign: i32) -> Result<Sign, Fail> {
    match sign {
        1 => Ok(Sign::Plus),
        -1 => Ok(Sign::Minus),
        other => Err(Fail::Lib(Error::Domain(format!("probe sign must be +1 or -1, got {other}")))),
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ionprobe_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ionprobe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

unsafe fn emit_state(out: *mut *mut IonprobeMotionalState, s: MotionalState) -> Result<(), Fail> {
    write(out, Box::into_raw(Box::new(IonprobeMotionalState { inner: s })), "out")
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_state_fock(n: usize, dim: usize, out: *mut *mut IonprobeMotionalState) -> IonprobeStatus {
    run(|| emit_state(out, fock::fock_state(n, dim)?))
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_state_coherent(
    re: f64,
    im: f64,
    dim: usize,
    out: *mut *mut IonprobeMotionalState,
) -> IonprobeStatus {
    run(|| emit_state(out, fock::coherent_state(C64::new(re, im), dim)?))
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_state_thermal(nbar: f64, dim: usize, out: *mut *mut IonprobeMotionalState) -> IonprobeStatus {
    run(|| emit_state(out, fock::thermal_state(nbar, dim)?))
}

/// Density matrix from row-major real and imaginary parts, `dim*dim` each.
///
/// # Safety
/// `re` and `im` must point to `dim*dim` values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_state_from_matrix(
    re: *const f64,
    im: *const f64,
    dim: usize,
    out: *mut *mut IonprobeMotionalState,
) -> IonprobeStatus {
    run(|| {
        let n = dim.checked_mul(dim).ok_or(Fail::Lib(Error::Domain("dimension overflows".into())))?;
        let re = slice(re, n, "re")?;
        let im = slice(im, n, "im")?;
        let m = CMatrix::from_fn(dim, dim, |r, c| C64::new(re[r * dim + c], im[r * dim + c]));
        emit_state(out, MotionalState::from_matrix(m)?)
    })
}

/// # Safety
/// `state` must come from an `ionprobe_state_*` constructor (or be null)
/// and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_state_free(state: *mut IonprobeMotionalState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Fock dimension of a state, or 0 for null.
///
/// # Safety
/// `state` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_state_dim(state: *const IonprobeMotionalState) -> usize {
    state.as_ref().map_or(0, |s| s.inner.dim())
}

/// Diagonal populations into `out` (length at least the dimension).
///
/// # Safety
/// `state` must be a live handle; `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_state_populations(
    state: *const IonprobeMotionalState,
    out: *mut f64,
    len: usize,
) -> IonprobeStatus {
    run(|| fill(out, len, &state_ref(state)?.populations()))
}

/// `⟨n̂ᵖ⟩`.
///
/// # Safety
/// `state` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_number_moment(state: *const IonprobeMotionalState, p: u32, out: *mut f64) -> IonprobeStatus {
    run(|| write(out, fock::number_moment(state_ref(state)?, p), "out"))
}

/// Population in the top `k_tail` Fock levels.
///
/// # Safety
/// `state` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_leakage(state: *const IonprobeMotionalState, k_tail: usize, out: *mut f64) -> IonprobeStatus {
    run(|| write(out, fock::leakage(state_ref(state)?, k_tail)?, "out"))
}

/// `f₀(n;η)` or `f₁(n;η)` for `n < dim` by the stable recurrence.
///
/// # Safety
/// `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_coupling_diag(
    kind: IonprobeCoupling,
    eta: f64,
    dim: usize,
    out: *mut f64,
    len: usize,
) -> IonprobeStatus {
    run(|| fill(out, len, &couplings::coupling_diag(kind.into(), eta, dim)?.values))
}

/// Independent Laguerre evaluation of the same diagonal.
///
/// # Safety
/// `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_laguerre_oracle(
    kind: IonprobeCoupling,
    eta: f64,
    dim: usize,
    out: *mut f64,
    len: usize,
) -> IonprobeStatus {
    run(|| fill(out, len, &couplings::laguerre_oracle(eta, dim, kind.into())?.values))
}

/// Coefficient `a_p^m` of the falling-factorial expansion. Values beyond
/// `u64` report a precision error.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_a_pm(p: u32, m: u32, out: *mut u64) -> IonprobeStatus {
    run(|| {
        let v = couplings::a_pm(p as usize, m as usize)?;
        let v = u64::try_from(v).map_err(|_| Error::Precision(format!("a_{p}^{m} exceeds 64 bits")))?;
        write(out, v, "out")
    })
}

/// Taylor coefficients `c_0 … c_{p_max}` of `Σ_j w_j f₀(n;η_j)` in powers of `n`.
///
/// # Safety
/// `weights` and `etas` must hold `n_lasers` values; `out` must hold `len`.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_taylor_coeffs(
    weights: *const f64,
    etas: *const f64,
    n_lasers: usize,
    p_max: usize,
    m_max: usize,
    out: *mut f64,
    len: usize,
) -> IonprobeStatus {
    run(|| {
        let w = slice(weights, n_lasers, "weights")?;
        let e = slice(etas, n_lasers, "etas")?;
        fill(out, len, &couplings::taylor_coeffs(w, e, p_max, m_max)?.c)
    })
}

/// Solves for laser weights whose coupling has Taylor coefficients `target`.
///
/// # Safety
/// `etas` and `target` must hold `n_lasers` values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_engineer(
    kind: IonprobeCoupling,
    etas: *const f64,
    target: *const f64,
    n_lasers: usize,
    out: *mut *mut IonprobeEngineering,
) -> IonprobeStatus {
    run(|| {
        let e = slice(etas, n_lasers, "etas")?.to_vec();
        let t = slice(target, n_lasers, "target")?.to_vec();
        let sol = engineering::solve_weights(&EngineeringProblem::with_kind(kind.into(), e, t)?)?;
        write(out, Box::into_raw(Box::new(IonprobeEngineering { inner: sol })), "out")
    })
}

/// # Safety
/// `sol` must come from [`ionprobe_engineer`] (or be null) and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_engineering_free(sol: *mut IonprobeEngineering) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Normalized weights `Ω_j/Ω_L` (largest magnitude 1), the scale that
/// converts a measured slope back to the target, and the condition number.
///
/// # Safety
/// `sol` must be a live handle; `ratios` must hold `len` values; the other
/// outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_engineering_result(
    sol: *const IonprobeEngineering,
    ratios: *mut f64,
    len: usize,
    scale: *mut f64,
    condition_number: *mut f64,
) -> IonprobeStatus {
    run(|| {
        let s = &sol.as_ref().ok_or(Fail::Null("solution"))?.inner;
        fill(ratios, len, &s.physical_ratios())?;
        write(scale, s.scale, "scale")?;
        write(condition_number, s.condition_number, "condition_number")
    })
}

unsafe fn carrier_drives(weights: *const f64, etas: *const f64, n: usize) -> Result<DriveSet, Fail> {
    Ok(DriveSet::carrier(slice(weights, n, "weights")?.to_vec(), slice(etas, n, "etas")?.to_vec())?)
}

/// Exact carrier slope `∓sinφ⟨F₀⟩` for probe sign `sign` (+1 or −1).
///
/// # Safety
/// `state` must be a live handle; `weights`/`etas` must hold `n_lasers`
/// values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_carrier_slope(
    state: *const IonprobeMotionalState,
    sign: i32,
    phi: f64,
    weights: *const f64,
    etas: *const f64,
    n_lasers: usize,
    out: *mut f64,
) -> IonprobeStatus {
    run(|| {
        let drives = carrier_drives(weights, etas, n_lasers)?;
        let v = dynamics::analytic_slope(&ProbeState::new(sign_of(sign)?, phi), state_ref(state)?, &drives)?;
        write(out, v, "out")
    })
}

/// Carrier slope estimated from simulated populations on the default grid.
/// `shots == 0` uses the exact commutator slope; otherwise each grid point
/// is sampled with that many shots from a generator keyed by `seed`.
///
/// # Safety
/// As [`ionprobe_carrier_slope`]; `stderr` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_estimate_carrier_slope(
    state: *const IonprobeMotionalState,
    sign: i32,
    phi: f64,
    weights: *const f64,
    etas: *const f64,
    n_lasers: usize,
    shots: u64,
    seed: u64,
    value: *mut f64,
    stderr: *mut f64,
) -> IonprobeStatus {
    run(|| {
        let s = state_ref(state)?;
        let h = dynamics::build_carrier(&carrier_drives(weights, etas, n_lasers)?, s.dim())?;
        let plan = MeasurementPlan::with_shots(if shots == 0 { Shots::Exact } else { Shots::Finite(shots) }, seed);
        let est = protocols::estimate_slope(&h, &ProbeState::new(sign_of(sign)?, phi), s, &plan)?;
        write(value, est.value, "value")?;
        write(stderr, est.stderr, "stderr")
    })
}

/// `(⟨n̂⟩, ⟨n̂²⟩)` from two `⟨f₀⟩` observations. `out` receives
/// `[n1, n1_stderr, n2, n2_stderr]`.
///
/// # Safety
/// `out` must hold 4 values.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_moments_two_eta(
    eta1: f64,
    f1: f64,
    f1_stderr: f64,
    eta2: f64,
    f2: f64,
    f2_stderr: f64,
    model: IonprobeTwoEtaModel,
    out: *mut f64,
) -> IonprobeStatus {
    run(|| {
        let model = match model {
            IonprobeTwoEtaModel::Bare => TwoEtaModel::Bare,
            IonprobeTwoEtaModel::DebyeWaller => TwoEtaModel::DebyeWaller,
        };
        let (a, b) = protocols::moments_two_eta(
            CouplingMean { eta: eta1, value: f1, stderr: f1_stderr },
            CouplingMean { eta: eta2, value: f2, stderr: f2_stderr },
            model,
        )?;
        fill(out, 4, &[a.value, a.stderr, b.value, b.stderr])
    })
}

/// Fano-Mandel `Q` with propagated standard error.
///
/// # Safety
/// `q` and `q_stderr` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_fano_mandel(
    n1: f64,
    n1_stderr: f64,
    n2: f64,
    n2_stderr: f64,
    q: *mut f64,
    q_stderr: *mut f64,
) -> IonprobeStatus {
    run(|| {
        let m = |p, value, stderr| MomentEstimate { p, value, stderr, route: MomentRoute::TwoEta };
        let r = protocols::fano_mandel(&m(1, n1, n1_stderr), &m(2, n2, n2_stderr))?;
        write(q, r.q, "q")?;
        write(q_stderr, r.stderr, "q_stderr")
    })
}

/// Distribution on `{0 … support−1}` from moments `m_0 … m_{support−1}`.
///
/// # Safety
/// `moments` and `probs` must hold `support` values; the scalar outputs
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_moments_to_distribution(
    moments: *const f64,
    support: usize,
    probs: *mut f64,
    condition_number: *mut f64,
    negativity: *mut f64,
) -> IonprobeStatus {
    run(|| {
        let m = MomentVector::new(slice(moments, support, "moments")?.to_vec())?;
        let d = reconstruction::moments_to_distribution(&m, support)?;
        fill(probs, support, &d.probs)?;
        write(condition_number, d.condition_number, "condition_number")?;
        write(negativity, d.negativity, "negativity")
    })
}

/// Collective slope of ion `ion` (zero-based) in an `n_ions` chain, other
/// ions in the ground state. `modes` is the joint motional state with mode 0
/// most significant.
///
/// # Safety
/// `mode_dims` and `mode_etas` must hold `n_ions` values; `modes` must be a
/// live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_collective_slope(
    n_ions: usize,
    mode_dims: *const usize,
    mode_etas: *const f64,
    ion: usize,
    sign: i32,
    phi: f64,
    modes: *const IonprobeMotionalState,
    out: *mut f64,
) -> IonprobeStatus {
    run(|| {
        if n_ions == 0 {
            return Err(Error::Domain("chain needs at least one ion".into()).into());
        }
        if mode_dims.is_null() {
            return Err(Fail::Null("mode_dims"));
        }
        let dims = std::slice::from_raw_parts(mode_dims, n_ions).to_vec();
        let config = ChainConfig::new(dims, slice(mode_etas, n_ions, "mode_etas")?.to_vec())?;
        let others = 1usize << (n_ions - 1);
        let mut rho_a = CMatrix::zeros(others, others);
        rho_a[(0, 0)] = C64::new(1.0, 0.0);
        let probe = ProbeState::new(sign_of(sign)?, phi);
        write(out, multi_ion::collective_slope(&config, ion, &probe, &rho_a, state_ref(modes)?)?, "out")
    })
}

/// Runs a scenario given as JSON text; relative file paths resolve against
/// the working directory. On success `*report` receives the JSON report,
/// to be released with [`ionprobe_string_free`].
///
/// # Safety
/// `scenario_json` must be a NUL-terminated string; `report` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_run_scenario_json(scenario_json: *const c_char, report: *mut *mut c_char) -> IonprobeStatus {
    run(|| {
        if scenario_json.is_null() {
            return Err(Fail::Null("scenario_json"));
        }
        let text = CStr::from_ptr(scenario_json)
            .to_str()
            .map_err(|_| Error::Parse("scenario is not valid UTF-8".into()))?;
        let r = cli::run_scenario(&cli::parse_scenario(text)?, Path::new("."))?;
        let c = CString::new(r.to_json()).map_err(|_| Error::Parse("report contains NUL".into()))?;
        write(report, c.into_raw(), "report")
    })
}

/// # Safety
/// `s` must come from this library (or be null) and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ionprobe_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
