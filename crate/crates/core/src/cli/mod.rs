//! Batch driver: run a scenario file, produce a JSON report and optional
//! sweep table.
//!
//! Exit codes: 0 success, 1 tolerance or numerical failure, 2 usage, parse
//! or domain error, 3 resource limit.

pub mod scenario;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use crate::dynamics::{self, DriveKind, DriveSet};
use crate::engineering::{self, EngineeringProblem};
use crate::error::{Error, Result};
use crate::fock::{self, MotionalState, ProbeState};
use crate::multi_ion::{self, ChainConfig};
use crate::protocols::{self, EngineeredConfig, MeasurementPlan, MomentEstimate, QuadratureConfig, Shots};
use crate::reconstruction::{self, MomentVector};

pub use scenario::{load_scenario, parse_scenario, Scenario, StateSpec, SweepAxis, SweepSpec, TaskSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse(_) | Error::Domain(_) | Error::Io(_) => EXIT_USAGE,
        Error::Resource { .. } => EXIT_RESOURCE,
        _ => EXIT_FAILED,
    }
}

/// One pass/fail comparison in a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub oracle: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, oracle: f64, tolerance: f64) -> Self {
        let deviation = (value - oracle).abs();
        Check { name: name.into(), value, oracle, deviation, tolerance, pass: deviation <= tolerance }
    }

    fn relative(name: impl Into<String>, value: f64, oracle: f64, tolerance: f64) -> Self {
        Check::new(name, value, oracle, tolerance * oracle.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: f64,
    pub value: f64,
    pub stderr: f64,
    pub oracle: f64,
    pub deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: Scenario,
    pub results: Value,
    pub oracle: Value,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepRow>>,
    pub version: String,
    pub timing: Timing,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are serializable")
    }
}

struct Outcome {
    results: Value,
    oracle: Value,
    checks: Vec<Check>,
    warnings: Vec<String>,
}

struct Context<'a> {
    state: Option<&'a MotionalState>,
    plan: MeasurementPlan,
    tolerance: Option<f64>,
    base: &'a Path,
}

impl Context<'_> {
    fn state(&self) -> Result<&MotionalState> {
        self.state.ok_or_else(|| Error::Parse("this task needs a `state`".into()))
    }

    fn tol(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }
}

fn with_context(task: &str, e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Domain(format!("{task}: {m}")),
        Error::Singular(m) => Error::Singular(format!("{task}: {m}")),
        Error::IllConditioned { condition, hint } => Error::IllConditioned { condition, hint: format!("{task}: {hint}") },
        Error::Precision(m) => Error::Precision(format!("{task}: {m}")),
        Error::Undefined(m) => Error::Undefined(format!("{task}: {m}")),
        Error::Inconsistent(m) => Error::Inconsistent(format!("{task}: {m}")),
        Error::Parse(m) => Error::Parse(format!("{task}: {m}")),
        other => other,
    }
}

/// Scalar estimate with oracle, used by single runs and sweep rows.
struct Scalar {
    value: f64,
    stderr: f64,
    oracle: f64,
    extra: Value,
    warnings: Vec<String>,
}

fn slope_scalar(t: &scenario::SlopeTask, ctx: &Context) -> Result<Scalar> {
    let state = ctx.state()?;
    let drives = t.drives()?;
    let h = dynamics::build(&drives, state.dim())?;
    let probe = ProbeState::new(t.sign, t.phi);
    let est = protocols::estimate_slope(&h, &probe, state, &ctx.plan)?;
    let oracle = dynamics::analytic_slope(&probe, state, &drives)?;
    Ok(Scalar {
        value: est.value,
        stderr: est.stderr,
        oracle,
        extra: json!({ "method": est.method, "time_convention": drives.time_convention.describe() }),
        warnings: Vec::new(),
    })
}

fn quadrature_scalar(t: &scenario::QuadratureTask, ctx: &Context) -> Result<Scalar> {
    let state = ctx.state()?;
    let (drives, scale) = match t.etas.as_slice() {
        [eta] => (DriveSet::single_sideband(DriveKind::RedSideband, *eta)?, 1.0),
        _ => {
            let (d, s, _) = protocols::flat_sideband_drives(t.etas.clone())?;
            (d, s)
        }
    };
    let cfg = QuadratureConfig { flatness_tolerance: t.flatness_tolerance, support_cap: t.support_cap, slope_scale: scale };
    let est = protocols::quadrature_measure(state, t.phi, &drives, &ctx.plan, &cfg)?;
    let f: Vec<f64> = drives.combined_coupling(state.dim())?.iter().map(|v| v * scale).collect();
    let oracle = protocols::generalized_quadrature_oracle(state, &f, t.phi)?;
    let linear = protocols::generalized_quadrature_oracle(state, &vec![1.0; state.dim()], t.phi)?;
    let mut warnings = Vec::new();
    if est.lamb_dicke_single_laser && est.flatness > t.flatness_tolerance {
        warnings.push(format!(
            "single-laser coupling deviates from 1 by {:.3e}; the estimate is the generalized quadrature",
            est.flatness
        ));
    }
    Ok(Scalar {
        value: est.value,
        stderr: est.stderr,
        oracle,
        extra: json!({
            "flatness": est.flatness,
            "lamb_dicke_single_laser": est.lamb_dicke_single_laser,
            "slope_scale": scale,
            "linear_quadrature": linear,
            "coupling_bias": oracle - linear,
        }),
        warnings,
    })
}

fn scalar_outcome(label: &str, s: Scalar, tol: f64) -> Outcome {
    let allowed = tol + 3.0 * s.stderr;
    let mut results = json!({ "value": s.value, "stderr": s.stderr });
    if let (Value::Object(r), Value::Object(e)) = (&mut results, s.extra) {
        r.extend(e);
    }
    Outcome {
        results,
        oracle: json!({ label: s.oracle }),
        checks: vec![Check::new(label, s.value, s.oracle, allowed)],
        warnings: s.warnings,
    }
}

fn run_task(task: &TaskSpec, ctx: &Context) -> Result<Outcome> {
    match task {
        TaskSpec::Slope(t) => Ok(scalar_outcome("slope", slope_scalar(t, ctx)?, ctx.tol(1e-8))),
        TaskSpec::Quadrature(t) => Ok(scalar_outcome("quadrature", quadrature_scalar(t, ctx)?, ctx.tol(1e-8))),
        TaskSpec::MomentsTwoEta(t) => {
            let state = ctx.state()?;
            let (n1, n2) = protocols::two_eta_protocol(state, t.etas, &ctx.plan, t.model)?;
            let (o1, o2) = (MomentEstimate::oracle(state, 1), MomentEstimate::oracle(state, 2));
            let tol = ctx.tol(1e-3);
            Ok(Outcome {
                results: json!({ "n1": n1, "n2": n2, "model": t.model }),
                oracle: json!({ "n1": o1.value, "n2": o2.value }),
                checks: vec![Check::relative("n1", n1.value, o1.value, tol), Check::relative("n2", n2.value, o2.value, tol)],
                warnings: Vec::new(),
            })
        }
        TaskSpec::FanoMandel(t) => {
            let state = ctx.state()?;
            let (n1, n2) = protocols::two_eta_protocol(state, t.etas, &ctx.plan, t.model)?;
            let q = protocols::fano_mandel(&n1, &n2)?;
            let oracle = protocols::fano_mandel(&MomentEstimate::oracle(state, 1), &MomentEstimate::oracle(state, 2))?;
            Ok(Outcome {
                results: json!({ "q": q.q, "stderr": q.stderr, "n1": n1, "n2": n2, "model": t.model }),
                oracle: json!({ "q": oracle.q }),
                checks: vec![Check::new("q", q.q, oracle.q, ctx.tol(2e-3) + 3.0 * q.stderr)],
                warnings: Vec::new(),
            })
        }
        TaskSpec::MomentEngineered(t) => {
            let state = ctx.state()?;
            let cfg = EngineeredConfig {
                etas: t.etas.clone(),
                plan: ctx.plan.clone(),
                support_cap: t.support_cap,
                tolerance: t.engineering_tolerance,
            };
            let r = protocols::moment_engineered(state, t.p, &cfg)?;
            let oracle = fock::number_moment(state, t.p as u32);
            let allowed = r.budget.total() + ctx.tol(1e-8);
            Ok(Outcome {
                results: json!({
                    "moment": r.estimate,
                    "budget": r.budget,
                    "budget_total": r.budget.total(),
                    "residual_bound": r.residual_bound,
                    "support_cap": r.support_cap,
                    "omega_ratio": r.solution.omega_ratio,
                    "scale": r.solution.scale,
                    "condition_number": r.solution.condition_number,
                }),
                oracle: json!({ "moment": oracle }),
                checks: vec![Check::new(format!("moment_p{}", t.p), r.estimate.value, oracle, allowed)],
                warnings: Vec::new(),
            })
        }
        TaskSpec::Engineer(t) => {
            let problem = match (&t.target, t.p) {
                (Some(target), None) => EngineeringProblem::with_kind(t.coupling, t.etas.clone(), target.clone())?,
                (None, Some(p)) => EngineeringProblem::monomial(t.coupling, t.etas.clone(), p)?,
                _ => return Err(Error::Parse("engineer: give exactly one of `target` or `p`".into())),
            };
            let sol = engineering::solve_weights(&problem)?;
            let mut checks = Vec::new();
            let mut results = json!({
                "raw_weights": sol.raw_weights,
                "omega_ratio": sol.omega_ratio,
                "physical_ratios": sol.physical_ratios(),
                "scale": sol.scale,
                "condition_number": sol.condition_number,
                "phase_flipped": sol.phase_flipped,
            });
            if let Some(p) = t.p {
                let levels = t.check_levels.max(1);
                let rep = engineering::verify_monomial(&sol, levels, p, 0)?;
                let eta_max = t.etas.iter().copied().fold(0.0, f64::max);
                let bound = engineering::residual_bound(t.etas.len(), eta_max, (levels - 1) as f64);
                let tol = ctx.tolerance.unwrap_or(10.0 * bound);
                checks.push(Check::new("max_monomial_residual", rep.max_residual, 0.0, tol));
                results["residual_profile"] = json!(rep.profile);
                results["residual_bound"] = json!(bound);
            }
            Ok(Outcome { results, oracle: Value::Null, checks, warnings: Vec::new() })
        }
        TaskSpec::NionCollective(t) => {
            let config = ChainConfig::new(t.mode_dims.clone(), t.mode_etas.clone())?;
            if t.mode_states.len() != config.n_ions {
                return Err(Error::domain(format!("{} mode states for {} modes", t.mode_states.len(), config.n_ions)));
            }
            let modes: Vec<MotionalState> = t
                .mode_states
                .iter()
                .zip(&t.mode_dims)
                .map(|(s, d)| s.build(Some(*d), ctx.base))
                .collect::<Result<_>>()?;
            let rho_f = multi_ion::product_motional_state(&modes)?;
            let rho_a = t.other_ions.matrix(config.n_ions - 1);
            let probe = ProbeState::new(t.sign, t.phi);
            let slope = multi_ion::collective_slope(&config, t.ion, &probe, &rho_a, &rho_f)?;
            let fd = multi_ion::collective_slope_fd(&config, t.ion, &probe, &rho_a, &rho_f, t.fd_step)?;
            let mean = multi_ion::collective_mean(&config, &rho_f)?;
            let factors: Vec<f64> = modes
                .iter()
                .zip(&t.mode_etas)
                .map(|(m, eta)| {
                    let f = crate::couplings::f0_diag(*eta, m.dim())?.values;
                    Ok(f.iter().zip(m.populations()).map(|(a, b)| a * b).sum())
                })
                .collect::<Result<_>>()?;
            let product: f64 = factors.iter().product();
            Ok(Outcome {
                results: json!({ "slope": slope, "collective_mean": mean, "chain_dim": config.total_dim() }),
                oracle: json!({ "finite_difference_slope": fd, "product_of_mode_means": product }),
                checks: vec![
                    Check::new("slope_vs_finite_difference", slope, fd, ctx.tol(1e-6)),
                    Check::new("factorization", mean, product, 1e-12),
                ],
                warnings: Vec::new(),
            })
        }
        TaskSpec::Reconstruct(t) => {
            if t.support == 0 {
                return Err(Error::domain("support must be at least one level"));
            }
            let moments = match (&t.moments, ctx.state) {
                (Some(m), _) => m.clone(),
                (None, Some(s)) => (0..t.support as u32).map(|p| fock::number_moment(s, p)).collect(),
                (None, None) => return Err(Error::Parse("reconstruct: give `moments` or a `state`".into())),
            };
            let est = reconstruction::moments_to_distribution(&MomentVector::new(moments)?, t.support)?;
            let mut checks = Vec::new();
            let mut oracle = Value::Null;
            if let Some(s) = ctx.state {
                let pops = s.populations();
                let head: f64 = pops.iter().take(t.support).sum();
                let truth: Vec<f64> = (0..t.support).map(|n| pops.get(n).copied().unwrap_or(0.0) / head).collect();
                let tol = ctx.tol(1e-6 * est.condition_number);
                for (n, (a, b)) in est.probs.iter().zip(&truth).enumerate() {
                    checks.push(Check::new(format!("p{n}"), *a, *b, tol));
                }
                oracle = json!({ "probs": truth });
            }
            Ok(Outcome {
                results: json!({ "probs": est.probs, "condition_number": est.condition_number, "negativity": est.negativity }),
                oracle,
                checks,
                warnings: Vec::new(),
            })
        }
    }
}

/// Deterministic per-row seed.
pub fn row_seed(seed: u64, row: usize) -> u64 {
    seed ^ (row as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn sweep_row(scenario: &Scenario, state: Option<&MotionalState>, base: &Path, axis: SweepAxis, value: f64, row: usize) -> Result<SweepRow> {
    let mut task = scenario.task.clone();
    let mut plan = scenario.plan.resolve(row_seed(scenario.seed, row));
    match (axis, &mut task) {
        (SweepAxis::Phi, TaskSpec::Slope(t)) => t.phi = value,
        (SweepAxis::Phi, TaskSpec::Quadrature(t)) => t.phi = value,
        (SweepAxis::Eta, TaskSpec::Slope(t)) => {
            t.etas = vec![value];
            t.weights = None;
        }
        (SweepAxis::Eta, TaskSpec::Quadrature(t)) => t.etas = vec![value],
        (SweepAxis::Shots, TaskSpec::Slope(_) | TaskSpec::Quadrature(_)) => {
            if !(value >= 1.0) || value.fract() != 0.0 {
                return Err(Error::domain(format!("shots must be a positive integer, got {value}")));
            }
            plan.shots = Shots::Finite(value as u64);
        }
        (SweepAxis::TauMax, TaskSpec::Slope(_) | TaskSpec::Quadrature(_)) => {
            if !(value > 0.0) {
                return Err(Error::domain(format!("tau_max must be > 0, got {value}")));
            }
            plan = plan.rescaled_to(value);
        }
        (axis, task) => {
            return Err(Error::domain(format!("sweep axis `{}` is not valid for task `{}`", axis.name(), task.label())))
        }
    }
    let ctx = Context { state, plan, tolerance: scenario.tolerance, base };
    let s = match &task {
        TaskSpec::Slope(t) => slope_scalar(t, &ctx)?,
        TaskSpec::Quadrature(t) => quadrature_scalar(t, &ctx)?,
        _ => unreachable!("filtered above"),
    };
    let deviation = (s.value - s.oracle).abs();
    Ok(SweepRow {
        axis: value,
        value: s.value,
        stderr: s.stderr,
        oracle: s.oracle,
        deviation,
        pass: deviation <= ctx.tol(1e-8) + 3.0 * s.stderr,
    })
}

/// Runs one sweep row per value in parallel; rows are seeded by index so
/// the table does not depend on scheduling.
pub fn emit_sweep(scenario: &Scenario, base: &Path) -> Result<Vec<SweepRow>> {
    let spec = scenario.sweep.as_ref().ok_or_else(|| Error::domain("scenario has no `sweep` block"))?;
    let state = load_state(scenario, base)?;
    spec.values
        .par_iter()
        .enumerate()
        .map(|(i, v)| sweep_row(scenario, state.as_ref(), base, spec.axis, *v, i))
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["axis", "value", "stderr", "oracle", "deviation", "pass"]).map_err(io)?;
    for r in rows {
        w.serialize((r.axis, r.value, r.stderr, r.oracle, r.deviation, r.pass)).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn load_state(scenario: &Scenario, base: &Path) -> Result<Option<MotionalState>> {
    match &scenario.state {
        Some(spec) => spec.build(scenario.dim, base).map(Some).map_err(|e| with_context("state", e)),
        None if scenario.task.needs_state() => {
            Err(Error::Parse(format!("task `{}` needs a `state`", scenario.task.label())))
        }
        None => Ok(None),
    }
}

/// Runs a parsed scenario. `base` resolves relative paths inside it.
pub fn run_scenario(scenario: &Scenario, base: &Path) -> Result<Report> {
    let start = Instant::now();
    let label = scenario.task.label();
    let state = load_state(scenario, base)?;
    let ctx = Context { state: state.as_ref(), plan: scenario.plan.resolve(scenario.seed), tolerance: scenario.tolerance, base };
    let mut outcome = run_task(&scenario.task, &ctx).map_err(|e| with_context(label, e))?;
    if let Some(w) = state.as_ref().and_then(|s| s.truncation_warning()) {
        outcome.warnings.push(w);
    }
    let sweep = match scenario.sweep {
        Some(_) => Some(emit_sweep(scenario, base).map_err(|e| with_context("sweep", e))?),
        None => None,
    };
    let pass = outcome.checks.iter().all(|c| c.pass) && sweep.iter().flatten().all(|r| r.pass);
    Ok(Report {
        scenario: scenario.clone(),
        results: outcome.results,
        oracle: outcome.oracle,
        checks: outcome.checks,
        pass,
        warnings: outcome.warnings,
        sweep,
        version: format!("ionprobe {}", env!("CARGO_PKG_VERSION")),
        timing: Timing { elapsed_ms: start.elapsed().as_secs_f64() * 1e3 },
    })
}

/// Loads and runs a scenario file.
pub fn run_scenario_file(path: &Path, seed: Option<u64>) -> Result<Report> {
    let mut scenario = load_scenario(path)?;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    run_scenario(&scenario, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> Result<Report> {
        run_scenario(&parse_scenario(text)?, Path::new("."))
    }

    #[test]
    fn slope_scenario_matches_coupling() {
        let r = run(r#"{"name":"s","state":{"kind":"fock","n":2},"dim":8,
            "task":{"kind":"slope","etas":[0.3],"phi":1.5707963267948966}}"#)
        .unwrap();
        let f = crate::couplings::f0_diag(0.3, 8).unwrap().values[2];
        assert!((r.results["value"].as_f64().unwrap() + f).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn parse_errors_name_the_field() {
        let e = parse_scenario(r#"{"name":"s","task":{"kind":"slope","etas":[0.3],"phi":"x"}}"#).unwrap_err();
        let Error::Parse(msg) = e else { panic!("{e:?}") };
        assert!(msg.contains("task") && msg.contains("line"), "{msg}");
        assert!(parse_scenario("{").is_err());
        assert!(parse_scenario(r#"{"name":"s","task":{"kind":"nope"}}"#).is_err());
        assert!(parse_scenario(r#"{"name":"s","bogus":1,"task":{"kind":"reconstruct","support":2}}"#).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Parse("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::Resource { requested: 5000, cap: 4096 }), EXIT_RESOURCE);
        assert_eq!(exit_code(&Error::Precision("x".into())), EXIT_FAILED);
        let e = run(r#"{"name":"n","task":{"kind":"nion_collective","mode_dims":[9,9,9],"mode_etas":[0.1,0.1,0.1],
            "mode_states":[{"kind":"fock","n":0},{"kind":"fock","n":0},{"kind":"fock","n":0}],"phi":1.0}}"#)
        .unwrap_err();
        assert_eq!(exit_code(&e), EXIT_RESOURCE);
    }

    #[test]
    fn invalid_sweep_axis() {
        let e = run(r#"{"name":"s","state":{"kind":"fock","n":1},"dim":8,
            "task":{"kind":"moments_two_eta","etas":[0.05,0.08]},"sweep":{"axis":"phi","values":[0.1]}}"#)
        .unwrap_err();
        assert!(matches!(e, Error::Domain(_)), "{e:?}");
    }

    #[test]
    fn empty_sweep_gives_header_only() {
        let s = parse_scenario(r#"{"name":"s","state":{"kind":"fock","n":1},"dim":8,
            "task":{"kind":"slope","etas":[0.3],"phi":0.5},"sweep":{"axis":"phi","values":[]}}"#)
        .unwrap();
        let rows = emit_sweep(&s, Path::new(".")).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "axis,value,stderr,oracle,deviation,pass\n");
    }
}
