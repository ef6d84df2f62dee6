//! End-to-end measurement recipes built on the initial population slope.
//!
//! Every recipe reads a single number, `dP_e/dτ` at τ = 0, either exactly
//! (commutator route) or by fitting simulated, optionally shot-noisy,
//! populations on a short τ grid, and converts it into a motional quantity.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::couplings::CouplingKind;
use crate::dynamics::{self, DriveKind, DriveSet, InteractionHamiltonian, TimeConvention};
use crate::engineering::{self, EngineeringProblem, EngineeringSolution};
use crate::error::{Error, Result};
use crate::fock::{self, MotionalState, ProbeState, Sign, DEFAULT_GUARD_LEVELS, LEAKAGE_LIMIT};
use crate::linalg::{CMatrix, C64};

/// Longest probe time accepted on a measurement grid.
pub const MAX_TAU: f64 = 0.2;
/// Largest η for which a single sideband laser counts as Lamb-Dicke.
pub const LD_SINGLE_LASER_MAX_ETA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shots {
    /// Exact slope from the commutator expectation; no fit.
    Exact,
    /// Fit to exact populations on the grid.
    Noiseless,
    /// Fit to binomial draws with this many shots per grid point.
    Finite(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPlan {
    pub tau_grid: Vec<f64>,
    pub shots: Shots,
    pub seed: u64,
    pub fit_order: usize,
}

impl Default for MeasurementPlan {
    /// Eight points geometric on `[0.01, 0.15]`, quadratic fit, exact slope.
    fn default() -> Self {
        MeasurementPlan { tau_grid: geometric_grid(0.01, 0.15, 8), shots: Shots::Exact, seed: 0, fit_order: 2 }
    }
}

impl MeasurementPlan {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn with_shots(shots: Shots, seed: u64) -> Self {
        MeasurementPlan { shots, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.fit_order) {
            return Err(Error::domain(format!("fit order must be 1 or 2, got {}", self.fit_order)));
        }
        if self.tau_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::domain("tau grid entries must be positive"));
        }
        if self.tau_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("tau grid must be strictly increasing"));
        }
        if let Some(&last) = self.tau_grid.last() {
            if last > MAX_TAU {
                return Err(Error::domain(format!("tau grid reaches {last}, beyond the short-time limit {MAX_TAU}")));
            }
        }
        if self.shots != Shots::Exact && self.tau_grid.len() < self.fit_order {
            return Err(Error::domain(format!(
                "{} grid points cannot determine a fit of order {}",
                self.tau_grid.len(),
                self.fit_order
            )));
        }
        if self.shots == Shots::Finite(0) {
            return Err(Error::domain("shots per point must be >= 1"));
        }
        Ok(())
    }

    /// Same grid shape stretched so that its last point is `tau_max`.
    pub fn rescaled_to(&self, tau_max: f64) -> Self {
        let last = self.tau_grid.last().copied().unwrap_or(1.0);
        MeasurementPlan { tau_grid: self.tau_grid.iter().map(|t| t * tau_max / last).collect(), ..self.clone() }
    }
}

pub fn geometric_grid(first: f64, last: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![first];
    }
    let ratio = (last / first).powf(1.0 / (n - 1) as f64);
    (0..n).map(|k| if k == n - 1 { last } else { first * ratio.powi(k as i32) }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeMethod {
    ExactAnalytic,
    FitNoiseless,
    FitShots,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: SlopeMethod,
}

/// Least-squares fit of `y = Σ_{k=1}^{order} b_k τ^k` (intercept pinned at
/// zero). Returns the coefficients and their covariance. With `variances`
/// the fit is weighted and the covariance is `(XᵀWX)⁻¹`; without, the
/// covariance is scaled by the residual variance.
fn fit_pinned_polynomial(taus: &[f64], ys: &[f64], variances: Option<&[f64]>, order: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let k = taus.len();
    let x = DMatrix::from_fn(k, order, |i, j| taus[i].powi(j as i32 + 1));
    let w: Vec<f64> = match variances {
        Some(v) => v.iter().map(|s| 1.0 / s).collect(),
        None => vec![1.0; k],
    };
    let xtw = DMatrix::from_fn(order, k, |j, i| x[(i, j)] * w[i]);
    let normal = &xtw * &x;
    let inv = normal
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("tau grid does not determine the fit".into()))?;
    let rhs = &xtw * DVector::from_column_slice(ys);
    let beta = &inv * rhs;
    let cov = match variances {
        Some(_) => inv,
        None => {
            let resid: f64 = (0..k)
                .map(|i| {
                    let fit: f64 = (0..order).map(|j| beta[j] * x[(i, j)]).sum();
                    (ys[i] - fit).powi(2)
                })
                .sum();
            let dof = k.saturating_sub(order);
            let s2 = if dof > 0 { resid / dof as f64 } else { 0.0 };
            inv * s2
        }
    };
    Ok((beta.iter().copied().collect(), cov))
}

/// Population readout after `shots` destructive measurements at grid point
/// `index`. The generator is keyed by `(seed, index)` so that points can be
/// sampled in any order.
pub fn sample_population(p: f64, shots: u64, seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let p = p.clamp(0.0, 1.0);
    let dist = Binomial::new(shots, p).expect("probability clamped into [0, 1]");
    dist.sample(&mut rng) as f64 / shots as f64
}

/// Initial slope of `P_e` for `|±_φ⟩⟨±_φ| ⊗ ρ_f` evolving under `h`.
pub fn estimate_slope(
    h: &InteractionHamiltonian,
    probe: &ProbeState,
    rho_f: &MotionalState,
    plan: &MeasurementPlan,
) -> Result<SlopeEstimate> {
    plan.validate()?;
    if h.motional_dim() != rho_f.dim() {
        return Err(Error::domain(format!(
            "Hamiltonian built for d = {}, state has d = {}",
            h.motional_dim(),
            rho_f.dim()
        )));
    }
    let leak = fock::leakage(rho_f, DEFAULT_GUARD_LEVELS)?;
    if leak > LEAKAGE_LIMIT {
        return Err(Error::Precision(format!(
            "state puts {leak:.3e} in the top {DEFAULT_GUARD_LEVELS} Fock levels; increase the truncation dimension"
        )));
    }
    let rho0 = fock::hybrid_product(probe, rho_f);
    if plan.shots == Shots::Exact {
        let value = dynamics::ehrenfest_slope(&rho0, h)?;
        return Ok(SlopeEstimate { value, stderr: 0.0, method: SlopeMethod::ExactAnalytic });
    }
    let p0 = dynamics::excited_population(&rho0);
    let mut populations = Vec::with_capacity(plan.tau_grid.len());
    for &tau in &plan.tau_grid {
        populations.push(dynamics::excited_population(&dynamics::evolve(h, &rho0, tau)?));
    }
    match plan.shots {
        Shots::Noiseless => {
            let ys: Vec<f64> = populations.iter().map(|p| p - p0).collect();
            let (beta, cov) = fit_pinned_polynomial(&plan.tau_grid, &ys, None, plan.fit_order)?;
            Ok(SlopeEstimate { value: beta[0], stderr: cov[(0, 0)].max(0.0).sqrt(), method: SlopeMethod::FitNoiseless })
        }
        Shots::Finite(shots) => {
            let nf = shots as f64;
            let mut ys = Vec::with_capacity(populations.len());
            let mut vars = Vec::with_capacity(populations.len());
            for (k, &p) in populations.iter().enumerate() {
                let est = sample_population(p, shots, plan.seed, k as u64);
                ys.push(est - p0);
                // binomial variance of the estimate, floored at one count
                vars.push((est * (1.0 - est)).max(1.0 / nf) / nf);
            }
            let (beta, cov) = fit_pinned_polynomial(&plan.tau_grid, &ys, Some(&vars), plan.fit_order)?;
            Ok(SlopeEstimate { value: beta[0], stderr: cov[(0, 0)].max(0.0).sqrt(), method: SlopeMethod::FitShots })
        }
        Shots::Exact => unreachable!(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentRoute {
    TwoEta,
    Engineered,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub p: u32,
    pub value: f64,
    pub stderr: f64,
    pub route: MomentRoute,
}

impl MomentEstimate {
    pub fn oracle(state: &MotionalState, p: u32) -> Self {
        MomentEstimate { p, value: fock::number_moment(state, p), stderr: 0.0, route: MomentRoute::Oracle }
    }
}

/// Low-η model used to invert two `⟨f₀⟩` measurements.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoEtaModel {
    /// `⟨f₀⟩ = 1 − η²⟨n̂⟩ + (η⁴/4)⟨n̂²⟩` taken literally.
    Bare,
    /// `e^{η²/2}⟨f₀⟩ = 1 − η²⟨n̂⟩ + (η⁴/4)(⟨n̂²⟩ − ⟨n̂⟩)`: the same two-term
    /// expansion with the Debye-Waller factor divided out and the second
    /// term written on the falling factorial `n(n−1)`, which makes it exact
    /// through order η⁴.
    #[default]
    DebyeWaller,
}

/// One `⟨f₀(n̂;η)⟩` observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingMean {
    pub eta: f64,
    pub value: f64,
    pub stderr: f64,
}

/// Solves the two-equation system for `(⟨n̂⟩, ⟨n̂²⟩)` and propagates the
/// input standard errors linearly.
pub fn moments_two_eta(
    first: CouplingMean,
    second: CouplingMean,
    model: TwoEtaModel,
) -> Result<(MomentEstimate, MomentEstimate)> {
    for m in [first, second] {
        if !(m.eta > 0.0) {
            return Err(Error::domain(format!("Lamb-Dicke parameters must be > 0, got {}", m.eta)));
        }
    }
    if first.eta == second.eta {
        return Err(Error::Singular("the two Lamb-Dicke parameters must differ".into()));
    }
    let row = |m: CouplingMean| -> ([f64; 2], f64, f64) {
        let x = m.eta * m.eta;
        match model {
            TwoEtaModel::Bare => ([-x, x * x / 4.0], m.value - 1.0, 1.0),
            TwoEtaModel::DebyeWaller => {
                let g = (0.5 * x).exp();
                ([-x - x * x / 4.0, x * x / 4.0], g * m.value - 1.0, g)
            }
        }
    };
    let (r1, y1, g1) = row(first);
    let (r2, y2, g2) = row(second);
    let det = r1[0] * r2[1] - r1[1] * r2[0];
    if det == 0.0 || !det.is_finite() {
        return Err(Error::Singular("two-eta system is singular".into()));
    }
    let inv = [[r2[1] / det, -r1[1] / det], [-r2[0] / det, r1[0] / det]];
    let n1 = inv[0][0] * y1 + inv[0][1] * y2;
    let n2 = inv[1][0] * y1 + inv[1][1] * y2;
    let s = [g1 * first.stderr, g2 * second.stderr];
    let err = |row: [f64; 2]| ((row[0] * s[0]).powi(2) + (row[1] * s[1]).powi(2)).sqrt();
    Ok((
        MomentEstimate { p: 1, value: n1, stderr: err(inv[0]), route: MomentRoute::TwoEta },
        MomentEstimate { p: 2, value: n2, stderr: err(inv[1]), route: MomentRoute::TwoEta },
    ))
}

/// Measures `⟨f₀(n̂;η)⟩ = −dP_e/dτ` with a single carrier laser and the
/// probe `|+_{π/2}⟩`.
pub fn measure_f0_mean(rho_f: &MotionalState, eta: f64, plan: &MeasurementPlan) -> Result<CouplingMean> {
    let h = dynamics::build_carrier(&DriveSet::single_carrier(eta), rho_f.dim())?;
    let s = estimate_slope(&h, &ProbeState::new(Sign::Plus, std::f64::consts::FRAC_PI_2), rho_f, plan)?;
    Ok(CouplingMean { eta, value: -s.value, stderr: s.stderr })
}

/// Full two-η protocol: two carrier slope measurements, then inversion.
pub fn two_eta_protocol(
    rho_f: &MotionalState,
    etas: [f64; 2],
    plan: &MeasurementPlan,
    model: TwoEtaModel,
) -> Result<(MomentEstimate, MomentEstimate)> {
    let first = measure_f0_mean(rho_f, etas[0], plan)?;
    let second = measure_f0_mean(rho_f, etas[1], &MeasurementPlan { seed: plan.seed.wrapping_add(1), ..plan.clone() })?;
    moments_two_eta(first, second, model)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoMandel {
    pub q: f64,
    pub stderr: f64,
}

/// `Q = (⟨n̂²⟩ − ⟨n̂⟩²)/⟨n̂⟩` with first-order error propagation (inputs
/// treated as uncorrelated).
pub fn fano_mandel(n1: &MomentEstimate, n2: &MomentEstimate) -> Result<FanoMandel> {
    let a = n1.value;
    let b = n2.value;
    if !(a > 0.0) {
        return Err(Error::Undefined(format!("Fano-Mandel Q needs <n> > 0, got {a}")));
    }
    let q = (b - a * a) / a;
    let d_da = -(a * a + b) / (a * a);
    let d_db = 1.0 / a;
    let stderr = ((d_da * n1.stderr).powi(2) + (d_db * n2.stderr).powi(2)).sqrt();
    Ok(FanoMandel { q, stderr })
}

/// Error budget of an engineered moment, reported in three parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    /// Fit standard error carried through the engineering scale.
    pub statistical: f64,
    /// `max_{n ≤ cap} |F₀(n) − nᵖ|` for the engineered weights.
    pub engineering: f64,
    /// Population above the support cap times the largest residual there.
    pub truncation: f64,
}

impl ErrorBudget {
    pub fn total(&self) -> f64 {
        self.statistical + self.engineering + self.truncation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineeredConfig {
    pub etas: Vec<f64>,
    pub plan: MeasurementPlan,
    /// Highest Fock level assumed populated; defaults to `d − 1 − guard`.
    pub support_cap: Option<usize>,
    /// Refuse results whose engineering residual exceeds this.
    pub tolerance: Option<f64>,
}

impl EngineeredConfig {
    pub fn new(etas: Vec<f64>, plan: MeasurementPlan) -> Self {
        EngineeredConfig { etas, plan, support_cap: None, tolerance: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineeredMoment {
    pub estimate: MomentEstimate,
    pub budget: ErrorBudget,
    /// `residual_bound(N, η_max, support_cap)`, for comparison with the
    /// evaluated engineering residual.
    pub residual_bound: f64,
    pub slope: SlopeEstimate,
    pub solution: EngineeringSolution,
    pub support_cap: usize,
}

fn resolve_cap(cap: Option<usize>, d: usize) -> Result<usize> {
    let cap = cap.unwrap_or(d.saturating_sub(1 + DEFAULT_GUARD_LEVELS));
    if cap >= d {
        return Err(Error::domain(format!("support cap {cap} outside basis of dimension {d}")));
    }
    Ok(cap)
}

/// `⟨n̂ᵖ⟩` from one slope measurement with `N` engineered carrier lasers
/// (`F₀ ≈ n̂ᵖ`), probe `|+_{π/2}⟩`.
pub fn moment_engineered(rho_f: &MotionalState, p: usize, cfg: &EngineeredConfig) -> Result<EngineeredMoment> {
    let d = rho_f.dim();
    let cap = resolve_cap(cfg.support_cap, d)?;
    let problem = EngineeringProblem::monomial(CouplingKind::F0, cfg.etas.clone(), p)?;
    let solution = engineering::solve_weights(&problem)?;
    if solution.scale == 0.0 {
        return Err(Error::Singular("engineering produced all-zero weights".into()));
    }
    let profile = engineering::verify_monomial(&solution, d, p, 0)?.profile;
    let engineering_residual = profile[..=cap].iter().copied().fold(0.0, f64::max);
    if let Some(tol) = cfg.tolerance {
        if engineering_residual > tol {
            return Err(Error::Precision(format!(
                "engineering residual {engineering_residual:.3e} over n <= {cap} exceeds tolerance {tol:.3e}"
            )));
        }
    }
    let pops = rho_f.populations();
    let tail_pop: f64 = pops[cap + 1..].iter().sum();
    let tail_resid = profile[cap + 1..].iter().copied().fold(0.0, f64::max);

    let drives = DriveSet::carrier(solution.omega_ratio.clone(), cfg.etas.clone())?;
    let h = dynamics::build_carrier(&drives, d)?;
    let probe = ProbeState::new(Sign::Plus, std::f64::consts::FRAC_PI_2);
    let slope = estimate_slope(&h, &probe, rho_f, &cfg.plan)?;
    let value = -slope.value * solution.scale;
    let budget = ErrorBudget {
        statistical: slope.stderr * solution.scale,
        engineering: engineering_residual,
        truncation: tail_pop.max(0.0) * tail_resid,
    };
    let eta_max = cfg.etas.iter().copied().fold(0.0, f64::max);
    Ok(EngineeredMoment {
        estimate: MomentEstimate { p: p as u32, value, stderr: budget.statistical, route: MomentRoute::Engineered },
        budget,
        residual_bound: engineering::residual_bound(cfg.etas.len(), eta_max, cap as f64),
        slope,
        solution,
        support_cap: cap,
    })
}

/// Per-level check that the engineered Hamiltonian really yields `nᵖ`
/// through the full commutator slope on Fock states. Returns
/// `|slope·scale − nᵖ|` for `n < d − k_guard`.
pub fn verify_monomial_dynamics(solution: &EngineeringSolution, d: usize, p: usize, k_guard: usize) -> Result<Vec<f64>> {
    if k_guard >= d {
        return Err(Error::domain("guard leaves no levels"));
    }
    let drives = DriveSet::carrier(solution.omega_ratio.clone(), solution.etas.clone())?;
    let h = dynamics::build_carrier(&drives, d)?;
    let probe = ProbeState::new(Sign::Plus, std::f64::consts::FRAC_PI_2);
    (0..d - k_guard)
        .map(|n| {
            let rho = fock::hybrid_product(&probe, &fock::fock_state(n, d)?);
            let s = dynamics::ehrenfest_slope(&rho, &h)?;
            Ok((-s * solution.scale - (n as f64).powi(p as i32)).abs())
        })
        .collect()
}

/// `½⟨f(n̂) â e^{−iφ} + â† f(n̂) e^{iφ}⟩` by dense matrix trace.
pub fn generalized_quadrature_oracle(rho_f: &MotionalState, fdiag: &[f64], phi: f64) -> Result<f64> {
    let d = rho_f.dim();
    if fdiag.len() != d {
        return Err(Error::domain(format!("coupling has {} entries for dimension {d}", fdiag.len())));
    }
    let a = fock::annihilation(d);
    let f = CMatrix::from_diagonal(&DVector::from_iterator(d, fdiag.iter().map(|v| C64::new(*v, 0.0))));
    let fa = &f * &a;
    let op = (&fa * C64::from_polar(1.0, -phi) + fa.adjoint() * C64::from_polar(1.0, phi)) * C64::new(0.5, 0.0);
    Ok(fock::expect(rho_f, fock::Observable::Dense(&op))?.re)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Largest accepted `|scale·F₁(n) − 1|` over the support.
    pub flatness_tolerance: f64,
    pub support_cap: Option<usize>,
    /// Multiplier converting the measured slope to the `F₁ ≈ 1` normalization
    /// (the engineering scale for multi-laser drives, 1 otherwise).
    pub slope_scale: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { flatness_tolerance: 1e-3, support_cap: None, slope_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureEstimate {
    pub phi: f64,
    /// Estimate of `⟨X̂_φ⟩`.
    pub value: f64,
    pub stderr: f64,
    /// `max_{n ≤ cap} |scale·F₁(n) − 1|`.
    pub flatness: f64,
    pub lamb_dicke_single_laser: bool,
}

/// `⟨X̂_φ⟩` from the red-sideband slope with probe `|+_φ⟩`.
pub fn quadrature_measure(
    rho_f: &MotionalState,
    phi: f64,
    drives: &DriveSet,
    plan: &MeasurementPlan,
    cfg: &QuadratureConfig,
) -> Result<QuadratureEstimate> {
    if drives.kind != DriveKind::RedSideband {
        return Err(Error::domain("quadrature measurement uses red-sideband drives"));
    }
    let d = rho_f.dim();
    let cap = resolve_cap(cfg.support_cap, d)?;
    let f = drives.combined_coupling(d)?;
    let flatness = f[..=cap].iter().map(|v| (cfg.slope_scale * v - 1.0).abs()).fold(0.0, f64::max);
    let ld_single = drives.time_convention == TimeConvention::EtaRabiHalf
        && drives.weights == [1.0]
        && drives.etas[0] <= LD_SINGLE_LASER_MAX_ETA;
    if !ld_single && flatness > cfg.flatness_tolerance {
        return Err(Error::Precision(format!(
            "F1 deviates from 1 by {flatness:.3e} over n <= {cap}, above tolerance {:.3e}",
            cfg.flatness_tolerance
        )));
    }
    let h = dynamics::build_sideband(drives, d)?;
    let slope = estimate_slope(&h, &ProbeState::new(Sign::Plus, phi), rho_f, plan)?;
    Ok(QuadratureEstimate {
        phi,
        value: slope.value * cfg.slope_scale,
        stderr: slope.stderr * cfg.slope_scale.abs(),
        flatness,
        lamb_dicke_single_laser: ld_single,
    })
}

/// `(⟨x̂⟩/⟨x₀⟩, ⟨p̂⟩/⟨p₀⟩) = (2⟨X̂₀⟩, 2⟨X̂_{π/2}⟩)`.
pub fn position_momentum(
    rho_f: &MotionalState,
    drives: &DriveSet,
    plan: &MeasurementPlan,
    cfg: &QuadratureConfig,
) -> Result<(QuadratureEstimate, QuadratureEstimate)> {
    let x = quadrature_measure(rho_f, 0.0, drives, plan, cfg)?;
    let p = quadrature_measure(rho_f, std::f64::consts::FRAC_PI_2, drives, plan, cfg)?;
    Ok((
        QuadratureEstimate { value: 2.0 * x.value, stderr: 2.0 * x.stderr, ..x },
        QuadratureEstimate { value: 2.0 * p.value, stderr: 2.0 * p.stderr, ..p },
    ))
}

/// Red-sideband drives engineered so that `F₁ ≈ 1`. Returns the drive set
/// (weights normalized to unit maximum) and the slope scale to pass in
/// [`QuadratureConfig::slope_scale`].
pub fn flat_sideband_drives(etas: Vec<f64>) -> Result<(DriveSet, f64, EngineeringSolution)> {
    let problem = EngineeringProblem::monomial(CouplingKind::F1, etas.clone(), 0)?;
    let solution = engineering::solve_weights(&problem)?;
    let physical: Vec<f64> = solution.raw_weights.iter().zip(&etas).map(|(u, e)| u / e).collect();
    let scale = physical.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let ratios = physical.iter().map(|w| w / scale).collect();
    let drives = DriveSet::sideband(DriveKind::RedSideband, ratios, etas)?;
    Ok((drives, scale, solution))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineFit {
    pub amplitude: f64,
    pub theta: f64,
    pub max_residual: f64,
}

/// Least-squares fit of `A cos(θ − φ)` to `(φ, value)` samples.
pub fn fit_cosine(phis: &[f64], values: &[f64]) -> Result<CosineFit> {
    if phis.len() != values.len() || phis.len() < 2 {
        return Err(Error::domain("cosine fit needs at least two matched samples"));
    }
    let x = DMatrix::from_fn(phis.len(), 2, |i, j| if j == 0 { phis[i].cos() } else { phis[i].sin() });
    let y = DVector::from_column_slice(values);
    let xt = x.transpose();
    let beta = (&xt * &x)
        .try_inverse()
        .ok_or_else(|| Error::Singular("phase samples do not determine a cosine".into()))?
        * (&xt * &y);
    let (a, b) = (beta[0], beta[1]);
    let max_residual = (&x * &beta - &y).amax();
    Ok(CosineFit { amplitude: a.hypot(b), theta: b.atan2(a), max_residual })
}
