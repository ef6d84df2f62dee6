//! Interaction-picture Hamiltonians, exact propagation, and the two routes
//! to the initial slope of the excited-state population.
//!
//! Units: ħ = 1 and the stored matrix is the coefficient of the
//! dimensionless time τ. With τ = Ω_L t/2 the carrier Hamiltonian is
//! `(σ⁺ + σ⁻) ⊗ F₀(n̂)` and the red sideband is `i σ⁺ F₁(n̂) â + h.c.`
//! (the explicit `i` is kept as a global phase convention; populations and
//! slopes do not depend on it).

use std::sync::OnceLock;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::couplings::{self, CouplingKind};
use crate::error::{Error, Result};
use crate::fock::{self, HybridState, MotionalState, ProbeState};
use crate::linalg::{self, CMatrix, C64, I, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveKind {
    Carrier,
    RedSideband,
    BlueSideband,
}

/// Which dimensionless time the Hamiltonian is the generator of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeConvention {
    /// τ = Ω_L t/2 (carrier, and multi-laser sidebands).
    RabiHalf,
    /// τ = η Ω_L t/2 (single-laser sideband).
    EtaRabiHalf,
}

impl TimeConvention {
    pub fn describe(self) -> &'static str {
        match self {
            TimeConvention::RabiHalf => "tau = Omega_L t / 2",
            TimeConvention::EtaRabiHalf => "tau = eta Omega_L t / 2",
        }
    }
}

/// A set of simultaneous drives of one kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSet {
    pub kind: DriveKind,
    /// Relative Rabi frequencies `Ω_j/Ω_L` (signed; a negative value is a
    /// π-shifted laser).
    pub weights: Vec<f64>,
    pub etas: Vec<f64>,
    pub time_convention: TimeConvention,
}

impl DriveSet {
    pub fn new(kind: DriveKind, weights: Vec<f64>, etas: Vec<f64>, time_convention: TimeConvention) -> Result<Self> {
        let d = DriveSet { kind, weights, etas, time_convention };
        d.validate()?;
        Ok(d)
    }

    pub fn carrier(weights: Vec<f64>, etas: Vec<f64>) -> Result<Self> {
        Self::new(DriveKind::Carrier, weights, etas, TimeConvention::RabiHalf)
    }

    pub fn single_carrier(eta: f64) -> Self {
        DriveSet {
            kind: DriveKind::Carrier,
            weights: vec![1.0],
            etas: vec![eta],
            time_convention: TimeConvention::RabiHalf,
        }
    }

    /// Multi-laser sideband, τ = Ω_L t/2, `F₁ = Σ_j w_j η_j f₁(n̂;η_j)`.
    pub fn sideband(kind: DriveKind, weights: Vec<f64>, etas: Vec<f64>) -> Result<Self> {
        Self::new(kind, weights, etas, TimeConvention::RabiHalf)
    }

    /// Single sideband laser in its own time units τ = ηΩ_L t/2, so that
    /// `F₁ = f₁(n̂;η)`.
    pub fn single_sideband(kind: DriveKind, eta: f64) -> Result<Self> {
        Self::new(kind, vec![1.0], vec![eta], TimeConvention::EtaRabiHalf)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.etas.len() || self.weights.is_empty() {
            return Err(Error::domain(format!(
                "drive weights ({}) and etas ({}) must be non-empty and equal in length",
                self.weights.len(),
                self.etas.len()
            )));
        }
        if self.etas.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::domain("Lamb-Dicke parameters must be finite and >= 0"));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::domain("drive weights must be finite"));
        }
        if self.time_convention == TimeConvention::EtaRabiHalf {
            if self.kind == DriveKind::Carrier {
                return Err(Error::domain("the eta-scaled time convention applies to sidebands only"));
            }
            if self.weights.len() != 1 {
                return Err(Error::domain("the eta-scaled time convention applies to a single laser"));
            }
        }
        Ok(())
    }

    /// Weights multiplying `f_kind(n̂;η_j)` in the combined coupling.
    pub fn effective_weights(&self) -> Vec<f64> {
        match (self.kind, self.time_convention) {
            (DriveKind::Carrier, _) | (_, TimeConvention::EtaRabiHalf) => self.weights.clone(),
            (_, TimeConvention::RabiHalf) => self.weights.iter().zip(&self.etas).map(|(w, e)| w * e).collect(),
        }
    }

    pub fn coupling_kind(&self) -> CouplingKind {
        match self.kind {
            DriveKind::Carrier => CouplingKind::F0,
            _ => CouplingKind::F1,
        }
    }

    /// Fock diagonal of `F₀` (carrier) or `F₁` (sidebands).
    pub fn combined_coupling(&self, d: usize) -> Result<Vec<f64>> {
        couplings::combined_diag(&self.effective_weights(), &self.etas, d, self.coupling_kind())
    }
}

#[derive(Debug)]
struct Spectrum {
    values: DVector<f64>,
    vectors: CMatrix,
}

/// Time-independent generator of the τ evolution on the hybrid space.
#[derive(Debug)]
pub struct InteractionHamiltonian {
    matrix: CMatrix,
    kind: DriveKind,
    drives: DriveSet,
    dim: usize,
    spectrum: OnceLock<Spectrum>,
}

impl Clone for InteractionHamiltonian {
    fn clone(&self) -> Self {
        InteractionHamiltonian {
            matrix: self.matrix.clone(),
            kind: self.kind,
            drives: self.drives.clone(),
            dim: self.dim,
            spectrum: OnceLock::new(),
        }
    }
}

impl InteractionHamiltonian {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> DriveKind {
        self.kind
    }

    pub fn drives(&self) -> &DriveSet {
        &self.drives
    }

    /// Motional truncation dimension `d` (the matrix is `2d × 2d`).
    pub fn motional_dim(&self) -> usize {
        self.dim
    }

    fn spectrum(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| {
            let (values, vectors) = linalg::hermitian_eigen(&self.matrix);
            Spectrum { values, vectors }
        })
    }

    /// `U(τ) = exp(−iHτ)` from the cached eigendecomposition.
    pub fn propagator(&self, tau: f64) -> CMatrix {
        let s = self.spectrum();
        let n = self.matrix.nrows();
        let mut scaled = s.vectors.clone();
        for k in 0..n {
            let phase = C64::from_polar(1.0, -s.values[k] * tau);
            for z in scaled.column_mut(k).iter_mut() {
                *z *= phase;
            }
        }
        scaled * s.vectors.adjoint()
    }
}

/// `(σ⁺ + σ⁻) ⊗ diag(F₀)`.
pub fn build_carrier(drives: &DriveSet, d: usize) -> Result<InteractionHamiltonian> {
    drives.validate()?;
    if drives.kind != DriveKind::Carrier {
        return Err(Error::domain(format!("build_carrier needs carrier drives, got {:?}", drives.kind)));
    }
    fock::FockBasis::new(d)?;
    let f = drives.combined_coupling(d)?;
    let mut h = CMatrix::zeros(2 * d, 2 * d);
    for n in 0..d {
        h[(d + n, n)] = C64::new(f[n], 0.0);
        h[(n, d + n)] = C64::new(f[n], 0.0);
    }
    Ok(InteractionHamiltonian { matrix: h, kind: drives.kind, drives: drives.clone(), dim: d, spectrum: OnceLock::new() })
}

/// Red: `i σ⁺ F₁ â + h.c.`, coupling `(e,n) ↔ (g,n+1)` with strength
/// `F₁(n)√(n+1)`. Blue: `i σ⁺ â† F₁ + h.c.`, coupling `(g,n) ↔ (e,n+1)`.
pub fn build_sideband(drives: &DriveSet, d: usize) -> Result<InteractionHamiltonian> {
    drives.validate()?;
    if drives.kind == DriveKind::Carrier {
        return Err(Error::domain("build_sideband needs red or blue sideband drives"));
    }
    fock::FockBasis::new(d)?;
    let f = drives.combined_coupling(d)?;
    let mut h = CMatrix::zeros(2 * d, 2 * d);
    for n in 0..d - 1 {
        let amp = I * (f[n] * ((n + 1) as f64).sqrt());
        let (e_idx, g_idx) = match drives.kind {
            DriveKind::RedSideband => (d + n, n + 1),
            _ => (d + n + 1, n),
        };
        h[(e_idx, g_idx)] = amp;
        h[(g_idx, e_idx)] = amp.conj();
    }
    Ok(InteractionHamiltonian { matrix: h, kind: drives.kind, drives: drives.clone(), dim: d, spectrum: OnceLock::new() })
}

pub fn build(drives: &DriveSet, d: usize) -> Result<InteractionHamiltonian> {
    match drives.kind {
        DriveKind::Carrier => build_carrier(drives, d),
        _ => build_sideband(drives, d),
    }
}

/// `ρ(τ) = U ρ₀ U†` with `U = exp(−iHτ)`; negative τ is allowed.
pub fn evolve(h: &InteractionHamiltonian, rho0: &HybridState, tau: f64) -> Result<HybridState> {
    if rho0.matrix().nrows() != h.matrix.nrows() {
        return Err(Error::domain(format!(
            "state dimension {} does not match Hamiltonian dimension {}",
            rho0.matrix().nrows(),
            h.matrix.nrows()
        )));
    }
    if tau == 0.0 {
        return Ok(rho0.clone());
    }
    let u = h.propagator(tau);
    let rho = &u * rho0.matrix() * u.adjoint();
    Ok(HybridState::from_matrix_unchecked(rho))
}

/// Trace of the `|e⟩` block.
pub fn excited_population(rho: &HybridState) -> f64 {
    let d = rho.dim();
    (0..d).map(|n| rho.matrix()[(d + n, d + n)].re).sum()
}

/// Closed-form initial slope `dP_e/dτ|₀` for `|±_φ⟩⟨±_φ| ⊗ ρ_f`.
///
/// * carrier: `∓ sin φ ⟨F₀(n̂)⟩`
/// * red: `± ½⟨F₁ â e^{−iφ} + â† F₁ e^{iφ}⟩`
/// * blue: `± ½⟨â† F₁ e^{−iφ} + F₁ â e^{iφ}⟩`
pub fn analytic_slope(probe: &ProbeState, rho_f: &MotionalState, drives: &DriveSet) -> Result<f64> {
    drives.validate()?;
    let d = rho_f.dim();
    let f = drives.combined_coupling(d)?;
    let s = probe.sign().value();
    let phi = probe.phase();
    let rho = rho_f.matrix();
    match drives.kind {
        DriveKind::Carrier => {
            let mean: f64 = (0..d).map(|n| f[n] * rho[(n, n)].re).sum();
            Ok(-s * phi.sin() * mean)
        }
        DriveKind::RedSideband | DriveKind::BlueSideband => {
            // ⟨F₁ â⟩ = Σ_n F₁(n)√(n+1) ρ_{n+1,n}; ⟨â† F₁⟩ = its conjugate.
            let mut f_a = ZERO;
            for n in 0..d - 1 {
                f_a += rho[(n + 1, n)] * (f[n] * ((n + 1) as f64).sqrt());
            }
            let e = C64::from_polar(1.0, -phi);
            let value = match drives.kind {
                DriveKind::RedSideband => (f_a * e).re,
                _ => (f_a.conj() * e).re,
            };
            Ok(s * value)
        }
    }
}

/// `(1/i) Tr[ρ [|e⟩⟨e| ⊗ I, H]]` for an arbitrary hybrid state.
pub fn ehrenfest_slope(rho: &HybridState, h: &InteractionHamiltonian) -> Result<f64> {
    let n2 = h.matrix.nrows();
    if rho.matrix().nrows() != n2 {
        return Err(Error::domain("state and Hamiltonian dimensions differ"));
    }
    let d = n2 / 2;
    // [P, H] keeps only the e-g and g-e blocks: +H_eg and −H_ge.
    let r = rho.matrix();
    let hm = &h.matrix;
    let mut acc = ZERO;
    for a in 0..d {
        for b in 0..d {
            // Tr[ρ P H] − Tr[ρ H P] restricted to the off-diagonal blocks
            acc += r[(b, d + a)] * hm[(d + a, b)];
            acc -= r[(d + a, b)] * hm[(b, d + a)];
        }
    }
    Ok((acc / I).re)
}

/// Central-difference estimate of `dP_e/dτ|₀` from exact evolution at ±h.
pub fn finite_difference_slope(h: &InteractionHamiltonian, rho0: &HybridState, step: f64) -> Result<f64> {
    let plus = excited_population(&evolve(h, rho0, step)?);
    let minus = excited_population(&evolve(h, rho0, -step)?);
    Ok((plus - minus) / (2.0 * step))
}
