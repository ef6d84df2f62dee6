//! Truncated Fock-space states and the expectation values used as ground
//! truth by every protocol.
//!
//! Basis conventions:
//! * motional basis `|0⟩ … |d−1⟩`, with `d` always supplied by the caller;
//! * hybrid (internal ⊗ motional) basis is internal-major, i.e. index
//!   `s·d + n` with `s = 0` for `|g⟩` and `s = 1` for `|e⟩`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, ONE, ZERO};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const EIGEN_FLOOR: f64 = -1e-10;
/// Pre-normalization tail above which factories attach a truncation warning.
pub const TAIL_WARN: f64 = 1e-8;
/// Protocols refuse states with more than this population in the top levels.
pub const LEAKAGE_LIMIT: f64 = 1e-8;
pub const DEFAULT_GUARD_LEVELS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockBasis {
    dim: usize,
}

impl FockBasis {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::domain(format!("Fock truncation dimension must be >= 2, got {dim}")));
        }
        Ok(FockBasis { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Checks Hermiticity, unit trace and the eigenvalue floor.
pub fn validate_density(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::domain("density matrix must be square"));
    }
    let herm = linalg::hermiticity_defect(m);
    if herm > HERMITIAN_TOL {
        return Err(Error::domain(format!("matrix is not Hermitian (defect {herm:.3e})")));
    }
    let tr = linalg::trace(m);
    if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
        return Err(Error::domain(format!("trace {tr} differs from 1")));
    }
    let min = linalg::min_eigenvalue(m);
    if min < EIGEN_FLOOR {
        return Err(Error::domain(format!("matrix has negative eigenvalue {min:.3e}")));
    }
    Ok(())
}

/// Density operator of the motional mode on a truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionalState {
    basis: FockBasis,
    matrix: CMatrix,
    /// Population that fell outside the basis before renormalization.
    tail: f64,
}

impl MotionalState {
    /// Wraps an explicit density matrix after checking the density invariants.
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        let basis = FockBasis::new(matrix.nrows())?;
        validate_density(&matrix)?;
        Ok(MotionalState { basis, matrix, tail: 0.0 })
    }

    /// Diagonal state from a probability vector (nonnegative, summing to 1).
    pub fn from_populations(probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::domain("populations must be finite and nonnegative"));
        }
        let d = probs.len();
        let m = CMatrix::from_fn(d, d, |i, j| if i == j { C64::new(probs[i], 0.0) } else { ZERO });
        Self::from_matrix(m)
    }

    pub(crate) fn from_parts_unchecked(matrix: CMatrix, tail: f64) -> Self {
        let basis = FockBasis { dim: matrix.nrows() };
        MotionalState { basis, matrix, tail }
    }

    pub fn basis(&self) -> FockBasis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_of_product(&self.matrix, &self.matrix).re
    }

    /// Weight dropped by truncation before renormalization.
    pub fn truncation_tail(&self) -> f64 {
        self.tail
    }

    /// Warning text when the pre-normalization tail is not negligible.
    pub fn truncation_warning(&self) -> Option<String> {
        (self.tail > TAIL_WARN).then(|| {
            format!(
                "truncation at d = {} dropped {:.3e} of the population before renormalization",
                self.dim(),
                self.tail
            )
        })
    }
}

/// Sign token of the internal probe superposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// Internal probe state `(|g⟩ ± e^{iφ}|e⟩)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeState {
    sign: Sign,
    phase: f64,
}

impl ProbeState {
    /// The phase is reduced into `[0, 2π)`.
    pub fn new(sign: Sign, phase: f64) -> Self {
        let mut phase = phase.rem_euclid(TAU);
        if phase >= TAU {
            phase = 0.0;
        }
        ProbeState { sign, phase }
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// Amplitudes `(c_g, c_e)`.
    pub fn amplitudes(&self) -> (C64, C64) {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        (C64::new(r, 0.0), C64::from_polar(r * self.sign.value(), self.phase))
    }

    /// 2×2 density matrix in the `{g, e}` ordering.
    pub fn density(&self) -> CMatrix {
        let (g, e) = self.amplitudes();
        let v = [g, e];
        CMatrix::from_fn(2, 2, |i, j| v[i] * v[j].conj())
    }
}

/// Joint internal ⊗ motional density operator, internal-major ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    basis: FockBasis,
    matrix: CMatrix,
}

impl HybridState {
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        let n = matrix.nrows();
        if n % 2 != 0 {
            return Err(Error::domain("hybrid state dimension must be even"));
        }
        let basis = FockBasis::new(n / 2)?;
        validate_density(&matrix)?;
        Ok(HybridState { basis, matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        let basis = FockBasis { dim: matrix.nrows() / 2 };
        HybridState { basis, matrix }
    }

    pub fn basis(&self) -> FockBasis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_of_product(&self.matrix, &self.matrix).re
    }

    /// Reduced 2×2 internal state.
    pub fn internal_state(&self) -> CMatrix {
        let d = self.dim();
        CMatrix::from_fn(2, 2, |s, t| (0..d).map(|n| self.matrix[(s * d + n, t * d + n)]).sum())
    }

    /// Reduced motional state (trace over the internal levels).
    pub fn motional_matrix(&self) -> CMatrix {
        let d = self.dim();
        CMatrix::from_fn(d, d, |m, n| self.matrix[(m, n)] + self.matrix[(d + m, d + n)])
    }

    /// Internal block `⟨s|ρ|t⟩` as a d×d motional operator.
    pub fn internal_block(&self, s: usize, t: usize) -> CMatrix {
        let d = self.dim();
        self.matrix.view((s * d, t * d), (d, d)).into_owned()
    }

    /// Population of each Fock level summed over the internal levels.
    pub fn motional_populations(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|n| self.matrix[(n, n)].re + self.matrix[(d + n, d + n)].re).collect()
    }
}

pub fn fock_state(n: usize, d: usize) -> Result<MotionalState> {
    FockBasis::new(d)?;
    if n >= d {
        return Err(Error::domain(format!("Fock level {n} outside basis of dimension {d}")));
    }
    let mut m = CMatrix::zeros(d, d);
    m[(n, n)] = ONE;
    Ok(MotionalState::from_parts_unchecked(m, 0.0))
}

/// Coherent state with amplitudes `e^{−|α|²/2} αⁿ/√(n!)`, renormalized on
/// the truncated basis. The dropped weight is kept as the truncation tail.
pub fn coherent_state(alpha: C64, d: usize) -> Result<MotionalState> {
    FockBasis::new(d)?;
    let mu = alpha.norm_sqr();
    let mut amps = Vec::with_capacity(d);
    if mu == 0.0 {
        amps.push(ONE);
        amps.extend(std::iter::repeat_n(ZERO, d - 1));
    } else {
        let ln_r = alpha.norm().ln();
        let theta = alpha.arg();
        let mut ln_fact = 0.0;
        for n in 0..d {
            if n > 0 {
                ln_fact += (n as f64).ln();
            }
            let ln_mag = -0.5 * mu + n as f64 * ln_r - 0.5 * ln_fact;
            amps.push(C64::from_polar(ln_mag.exp(), n as f64 * theta));
        }
    }
    let kept: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let tail = (1.0 - kept).max(0.0);
    let scale = kept.sqrt();
    for a in &mut amps {
        *a /= scale;
    }
    let m = CMatrix::from_fn(d, d, |i, j| amps[i] * amps[j].conj());
    Ok(MotionalState::from_parts_unchecked(m, tail))
}

/// Thermal (Bose-Einstein) state with mean occupation `nbar`, renormalized on
/// the truncated basis.
pub fn thermal_state(nbar: f64, d: usize) -> Result<MotionalState> {
    FockBasis::new(d)?;
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::domain(format!("mean occupation must be finite and >= 0, got {nbar}")));
    }
    let ratio = nbar / (nbar + 1.0);
    let mut probs = Vec::with_capacity(d);
    let mut w = 1.0 / (nbar + 1.0);
    for _ in 0..d {
        probs.push(w);
        w *= ratio;
    }
    let kept: f64 = probs.iter().sum();
    let tail = ratio.powi(d as i32);
    let m = CMatrix::from_fn(d, d, |i, j| if i == j { C64::new(probs[i] / kept, 0.0) } else { ZERO });
    Ok(MotionalState::from_parts_unchecked(m, tail))
}

/// Observable handed to [`expect`]: either a Fock-diagonal function or a
/// dense operator.
#[derive(Debug, Clone, Copy)]
pub enum Observable<'a> {
    Diagonal(&'a [f64]),
    Dense(&'a CMatrix),
}

/// `Tr[ρ·A]`.
pub fn expect(state: &MotionalState, op: Observable<'_>) -> Result<C64> {
    let d = state.dim();
    match op {
        Observable::Diagonal(diag) => {
            if diag.len() != d {
                return Err(Error::domain(format!("operator length {} vs state dimension {d}", diag.len())));
            }
            Ok((0..d).map(|n| state.matrix[(n, n)] * diag[n]).sum())
        }
        Observable::Dense(m) => {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::domain(format!("operator shape {:?} vs state dimension {d}", m.shape())));
            }
            Ok(linalg::trace_of_product(&state.matrix, m))
        }
    }
}

/// `⟨n̂ᵖ⟩ = Σ_n nᵖ ρ_nn`; the ground-truth oracle for all moment protocols.
pub fn number_moment(state: &MotionalState, p: u32) -> f64 {
    state
        .matrix
        .diagonal()
        .iter()
        .enumerate()
        .map(|(n, z)| (n as f64).powi(p as i32) * z.re)
        .sum()
}

/// Total population in the top `k_tail` levels of the basis.
pub fn leakage(state: &MotionalState, k_tail: usize) -> Result<f64> {
    let d = state.dim();
    if k_tail == 0 || k_tail >= d {
        return Err(Error::domain(format!("k_tail must satisfy 0 < k_tail < {d}, got {k_tail}")));
    }
    Ok(state.matrix.diagonal().iter().skip(d - k_tail).map(|z| z.re).sum())
}

/// `|±_φ⟩⟨±_φ| ⊗ ρ_f`.
pub fn hybrid_product(probe: &ProbeState, motional: &MotionalState) -> HybridState {
    let m = linalg::kron(&probe.density(), motional.matrix());
    HybridState::from_matrix_unchecked(m)
}

pub fn annihilation(d: usize) -> CMatrix {
    let mut a = CMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn number_diag(d: usize) -> Vec<f64> {
    (0..d).map(|n| n as f64).collect()
}
