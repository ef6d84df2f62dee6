//! N ions sharing N collective modes, driven on the carrier.
//!
//! Basis ordering is internal-major: the index of `|s₁…s_N⟩ ⊗ |n₁…n_N⟩` is
//! `s·D + m`, where `s` reads the ion bits with ion 0 most significant
//! (`g = 0`, `e = 1`) and `m` is the row-major mode multi-index with mode 0
//! most significant. Ion indices are zero-based.
//!
//! Mode frequencies are accepted for bookkeeping but never used: the
//! interaction picture removes them and the carrier coupling commutes with
//! every mode population.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::couplings;
use crate::error::{Error, Result};
use crate::fock::{self, MotionalState, ProbeState};
use crate::linalg::{self, CMatrix, RMatrix, C64};

pub const DEFAULT_DIM_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_ions: usize,
    pub mode_dims: Vec<usize>,
    pub mode_etas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_frequencies: Option<Vec<f64>>,
    #[serde(default = "default_cap")]
    pub dim_cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_DIM_CAP
}

impl ChainConfig {
    pub fn new(mode_dims: Vec<usize>, mode_etas: Vec<f64>) -> Result<Self> {
        let cfg = ChainConfig {
            n_ions: mode_dims.len(),
            mode_dims,
            mode_etas,
            mode_frequencies: None,
            dim_cap: DEFAULT_DIM_CAP,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions == 0 {
            return Err(Error::domain("chain needs at least one ion"));
        }
        if self.mode_dims.len() != self.n_ions || self.mode_etas.len() != self.n_ions {
            return Err(Error::domain(format!(
                "{} ions need {} modes; got {} dims and {} etas",
                self.n_ions,
                self.n_ions,
                self.mode_dims.len(),
                self.mode_etas.len()
            )));
        }
        if let Some(f) = &self.mode_frequencies {
            if f.len() != self.n_ions {
                return Err(Error::domain("one mode frequency per ion expected"));
            }
        }
        if let Some(d) = self.mode_dims.iter().find(|d| **d < 2) {
            return Err(Error::domain(format!("mode dimension must be >= 2, got {d}")));
        }
        if let Some(e) = self.mode_etas.iter().find(|e| !(**e >= 0.0) || !e.is_finite()) {
            return Err(Error::domain(format!("Lamb-Dicke parameters must be finite and >= 0, got {e}")));
        }
        let requested = self.total_dim_unchecked();
        if requested.is_none_or(|r| r > self.dim_cap) {
            return Err(Error::Resource { requested: requested.unwrap_or(usize::MAX), cap: self.dim_cap });
        }
        Ok(())
    }

    fn total_dim_unchecked(&self) -> Option<usize> {
        let internal = 1usize.checked_shl(self.n_ions as u32)?;
        self.mode_dims.iter().try_fold(internal, |acc, d| acc.checked_mul(*d))
    }

    pub fn internal_dim(&self) -> usize {
        1 << self.n_ions
    }

    pub fn mode_dim(&self) -> usize {
        self.mode_dims.iter().product()
    }

    pub fn total_dim(&self) -> usize {
        self.internal_dim() * self.mode_dim()
    }
}

/// `Π_j f₀(n_j; η_j)` over the joint mode space, mode 0 most significant.
pub fn collective_coupling(config: &ChainConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let factors: Vec<Vec<f64>> = config
        .mode_dims
        .iter()
        .zip(&config.mode_etas)
        .map(|(&d, &eta)| couplings::f0_diag(eta, d).map(|c| c.values))
        .collect::<Result<_>>()?;
    let dims = &config.mode_dims;
    Ok((0..config.mode_dim())
        .into_par_iter()
        .map(|mut m| {
            let mut v = 1.0;
            for j in (0..dims.len()).rev() {
                v *= factors[j][m % dims[j]];
                m /= dims[j];
            }
            v
        })
        .collect())
}

/// `(Σ_k σ⁺_k + σ⁻_k) ⊗ 𝓕̂₀`, stored as its two factors.
#[derive(Debug)]
pub struct ChainHamiltonian {
    config: ChainConfig,
    coupling: Vec<f64>,
    spin: RMatrix,
    spin_eigen: OnceLock<(DVector<f64>, RMatrix)>,
}

impl ChainHamiltonian {
    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    /// `Σ_k σ_x^{(k)}` on the internal space.
    pub fn spin_part(&self) -> &RMatrix {
        &self.spin
    }

    pub fn dim(&self) -> usize {
        self.config.total_dim()
    }

    pub fn to_dense(&self) -> CMatrix {
        let dm = self.coupling.len();
        let di = self.spin.nrows();
        let mut out = CMatrix::zeros(di * dm, di * dm);
        for s in 0..di {
            for t in 0..di {
                let x = self.spin[(s, t)];
                if x != 0.0 {
                    for (m, f) in self.coupling.iter().enumerate() {
                        out[(s * dm + m, t * dm + m)] = C64::new(x * f, 0.0);
                    }
                }
            }
        }
        out
    }

    /// `exp(−iτ f S)` on the internal space for one coupling value `f`.
    fn internal_propagator(&self, f: f64, tau: f64) -> CMatrix {
        let (vals, vecs) = self.spin_eigen.get_or_init(|| {
            let e = SymmetricEigen::new(self.spin.clone());
            (e.eigenvalues, e.eigenvectors)
        });
        let di = vals.len();
        let mut out = CMatrix::zeros(di, di);
        for k in 0..di {
            let phase = C64::from_polar(1.0, -tau * f * vals[k]);
            for r in 0..di {
                for c in 0..di {
                    out[(r, c)] += phase * vecs[(r, k)] * vecs[(c, k)];
                }
            }
        }
        out
    }
}

pub fn build_chain_carrier(config: &ChainConfig) -> Result<ChainHamiltonian> {
    let coupling = collective_coupling(config)?;
    let n = config.n_ions;
    let di = config.internal_dim();
    let mut spin = RMatrix::zeros(di, di);
    for s in 0..di {
        for k in 0..n {
            spin[(s ^ (1 << (n - 1 - k)), s)] = 1.0;
        }
    }
    Ok(ChainHamiltonian { config: config.clone(), coupling, spin, spin_eigen: OnceLock::new() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    n_ions: usize,
    mode_dim: usize,
    matrix: CMatrix,
}

impl ChainState {
    pub fn from_matrix(config: &ChainConfig, matrix: CMatrix) -> Result<Self> {
        config.validate()?;
        if matrix.nrows() != config.total_dim() {
            return Err(Error::domain(format!(
                "chain state has dimension {}, config needs {}",
                matrix.nrows(),
                config.total_dim()
            )));
        }
        fock::validate_density(&matrix)?;
        Ok(ChainState { n_ions: config.n_ions, mode_dim: config.mode_dim(), matrix })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Probability that ion `k` is excited.
    pub fn excited_population(&self, k: usize) -> Result<f64> {
        if k >= self.n_ions {
            return Err(Error::domain(format!("ion index {k} out of range for {} ions", self.n_ions)));
        }
        let bit = 1 << (self.n_ions - 1 - k);
        let mut p = 0.0;
        for s in (0..1usize << self.n_ions).filter(|s| s & bit != 0) {
            for m in 0..self.mode_dim {
                let i = s * self.mode_dim + m;
                p += self.matrix[(i, i)].re;
            }
        }
        Ok(p)
    }
}

/// Internal state with `rho_k` on ion `k` and `rho_a` on the remaining ions
/// in their natural order.
fn insert_ion(rho_k: &CMatrix, rho_a: &CMatrix, k: usize, n: usize) -> CMatrix {
    let di = 1usize << n;
    let shift = n - 1 - k;
    let rest = |s: usize| {
        let high = s >> (shift + 1);
        let low = s & ((1 << shift) - 1);
        (high << shift) | low
    };
    DMatrix::from_fn(di, di, |s, t| rho_k[((s >> shift) & 1, (t >> shift) & 1)] * rho_a[(rest(s), rest(t))])
}

/// `ρ_k ⊗ ρ_A ⊗ ρ_f` with the probe on ion `k`.
pub fn chain_initial_state(
    config: &ChainConfig,
    k: usize,
    probe: &ProbeState,
    rho_a: &CMatrix,
    rho_f: &MotionalState,
) -> Result<ChainState> {
    config.validate()?;
    if k >= config.n_ions {
        return Err(Error::domain(format!("ion index {k} out of range for {} ions", config.n_ions)));
    }
    let others = 1usize << (config.n_ions - 1);
    if rho_a.nrows() != others || rho_a.ncols() != others {
        return Err(Error::domain(format!(
            "remaining-ion state must be {others}x{others}, got {}x{}",
            rho_a.nrows(),
            rho_a.ncols()
        )));
    }
    fock::validate_density(rho_a)?;
    if rho_f.dim() != config.mode_dim() {
        return Err(Error::domain(format!(
            "motional state has dimension {}, modes need {}",
            rho_f.dim(),
            config.mode_dim()
        )));
    }
    let internal = insert_ion(&probe.density(), rho_a, k, config.n_ions);
    Ok(ChainState { n_ions: config.n_ions, mode_dim: config.mode_dim(), matrix: linalg::kron(&internal, rho_f.matrix()) })
}

/// Exact evolution using the block structure `H = ⊕_m 𝓕₀(m)·S`.
pub fn evolve_chain(h: &ChainHamiltonian, rho: &ChainState, tau: f64) -> Result<ChainState> {
    if rho.matrix.nrows() != h.dim() {
        return Err(Error::domain("state and Hamiltonian dimensions differ"));
    }
    let dm = h.coupling.len();
    let di = h.spin.nrows();
    let props: Vec<CMatrix> = h.coupling.par_iter().map(|f| h.internal_propagator(*f, tau)).collect();
    let blocks: Vec<(usize, usize, CMatrix)> = (0..dm * dm)
        .into_par_iter()
        .map(|idx| {
            let (m, mp) = (idx / dm, idx % dm);
            let b = CMatrix::from_fn(di, di, |s, t| rho.matrix[(s * dm + m, t * dm + mp)]);
            (m, mp, &props[m] * b * props[mp].adjoint())
        })
        .collect();
    let mut out = CMatrix::zeros(di * dm, di * dm);
    for (m, mp, b) in blocks {
        for s in 0..di {
            for t in 0..di {
                out[(s * dm + m, t * dm + mp)] = b[(s, t)];
            }
        }
    }
    Ok(ChainState { n_ions: rho.n_ions, mode_dim: rho.mode_dim, matrix: out })
}

/// `⟨𝓕̂₀⟩` in a joint motional state.
pub fn collective_mean(config: &ChainConfig, rho_f: &MotionalState) -> Result<f64> {
    let f = collective_coupling(config)?;
    if rho_f.dim() != f.len() {
        return Err(Error::domain(format!("motional state has dimension {}, modes need {}", rho_f.dim(), f.len())));
    }
    Ok(f.iter().zip(rho_f.populations()).map(|(a, p)| a * p).sum())
}

/// Initial slope of ion `k`'s excited population: `∓sinφ·⟨𝓕̂₀⟩`.
pub fn collective_slope(
    config: &ChainConfig,
    k: usize,
    probe: &ProbeState,
    rho_a: &CMatrix,
    rho_f: &MotionalState,
) -> Result<f64> {
    // builds the state only to validate the inputs
    chain_initial_state(config, k, probe, rho_a, rho_f)?;
    Ok(-probe.sign().value() * probe.phase().sin() * collective_mean(config, rho_f)?)
}

/// Central-difference slope of ion `k`'s excited population under the full
/// chain evolution.
pub fn collective_slope_fd(
    config: &ChainConfig,
    k: usize,
    probe: &ProbeState,
    rho_a: &CMatrix,
    rho_f: &MotionalState,
    step: f64,
) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::domain("finite-difference step must be > 0"));
    }
    let rho0 = chain_initial_state(config, k, probe, rho_a, rho_f)?;
    let h = build_chain_carrier(config)?;
    let plus = evolve_chain(&h, &rho0, step)?.excited_population(k)?;
    let minus = evolve_chain(&h, &rho0, -step)?.excited_population(k)?;
    Ok((plus - minus) / (2.0 * step))
}

/// Joint state `ρ₀ ⊗ ρ₁ ⊗ …` of independent modes, mode 0 most significant.
pub fn product_motional_state(modes: &[MotionalState]) -> Result<MotionalState> {
    let first = modes.first().ok_or_else(|| Error::domain("at least one mode state is required"))?;
    let m = modes[1..].iter().fold(first.matrix().clone(), |acc, s| linalg::kron(&acc, s.matrix()));
    MotionalState::from_matrix(m)
}
