//! Phonon distribution on a bounded support from its first moments.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, RMatrix};

/// Largest support index `K` accepted by [`moments_to_distribution`].
pub const MAX_SUPPORT_INDEX: usize = 12;
/// Base tolerance for negative entries, multiplied by `1 + κ·1e-9`.
pub const NEGATIVITY_TOL: f64 = 1e-6;
const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    /// `m_p = ⟨n̂ᵖ⟩` for `p = 0 … K`.
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<Vec<f64>>,
}

impl MomentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let m = MomentVector { values, stderr: None };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let m0 = *self.values.first().ok_or_else(|| Error::domain("moment vector is empty"))?;
        if (m0 - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::domain(format!("zeroth moment must be 1, got {m0}")));
        }
        if let Some(s) = &self.stderr {
            if s.len() != self.values.len() {
                return Err(Error::domain("stderr length differs from moment count"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionEstimate {
    pub probs: Vec<f64>,
    pub condition_number: f64,
    /// Magnitude of the most negative raw entry before clipping (0 if none).
    pub negativity: f64,
}

/// `V[p][n] = nᵖ` for `p, n = 0 … K` (with `0⁰ = 1`).
pub fn moment_matrix(support: usize) -> RMatrix {
    RMatrix::from_fn(support, support, |p, n| (n as f64).powi(p as i32))
}

pub fn negativity_tolerance(condition_number: f64) -> f64 {
    NEGATIVITY_TOL * (1.0 + condition_number * 1e-9)
}

/// Solves `Σ_n nᵖ p(n) = m_p` on `{0 … K}`. Entries in `(−tol, 0)` are
/// clipped to zero and the result renormalized.
pub fn moments_to_distribution(m: &MomentVector, support: usize) -> Result<DistributionEstimate> {
    m.validate()?;
    if support != m.values.len() {
        return Err(Error::domain(format!("support of {support} levels needs {support} moments, got {}", m.values.len())));
    }
    let v = moment_matrix(support);
    let condition = linalg::condition_number(&v);
    if support > MAX_SUPPORT_INDEX + 1 {
        return Err(Error::IllConditioned {
            condition,
            hint: format!("use a support of at most {} levels", MAX_SUPPORT_INDEX + 1),
        });
    }
    let raw = linalg::solve_refined(&v, &DVector::from_column_slice(&m.values))
        .ok_or_else(|| Error::Singular("moment system could not be factorized".into()))?;
    let tol = negativity_tolerance(condition);
    let most_negative = raw.iter().copied().fold(0.0, f64::min);
    if most_negative < -tol {
        return Err(Error::Inconsistent(format!(
            "recovered p(n) reaches {most_negative:.3e}, below -{tol:.1e}; moments incompatible with support {{0..{}}}",
            support - 1
        )));
    }
    let clipped: Vec<f64> = raw.iter().map(|p| p.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Inconsistent("recovered distribution has no positive mass".into()));
    }
    Ok(DistributionEstimate {
        probs: clipped.iter().map(|p| p / total).collect(),
        condition_number: condition,
        negativity: -most_negative,
    })
}

/// `m_p = Σ_n nᵖ p(n)` for `p = 0 … p_max`.
pub fn distribution_to_moments(p: &[f64], p_max: usize) -> Result<MomentVector> {
    if p.is_empty() || p.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::domain("distribution entries must be nonnegative"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::domain(format!("distribution sums to {total}, not 1")));
    }
    let values = (0..=p_max)
        .map(|k| p.iter().enumerate().map(|(n, w)| w * (n as f64).powi(k as i32)).sum())
        .collect();
    Ok(MomentVector { values, stderr: None })
}
