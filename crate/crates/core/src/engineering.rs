//! Laser-weight engineering: choose the relative Rabi frequencies of `N`
//! simultaneous drives so that the first `N` Taylor coefficients of the
//! combined coupling hit a target (typically a single monomial `n̂ᵖ`).

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::couplings::{self, CouplingKind};
use crate::error::{Error, Result};
use crate::linalg::{self, RMatrix};

/// Condition numbers above this are refused.
pub const MAX_CONDITION: f64 = 1e12;
pub const DEFAULT_PROFILE_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineeringProblem {
    pub etas: Vec<f64>,
    /// Desired `c_0 … c_{N−1}`.
    pub target: Vec<f64>,
    pub m_max: usize,
    pub kind: CouplingKind,
    /// Number of Fock levels over which the residual profile is reported.
    pub profile_dim: usize,
}

impl EngineeringProblem {
    /// Carrier (F₀) problem with the default inner truncation order.
    pub fn new(etas: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        Self::with_kind(CouplingKind::F0, etas, target)
    }

    pub fn with_kind(kind: CouplingKind, etas: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        let eta_max = etas.iter().copied().fold(0.0, f64::max);
        let m_max = couplings::default_m_max(eta_max, etas.len());
        let p = EngineeringProblem { etas, target, m_max, kind, profile_dim: DEFAULT_PROFILE_DIM };
        p.validate()?;
        Ok(p)
    }

    /// Target `c_p = 1`, all other controlled coefficients 0.
    pub fn monomial(kind: CouplingKind, etas: Vec<f64>, p: usize) -> Result<Self> {
        let n = etas.len();
        if p >= n {
            return Err(Error::domain(format!("monomial order {p} needs more than {n} lasers")));
        }
        let mut target = vec![0.0; n];
        target[p] = 1.0;
        Self::with_kind(kind, etas, target)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.etas.len();
        if n == 0 {
            return Err(Error::domain("at least one laser is required"));
        }
        if self.target.len() != n {
            return Err(Error::domain(format!("target has {} entries for {n} lasers", self.target.len())));
        }
        if let Some(bad) = self.etas.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
            return Err(Error::domain(format!("Lamb-Dicke parameters must be > 0, got {bad}")));
        }
        check_distinct(&self.etas)?;
        if self.m_max + 1 < n {
            return Err(Error::domain("m_max must be at least N - 1"));
        }
        Ok(())
    }
}

fn check_distinct(etas: &[f64]) -> Result<()> {
    for i in 0..etas.len() {
        for j in i + 1..etas.len() {
            if etas[i] == etas[j] {
                return Err(Error::Singular(format!(
                    "lasers {i} and {j} share eta = {}; the coefficient matrix is rank deficient",
                    etas[i]
                )));
            }
        }
    }
    Ok(())
}

/// `N×N` matrix `M[p][j]` mapping laser weights to `c_0 … c_{N−1}`.
pub fn coefficient_matrix(kind: CouplingKind, etas: &[f64], m_max: usize) -> Result<RMatrix> {
    check_distinct(etas)?;
    let n = etas.len();
    if n == 0 {
        return Err(Error::domain("at least one laser is required"));
    }
    let cols = couplings::coefficient_columns(kind, etas, n - 1, m_max.max(n - 1))?;
    Ok(RMatrix::from_fn(n, n, |p, j| cols[j][p]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineeringSolution {
    pub kind: CouplingKind,
    pub etas: Vec<f64>,
    pub target: Vec<f64>,
    /// Solution of `M·w = target`.
    pub raw_weights: Vec<f64>,
    /// `raw_weights / scale`, so the largest magnitude is exactly 1
    /// (the `Ω_j/Ω_L` reported to an experimenter).
    pub omega_ratio: Vec<f64>,
    /// `max_j |raw_weights[j]|`. Driving with `omega_ratio` realizes the
    /// coefficients `target/scale`, so a measured slope is multiplied by
    /// `scale` to recover the targeted quantity.
    pub scale: f64,
    pub condition_number: f64,
    /// `|F(n) − Σ_p t_p nᵖ|` for `n < profile_dim`, evaluated with the raw weights.
    pub residual_profile: Vec<f64>,
    /// Lasers whose weight is negative, realized by a π phase offset.
    pub phase_flipped: Vec<usize>,
}

impl EngineeringSolution {
    /// Physical `Ω_j/Ω_L`. For F1 the solver works with `u_j = w_j η_j`, so
    /// this divides by `η_j` and renormalizes to unit maximum.
    pub fn physical_ratios(&self) -> Vec<f64> {
        match self.kind {
            CouplingKind::F0 => self.omega_ratio.clone(),
            CouplingKind::F1 => {
                let w: Vec<f64> = self.raw_weights.iter().zip(&self.etas).map(|(u, e)| u / e).collect();
                let m = w.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
                w.iter().map(|v| v / m).collect()
            }
        }
    }
}

/// `Σ_p t_p nᵖ` at integer `n`.
pub(crate) fn target_polynomial(target: &[f64], n: usize) -> f64 {
    let nf = n as f64;
    target.iter().enumerate().map(|(p, t)| t * nf.powi(p as i32)).sum()
}

pub fn solve_weights(problem: &EngineeringProblem) -> Result<EngineeringSolution> {
    problem.validate()?;
    let m = coefficient_matrix(problem.kind, &problem.etas, problem.m_max)?;
    let condition = linalg::condition_number(&m);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned {
            condition,
            hint: "respace the Lamb-Dicke parameters further apart or use fewer lasers".into(),
        });
    }
    let rhs = DVector::from_column_slice(&problem.target);
    let w = linalg::solve_refined(&m, &rhs).ok_or_else(|| Error::Singular("LU factorization failed".into()))?;
    let raw_weights: Vec<f64> = w.iter().copied().collect();
    let scale = raw_weights.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let omega_ratio = if scale > 0.0 {
        raw_weights.iter().map(|v| v / scale).collect()
    } else {
        vec![0.0; raw_weights.len()]
    };
    let combined = couplings::combined_diag(&raw_weights, &problem.etas, problem.profile_dim, problem.kind)?;
    let residual_profile = combined
        .iter()
        .enumerate()
        .map(|(n, f)| (f - target_polynomial(&problem.target, n)).abs())
        .collect();
    let phase_flipped = raw_weights.iter().enumerate().filter(|(_, w)| **w < 0.0).map(|(j, _)| j).collect();
    Ok(EngineeringSolution {
        kind: problem.kind,
        etas: problem.etas.clone(),
        target: problem.target.clone(),
        raw_weights,
        omega_ratio,
        scale,
        condition_number: condition,
        residual_profile,
        phase_flipped,
    })
}

/// Estimate of the uncontrolled term's expectation after fixing `N`
/// coefficients: `e^{−η²/2} η^{2N}/(N!)² · n̄ᴺ`, with `nbar_proxy` standing in
/// for the phonon scale of the state being probed.
pub fn residual_bound(n_lasers: usize, eta_max: f64, nbar_proxy: f64) -> f64 {
    if eta_max == 0.0 {
        return 0.0;
    }
    let x = eta_max * eta_max;
    let mut coeff = (-0.5 * x).exp();
    for k in 1..=n_lasers {
        let kf = k as f64;
        coeff *= x / (kf * kf);
    }
    coeff * nbar_proxy.powi(n_lasers as i32)
}

/// `N` Lamb-Dicke parameters equispaced on `[η_max/N, η_max]`.
pub fn equispaced_etas(eta_max: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|j| eta_max * j as f64 / n as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonomialReport {
    pub p: usize,
    /// `|F(n) − nᵖ|` for `n = 0 … d−1`.
    pub profile: Vec<f64>,
    /// Maximum of the profile over `n < d − k_guard`.
    pub max_residual: f64,
    pub checked_levels: usize,
    /// `residual_bound(N, η_max, checked_levels − 1)`.
    pub residual_bound: f64,
}

/// Evaluates how closely the engineered coupling reproduces `n̂ᵖ` on the
/// Fock levels `n < d − k_guard`.
pub fn verify_monomial(solution: &EngineeringSolution, d: usize, p: usize, k_guard: usize) -> Result<MonomialReport> {
    if k_guard >= d {
        return Err(Error::domain(format!("guard {k_guard} leaves no levels in dimension {d}")));
    }
    let combined = couplings::combined_diag(&solution.raw_weights, &solution.etas, d, solution.kind)?;
    let profile: Vec<f64> =
        combined.iter().enumerate().map(|(n, f)| (f - (n as f64).powi(p as i32)).abs()).collect();
    let checked = d - k_guard;
    let max_residual = profile[..checked].iter().copied().fold(0.0, f64::max);
    let eta_max = solution.etas.iter().copied().fold(0.0, f64::max);
    Ok(MonomialReport {
        p,
        profile,
        max_residual,
        checked_levels: checked,
        residual_bound: residual_bound(solution.etas.len(), eta_max, (checked - 1) as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn coefficient_matrix_examples() {
        let m = coefficient_matrix(CouplingKind::F0, &[0.3], 20).unwrap();
        assert_eq!(m.shape(), (1, 1));
        assert_abs_diff_eq!(m[(0, 0)], (-0.045f64).exp(), epsilon = 1e-15);

        let m = coefficient_matrix(CouplingKind::F0, &[0.3, 0.6], 20).unwrap();
        assert_abs_diff_eq!(m[(0, 0)], (-0.045f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(m[(0, 1)], (-0.18f64).exp(), epsilon = 1e-15);

        let w = DVector::from_vec(vec![0.7, -0.2]);
        let c1 = &m * &w;
        let c2 = &m * (&w * 2.0);
        assert!((c2 - c1 * 2.0).amax() < 1e-15);

        assert!(matches!(coefficient_matrix(CouplingKind::F0, &[0.3, 0.3], 20), Err(Error::Singular(_))));
    }

    #[test]
    fn solve_examples() {
        let s = solve_weights(&EngineeringProblem::new(vec![0.3], vec![1.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(s.raw_weights[0], 0.045f64.exp(), epsilon = 1e-13);
        assert_abs_diff_eq!(s.omega_ratio[0], 1.0, epsilon = 1e-15);

        let p = EngineeringProblem::new(vec![0.3, 0.6], vec![0.0, 1.0]).unwrap();
        let s = solve_weights(&p).unwrap();
        let c = couplings::taylor_coeffs(&s.raw_weights, &p.etas, 1, p.m_max).unwrap();
        assert_abs_diff_eq!(c.c[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.c[1], 1.0, epsilon = 1e-12);
        assert!(!s.phase_flipped.is_empty());

        assert!(matches!(EngineeringProblem::new(vec![0.3, 0.3], vec![1.0, 0.0]), Err(Error::Singular(_))));
        assert!(EngineeringProblem::new(vec![0.0, 0.3], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn ill_conditioning_is_reported() {
        let etas = vec![0.3, 0.3 + 1e-7, 0.3 + 2e-7, 0.3 + 3e-7];
        let err = solve_weights(&EngineeringProblem::new(etas, vec![0.0, 1.0, 0.0, 0.0]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::IllConditioned { .. }), "{err:?}");
    }

    #[test]
    fn residual_bound_examples() {
        assert_abs_diff_eq!(residual_bound(5, 1.0, 1.0), (-0.5f64).exp() / 14400.0, epsilon = 1e-18);
        assert!((residual_bound(5, 1.0, 1.0) - 4.21e-5).abs() < 1e-7);
        assert_eq!(residual_bound(3, 0.0, 2.0), 0.0);
        assert_abs_diff_eq!(
            residual_bound(3, 1.5, 2.0),
            (-1.125f64).exp() * 1.5f64.powi(6) / 36.0 * 8.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn verify_monomial_examples() {
        let s = solve_weights(&EngineeringProblem::monomial(CouplingKind::F0, vec![0.3], 0).unwrap()).unwrap();
        let r = verify_monomial(&s, 8, 0, 2).unwrap();
        assert!(r.profile[0] < 1e-14);
        assert!(r.profile.windows(2).all(|w| w[1] >= w[0]));

        let etas = equispaced_etas(1.0, 5);
        assert_eq!(etas, vec![0.2, 0.4, 0.6, 0.8, 1.0]);
        let s = solve_weights(&EngineeringProblem::monomial(CouplingKind::F0, etas, 1).unwrap()).unwrap();
        let r = verify_monomial(&s, 12, 1, 2).unwrap();
        assert_eq!(r.checked_levels, 10);
        assert!(r.max_residual < 10.0 * residual_bound(5, 1.0, 9.0));

        let zero = solve_weights(&EngineeringProblem::new(vec![0.2, 0.5], vec![0.0, 0.0]).unwrap()).unwrap();
        assert!(zero.raw_weights.iter().all(|w| *w == 0.0));
        assert!(zero.residual_profile.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn residual_nonincreasing_with_more_lasers() {
        let mut last = f64::INFINITY;
        for n in 2..=5 {
            let etas = equispaced_etas(0.8, n);
            let s = solve_weights(&EngineeringProblem::monomial(CouplingKind::F0, etas, 1).unwrap()).unwrap();
            let r = verify_monomial(&s, 9, 1, 0).unwrap();
            assert!(r.max_residual <= last, "N={n}: {} > {last}", r.max_residual);
            last = r.max_residual;
        }
    }

    #[test]
    fn condition_grows_as_etas_cluster() {
        let mut prev = f64::INFINITY;
        for k in 1..=30 {
            let delta = 0.01 * k as f64;
            let m = coefficient_matrix(CouplingKind::F0, &[0.3, 0.3 + delta], 30).unwrap();
            let c = linalg::condition_number(&m);
            assert!(c <= prev * (1.0 + 1e-12), "delta={delta}");
            prev = c;
        }
    }

    #[test]
    fn sideband_flat_coupling() {
        // F₁ ≈ 1 from three red-sideband lasers
        let etas = vec![0.05, 0.1, 0.15];
        let s = solve_weights(&EngineeringProblem::monomial(CouplingKind::F1, etas.clone(), 0).unwrap()).unwrap();
        let f = couplings::combined_diag(&s.raw_weights, &etas, 10, CouplingKind::F1).unwrap();
        assert!(f.iter().all(|v| (v - 1.0).abs() < 1e-5));
        let phys = s.physical_ratios();
        assert_abs_diff_eq!(phys.iter().fold(0.0_f64, |a, b| a.max(b.abs())), 1.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn round_trip_and_scale_covariance(
            target in proptest::collection::vec(-2.0f64..2.0, 3),
            s in prop_oneof![0.1f64..10.0, -10.0f64..-0.1],
        ) {
            prop_assume!(target.iter().any(|t| t.abs() > 1e-3));
            let etas = vec![0.25, 0.55, 0.85];
            let p = EngineeringProblem::new(etas.clone(), target.clone()).unwrap();
            let sol = solve_weights(&p).unwrap();
            let c = couplings::taylor_coeffs(&sol.raw_weights, &etas, 2, p.m_max).unwrap();
            for k in 0..3 {
                prop_assert!((c.c[k] - target[k]).abs() <= 1e-9 * sol.condition_number);
            }
            prop_assert!((sol.omega_ratio.iter().fold(0.0_f64, |a, b| a.max(b.abs())) - 1.0).abs() < 1e-12);

            let scaled: Vec<f64> = target.iter().map(|t| t * s).collect();
            let sol2 = solve_weights(&EngineeringProblem::new(etas, scaled).unwrap()).unwrap();
            for (a, b) in sol.raw_weights.iter().zip(&sol2.raw_weights) {
                prop_assert!((a * s - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
            for (a, b) in sol.omega_ratio.iter().zip(&sol2.omega_ratio) {
                prop_assert!((a * s.signum() - b).abs() < 1e-12);
            }
        }
    }
}
