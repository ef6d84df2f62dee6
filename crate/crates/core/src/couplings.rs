//! Nonlinear carrier and first-sideband couplings `f₀(n̂;η)`, `f₁(n̂;η)`,
//! their multi-laser sums, and the Taylor coefficients of those sums in
//! powers of `n̂`.
//!
//! In the Fock basis both couplings are diagonal:
//!
//! ```text
//! f₀(n;η) = e^{−η²/2} Σ_{l=0}^{n} (−η²)^l / (l!)²      · n!/(n−l)!
//! f₁(n;η) = e^{−η²/2} Σ_{l=0}^{n} (−η²)^l / (l!(l+1)!) · n!/(n−l)!
//! ```
//!
//! The factorial sums overflow and cancel catastrophically past n ≈ 20, so
//! the production path runs a three-term recurrence on the already
//! prefactored quantity; the literal sum is kept as [`coupling_series`] for
//! small `n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which of the two coupling families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    /// Carrier coupling `f₀`.
    F0,
    /// First red/blue sideband coupling `f₁`.
    F1,
}

/// Fock-diagonal values of `f₀` or `f₁` for one Lamb-Dicke parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingDiag {
    pub values: Vec<f64>,
    pub eta: f64,
    pub kind: CouplingKind,
}

/// Largest `n` accepted by the literal-sum reference path.
pub const SERIES_REFERENCE_MAX_N: usize = 15;
/// Cap on the inner Taylor truncation order.
pub const M_MAX_CAP: usize = 60;
/// Largest acceptable dropped tail of the inner Taylor series.
pub const TAIL_TOLERANCE: f64 = 1e-14;

fn check_eta(eta: f64) -> Result<()> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::domain(format!("Lamb-Dicke parameter must be finite and >= 0, got {eta}")));
    }
    Ok(())
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::domain("coupling dimension must be >= 1"));
    }
    Ok(())
}

/// `f₀(n;η)` for `n = 0 … d−1`.
///
/// Runs `(n+1) g_{n+1} = (2n+1−x) g_n − n g_{n−1}` on `g_n = e^{−x/2} L_n(x)`,
/// `x = η²`.
pub fn f0_diag(eta: f64, d: usize) -> Result<CouplingDiag> {
    check_eta(eta)?;
    check_dim(d)?;
    let x = eta * eta;
    let g0 = (-0.5 * x).exp();
    let mut values = Vec::with_capacity(d);
    values.push(g0);
    if d > 1 {
        values.push(g0 * (1.0 - x));
    }
    for n in 1..d.saturating_sub(1) {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 - x) * values[n] - nf * values[n - 1]) / (nf + 1.0);
        values.push(next);
    }
    Ok(CouplingDiag { values, eta, kind: CouplingKind::F0 })
}

/// `f₁(n;η)` for `n = 0 … d−1`.
///
/// Runs the recurrence directly on `h_n = e^{−x/2} L_n¹(x)/(n+1)`:
/// `(n+2) h_{n+1} = (2n+2−x) h_n − n h_{n−1}`.
pub fn f1_diag(eta: f64, d: usize) -> Result<CouplingDiag> {
    check_eta(eta)?;
    check_dim(d)?;
    let x = eta * eta;
    let h0 = (-0.5 * x).exp();
    let mut values = Vec::with_capacity(d);
    values.push(h0);
    if d > 1 {
        values.push(h0 * (2.0 - x) / 2.0);
    }
    for n in 1..d.saturating_sub(1) {
        let nf = n as f64;
        let next = ((2.0 * nf + 2.0 - x) * values[n] - nf * values[n - 1]) / (nf + 2.0);
        values.push(next);
    }
    Ok(CouplingDiag { values, eta, kind: CouplingKind::F1 })
}

pub fn coupling_diag(kind: CouplingKind, eta: f64, d: usize) -> Result<CouplingDiag> {
    match kind {
        CouplingKind::F0 => f0_diag(eta, d),
        CouplingKind::F1 => f1_diag(eta, d),
    }
}

/// Generalized Laguerre polynomials `L_k^α(x)` for `k = 0 … n_max`.
pub fn laguerre_table(n_max: usize, alpha: f64, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max >= 1 {
        out.push(1.0 + alpha - x);
    }
    for k in 1..n_max {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * out[k] - (kf + alpha) * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Independent evaluation through the Laguerre identities
/// `f₀ = e^{−η²/2} L_n(η²)` and `f₁ = e^{−η²/2} L_n¹(η²)/(n+1)`, with the
/// prefactor applied after the polynomial is formed.
pub fn laguerre_oracle(eta: f64, d: usize, kind: CouplingKind) -> Result<CouplingDiag> {
    check_eta(eta)?;
    check_dim(d)?;
    let x = eta * eta;
    let pref = (-0.5 * x).exp();
    let values = match kind {
        CouplingKind::F0 => laguerre_table(d - 1, 0.0, x).into_iter().map(|l| pref * l).collect(),
        CouplingKind::F1 => laguerre_table(d - 1, 1.0, x)
            .into_iter()
            .enumerate()
            .map(|(n, l)| pref * l / (n as f64 + 1.0))
            .collect(),
    };
    Ok(CouplingDiag { values, eta, kind })
}

/// The literal finite sum defining `f₀`/`f₁` at a single `n ≤ 15`.
/// Slow reference path; not used by the simulators.
pub fn coupling_series(kind: CouplingKind, eta: f64, n: usize) -> Result<f64> {
    check_eta(eta)?;
    if n > SERIES_REFERENCE_MAX_N {
        return Err(Error::domain(format!(
            "literal series is limited to n <= {SERIES_REFERENCE_MAX_N}, got {n}"
        )));
    }
    let x = eta * eta;
    let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    let shift = match kind {
        CouplingKind::F0 => 0,
        CouplingKind::F1 => 1,
    };
    let mut sum = 0.0;
    for l in 0..=n {
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        let falling = fact(n) / fact(n - l);
        sum += sign * x.powi(l as i32) / (fact(l) * fact(l + shift)) * falling;
    }
    Ok((-0.5 * x).exp() * sum)
}

/// Unsigned Stirling numbers of the first kind `c(m, p)` for
/// `0 ≤ p ≤ m ≤ m_max`, in exact integer arithmetic.
///
/// `c(m, p) = c(m−1, p−1) + (m−1)·c(m−1, p)`; overflow is reported rather
/// than wrapped.
pub fn stirling_first_table(m_max: usize) -> Result<Vec<Vec<u128>>> {
    let mut table = vec![vec![0u128; m_max + 1]; m_max + 1];
    table[0][0] = 1;
    for m in 1..=m_max {
        for p in 1..=m {
            let carry = (m as u128 - 1)
                .checked_mul(table[m - 1][p])
                .and_then(|v| v.checked_add(table[m - 1][p - 1]))
                .ok_or_else(|| Error::domain(format!("c({m}, {p}) overflows 128-bit integers")))?;
            table[m][p] = carry;
        }
    }
    Ok(table)
}

/// `a_p^m`: 1 when `p = m`, otherwise the sum of all products of `m − p`
/// distinct integers drawn from `{1, …, m−1}`. This is the elementary
/// symmetric polynomial `e_{m−p}(1, …, m−1)`, i.e. the unsigned Stirling
/// number of the first kind, and satisfies
/// `n!/(n−m)! = Σ_{p=1}^{m} (−1)^{m−p} a_p^m nᵖ`.
pub fn a_pm(p: usize, m: usize) -> Result<u128> {
    if p < 1 || p > m {
        return Err(Error::domain(format!("a_p^m needs 1 <= p <= m, got p = {p}, m = {m}")));
    }
    if p == m {
        return Ok(1);
    }
    // e_k(1..m−1) by the running recurrence e_k ← e_k + j·e_{k−1}
    let k_target = m - p;
    let mut e = vec![0u128; k_target + 1];
    e[0] = 1;
    for j in 1..m {
        for k in (1..=k_target.min(j)).rev() {
            e[k] = (j as u128)
                .checked_mul(e[k - 1])
                .and_then(|v| v.checked_add(e[k]))
                .ok_or_else(|| Error::domain(format!("a_{p}^{m} overflows 128-bit integers")))?;
        }
    }
    Ok(e[k_target])
}

/// `c(m,p)/m!` for `0 ≤ p ≤ m ≤ m_max` in floating point. All entries lie in
/// `[0, 1]`, so the table stays finite where the integer one overflows.
pub(crate) fn scaled_stirling_table(m_max: usize) -> Vec<Vec<f64>> {
    let mut s = vec![vec![0.0; m_max + 1]; m_max + 1];
    s[0][0] = 1.0;
    for m in 1..=m_max {
        let mf = m as f64;
        for p in 1..=m {
            s[m][p] = (s[m - 1][p - 1] + (mf - 1.0) * s[m - 1][p]) / mf;
        }
    }
    s
}

/// `x^m / m!` (F0) or `x^m / (m+1)!` (F1) for `m = 0 … m_max`.
fn power_over_factorial(kind: CouplingKind, x: f64, m_max: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(m_max + 1);
    t.push(1.0);
    for m in 1..=m_max {
        let denom = match kind {
            CouplingKind::F0 => m as f64,
            CouplingKind::F1 => m as f64 + 1.0,
        };
        let prev = t[m - 1];
        t.push(prev * x / denom);
    }
    t
}

/// Inner sums `S_p(η) = Σ_{m=p}^{m_max} a_p^m x^m/(m!·(m+k)!)` for
/// `p = 0 … p_max`, with `k = 0` for F0 and `k = 1` for F1, plus the
/// largest dropped tail across `p`.
fn inner_sums(kind: CouplingKind, eta: f64, p_max: usize, m_max: usize, stirling: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let x = eta * eta;
    let extra = stirling.len() - 1;
    let pw = power_over_factorial(kind, x, extra);
    let mut sums = vec![0.0; p_max + 1];
    let mut worst_tail = 0.0_f64;
    for (p, sum) in sums.iter_mut().enumerate() {
        for m in p..=m_max {
            *sum += stirling[m][p] * pw[m];
        }
        let tail: f64 = (m_max + 1..=extra).map(|m| stirling[m][p] * pw[m]).sum();
        worst_tail = worst_tail.max(tail);
    }
    (sums, worst_tail)
}

/// Smallest `m ≥ p_max` with `η^{2m}/m! < 1e-16`, capped at [`M_MAX_CAP`].
/// Since `a_p^m ≤ m!`, this bounds every term of the dropped tail.
pub fn default_m_max(eta_max: f64, p_max: usize) -> usize {
    let x = eta_max * eta_max;
    let mut term = 1.0;
    let mut m = 0usize;
    while m < M_MAX_CAP {
        if m >= p_max && term < 1e-16 {
            return m;
        }
        m += 1;
        term *= x / m as f64;
    }
    M_MAX_CAP.max(p_max)
}

/// Taylor coefficients of a multi-laser coupling in powers of `n̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorCoeffs {
    pub c: Vec<f64>,
    pub p_max: usize,
    pub m_max: usize,
}

/// Per-laser coefficient contributions `M[p][j]` so that `c = M·w`.
pub(crate) fn coefficient_columns(
    kind: CouplingKind,
    etas: &[f64],
    p_max: usize,
    m_max: usize,
) -> Result<Vec<Vec<f64>>> {
    if m_max < p_max {
        return Err(Error::domain(format!("m_max ({m_max}) must be >= p_max ({p_max})")));
    }
    for &eta in etas {
        check_eta(eta)?;
    }
    let stirling = scaled_stirling_table(m_max + 40);
    let mut cols = Vec::with_capacity(etas.len());
    for &eta in etas {
        let (sums, tail) = inner_sums(kind, eta, p_max, m_max, &stirling);
        if tail > TAIL_TOLERANCE {
            return Err(Error::Precision(format!(
                "inner series truncated at m_max = {m_max} drops {tail:.3e} for eta = {eta}; raise m_max"
            )));
        }
        let pref = (-0.5 * eta * eta).exp();
        cols.push(
            sums.into_iter()
                .enumerate()
                .map(|(p, s)| if p % 2 == 0 { pref * s } else { -pref * s })
                .collect(),
        );
    }
    Ok(cols)
}

/// `c_p` of `F₀(n̂) = Σ_j w_j f₀(n̂;η_j) = Σ_p c_p n̂ᵖ` for `p = 0 … p_max`.
pub fn taylor_coeffs(weights: &[f64], etas: &[f64], p_max: usize, m_max: usize) -> Result<TaylorCoeffs> {
    taylor_coeffs_for(CouplingKind::F0, weights, etas, p_max, m_max)
}

/// As [`taylor_coeffs`], for either coupling family. For F1 the weights are
/// the effective weights `u_j = w_j η_j`.
pub fn taylor_coeffs_for(
    kind: CouplingKind,
    weights: &[f64],
    etas: &[f64],
    p_max: usize,
    m_max: usize,
) -> Result<TaylorCoeffs> {
    if weights.len() != etas.len() || weights.is_empty() {
        return Err(Error::domain(format!(
            "weights ({}) and etas ({}) must be non-empty and of equal length",
            weights.len(),
            etas.len()
        )));
    }
    let cols = coefficient_columns(kind, etas, p_max, m_max)?;
    let c = (0..=p_max).map(|p| cols.iter().zip(weights).map(|(col, w)| w * col[p]).sum()).collect();
    Ok(TaylorCoeffs { c, p_max, m_max })
}

/// Pointwise `Σ_j w_j f_kind(n;η_j)` over `n = 0 … d−1`. For F1 pass the
/// effective weights `w_j η_j`.
pub fn combined_diag(weights: &[f64], etas: &[f64], d: usize, kind: CouplingKind) -> Result<Vec<f64>> {
    if weights.len() != etas.len() {
        return Err(Error::domain(format!(
            "weights ({}) and etas ({}) differ in length",
            weights.len(),
            etas.len()
        )));
    }
    check_dim(d)?;
    let mut out = vec![0.0; d];
    for (&w, &eta) in weights.iter().zip(etas) {
        let f = coupling_diag(kind, eta, d)?;
        for (o, v) in out.iter_mut().zip(&f.values) {
            *o += w * v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const ETAS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 3.0];

    fn rel_close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
        (a - b).abs() <= abs.max(rel * a.abs().max(b.abs()))
    }

    #[test]
    fn f0_examples() {
        assert!(f0_diag(0.0, 8).unwrap().values.iter().all(|&v| v == 1.0));
        for eta in ETAS {
            assert_abs_diff_eq!(f0_diag(eta, 4).unwrap().values[0], (-eta * eta / 2.0).exp(), epsilon = 1e-14);
        }
        let v = f0_diag(0.5, 8).unwrap().values[2];
        assert_abs_diff_eq!(v, (-0.125f64).exp() * 0.53125, epsilon = 1e-15);
        assert!(matches!(f0_diag(-0.1, 8), Err(Error::Domain(_))));
    }

    #[test]
    fn f1_examples() {
        assert!(f1_diag(0.0, 8).unwrap().values.iter().all(|&v| v == 1.0));
        for eta in ETAS {
            assert_abs_diff_eq!(f1_diag(eta, 4).unwrap().values[0], (-eta * eta / 2.0).exp(), epsilon = 1e-14);
        }
        let v = f1_diag(0.5, 8).unwrap().values[1];
        assert_abs_diff_eq!(v, (-0.125f64).exp() * 0.875, epsilon = 1e-15);
        assert!(matches!(f1_diag(-1.0, 8), Err(Error::Domain(_))));
    }

    #[test]
    fn oracle_examples() {
        let o = laguerre_oracle(0.5, 8, CouplingKind::F0).unwrap();
        assert_abs_diff_eq!(o.values[1], (-0.125f64).exp() * 0.75, epsilon = 1e-15);
        let x = 0.25;
        assert_abs_diff_eq!(o.values[2], (-0.125f64).exp() * (1.0 - 2.0 * x + x * x / 2.0), epsilon = 1e-15);
        for eta in ETAS {
            let o1 = laguerre_oracle(eta, 3, CouplingKind::F1).unwrap();
            assert_abs_diff_eq!(o1.values[0], (-eta * eta / 2.0).exp(), epsilon = 1e-15);
        }
    }

    #[test]
    fn recurrence_matches_oracle() {
        for kind in [CouplingKind::F0, CouplingKind::F1] {
            for eta in ETAS {
                let a = coupling_diag(kind, eta, 200).unwrap();
                let b = laguerre_oracle(eta, 200, kind).unwrap();
                for n in 0..200 {
                    assert!(
                        rel_close(a.values[n], b.values[n], 1e-10, 1e-12),
                        "{kind:?} eta={eta} n={n}: {} vs {}",
                        a.values[n],
                        b.values[n]
                    );
                }
            }
        }
    }

    #[test]
    fn recurrence_matches_literal_sum() {
        for kind in [CouplingKind::F0, CouplingKind::F1] {
            for eta in [0.1, 0.5, 1.0] {
                let a = coupling_diag(kind, eta, 16).unwrap();
                for n in 0..=SERIES_REFERENCE_MAX_N {
                    let s = coupling_series(kind, eta, n).unwrap();
                    assert!(rel_close(a.values[n], s, 1e-10, 1e-12), "{kind:?} {eta} {n}");
                }
            }
        }
        assert!(coupling_series(CouplingKind::F0, 0.3, 16).is_err());
    }

    #[test]
    fn lamb_dicke_expansion_residual() {
        // With the Debye-Waller prefactor absorbed, f₀ ≈ e^{−η²/2}(1 − η²n + η⁴n²/4)
        for eta in [0.05, 0.02, 0.1] {
            let f = f0_diag(eta, 6).unwrap();
            let x: f64 = eta * eta;
            for n in 0..=5 {
                let nf = n as f64;
                let approx = (-0.5 * x).exp() * (1.0 - x * nf + x * x * nf * nf / 4.0);
                let resid = (f.values[n] - approx).abs();
                // O(η⁴): the leading discrepancy is n·η⁴/4
                assert!(resid <= 2.0 * x * x * (nf + 1.0), "eta={eta} n={n} resid={resid}");
                if eta == 0.05 {
                    assert!(resid <= 1e-4);
                }
            }
        }
    }

    #[test]
    fn a_pm_examples() {
        assert_eq!(a_pm(3, 3).unwrap(), 1);
        assert_eq!(a_pm(2, 3).unwrap(), 3);
        assert_eq!(a_pm(1, 3).unwrap(), 2);
        assert!(a_pm(0, 3).is_err());
        assert!(a_pm(4, 3).is_err());
    }

    #[test]
    fn a_pm_matches_brute_force_subsets() {
        // e_k(1..m−1) by enumerating subsets
        for m in 1..=10usize {
            for p in 1..=m {
                let k = m - p;
                let mut total: u128 = 0;
                for mask in 0u32..(1 << (m - 1)) {
                    if mask.count_ones() as usize == k {
                        total += (1..m).filter(|j| mask & (1 << (j - 1)) != 0).map(|j| j as u128).product::<u128>();
                    }
                }
                assert_eq!(a_pm(p, m).unwrap(), total, "p={p} m={m}");
            }
        }
    }

    #[test]
    fn falling_factorial_identity() {
        for m in 1..=10usize {
            for n in 0..=15i128 {
                let falling: i128 = (0..m as i128).map(|k| n - k).product();
                let mut sum: i128 = 0;
                for p in 1..=m {
                    let sign = if (m - p) % 2 == 0 { 1 } else { -1 };
                    sum += sign * a_pm(p, m).unwrap() as i128 * n.pow(p as u32);
                }
                assert_eq!(sum, falling, "m={m} n={n}");
            }
        }
    }

    #[test]
    fn stirling_table_agrees_and_overflows_loudly() {
        let t = stirling_first_table(12).unwrap();
        for m in 1..=12 {
            for p in 1..=m {
                assert_eq!(t[m][p], a_pm(p, m).unwrap());
            }
        }
        assert!(stirling_first_table(40).is_err());
        assert!(a_pm(1, 40).is_err());
    }

    #[test]
    fn taylor_examples() {
        let t = taylor_coeffs(&[1.0], &[0.3], 2, 20).unwrap();
        assert_abs_diff_eq!(t.c[0], (-0.045f64).exp(), epsilon = 1e-15);
        // direct series: c₁ = −e^{−x/2} Σ_m a₁^m x^m/(m!)², a₁^m = (m−1)!
        let x: f64 = 0.09;
        let mut s = 0.0;
        let mut fact = 1.0;
        for m in 1..=20 {
            fact *= m as f64;
            let a1m: f64 = (1..m).map(|k| k as f64).product();
            s += a1m * x.powi(m as i32) / (fact * fact);
        }
        assert_abs_diff_eq!(t.c[1], -(-0.045f64).exp() * s, epsilon = 1e-15);
        assert!((t.c[1] + x * (-0.045f64).exp()).abs() < x * x);

        let z = taylor_coeffs(&[0.0, 0.0], &[0.3, 0.7], 3, 20).unwrap();
        assert!(z.c.iter().all(|&c| c == 0.0));

        assert!(matches!(taylor_coeffs(&[1.0], &[0.3, 0.4], 2, 20), Err(Error::Domain(_))));
        assert!(matches!(taylor_coeffs(&[1.0], &[3.0], 2, 10), Err(Error::Precision(_))));
    }

    #[test]
    fn taylor_series_reproduces_coupling() {
        for kind in [CouplingKind::F0, CouplingKind::F1] {
            for eta in [0.1, 0.3, 0.5] {
                let p_max = 12;
                let t = taylor_coeffs_for(kind, &[1.0], &[eta], p_max, default_m_max(eta, p_max)).unwrap();
                let f = coupling_diag(kind, eta, 6).unwrap();
                for n in 0..=5 {
                    let series: f64 = t.c.iter().enumerate().map(|(p, c)| c * (n as f64).powi(p as i32)).sum();
                    assert!((series - f.values[n]).abs() < 1e-12, "{kind:?} eta={eta} n={n}");
                }
            }
        }
    }

    #[test]
    fn default_m_max_is_sufficient() {
        for eta in ETAS {
            let m = default_m_max(eta, 4);
            assert!(m >= 4);
            taylor_coeffs(&[1.0], &[eta], 4, m).unwrap();
        }
    }

    #[test]
    fn combined_examples() {
        let single = combined_diag(&[1.0], &[0.4], 10, CouplingKind::F0).unwrap();
        assert_eq!(single, f0_diag(0.4, 10).unwrap().values);
        let avg = combined_diag(&[0.5, 0.5], &[0.4, 0.4], 10, CouplingKind::F0).unwrap();
        for (a, b) in avg.iter().zip(&single) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        assert!(combined_diag(&[1.0], &[], 4, CouplingKind::F0).is_err());
    }

    #[test]
    fn combined_linear_engineering_example() {
        // solve c₀ = 0, c₁ = 1 for η = (0.3, 0.6) by Cramer's rule
        let etas = [0.3, 0.6];
        let cols = coefficient_columns(CouplingKind::F0, &etas, 4, 30).unwrap();
        let det = cols[0][0] * cols[1][1] - cols[1][0] * cols[0][1];
        let w = [-cols[1][0] / det, cols[0][0] / det];
        let t = taylor_coeffs(&w, &etas, 4, 30).unwrap();
        assert_abs_diff_eq!(t.c[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.c[1], 1.0, epsilon = 1e-12);
        let vals = combined_diag(&w, &etas, 6, CouplingKind::F0).unwrap();
        for (n, v) in vals.iter().enumerate() {
            let nf = n as f64;
            let tail: f64 = (2..=4).map(|p| t.c[p] * nf.powi(p as i32)).sum::<f64>().abs();
            assert!((v - nf).abs() <= 1.5 * tail + 1e-12, "n={n}");
        }
    }

    proptest! {
        #[test]
        fn couplings_bounded_by_one(eta in 0.0f64..4.0, d in 1usize..250) {
            for kind in [CouplingKind::F0, CouplingKind::F1] {
                let f = coupling_diag(kind, eta, d).unwrap();
                prop_assert!(f.values.iter().all(|v| v.abs() <= 1.0));
            }
        }

        #[test]
        fn taylor_is_linear_in_weights(
            w1 in proptest::collection::vec(-2.0f64..2.0, 3),
            w2 in proptest::collection::vec(-2.0f64..2.0, 3),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let etas = [0.2, 0.5, 0.9];
            let mix: Vec<f64> = w1.iter().zip(&w2).map(|(x, y)| a * x + b * y).collect();
            let c1 = taylor_coeffs(&w1, &etas, 4, 40).unwrap();
            let c2 = taylor_coeffs(&w2, &etas, 4, 40).unwrap();
            let cm = taylor_coeffs(&mix, &etas, 4, 40).unwrap();
            for p in 0..=4 {
                prop_assert!((cm.c[p] - (a * c1.c[p] + b * c2.c[p])).abs() < 1e-13);
            }
        }
    }
}
