//! Thin helpers over `nalgebra` shared by the physics modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Largest absolute entry of `m - m†`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Tr[a b] without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
///
/// The input is symmetrized first so that rounding noise in the upper and
/// lower triangles cannot leak into the spectrum.
pub fn hermitian_eigen(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    (eig.eigenvalues, eig.eigenvectors)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    let (vals, _) = hermitian_eigen(m);
    vals.iter().copied().fold(f64::INFINITY, f64::min)
}

/// 2-norm condition number (ratio of extreme singular values). Returns
/// infinity for a numerically singular matrix.
pub fn condition_number(m: &RMatrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Kronecker product `a ⊗ b` with `a` as the slow (major) index.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn kron_diag(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

/// Dense solve with full pivoting followed by one round of iterative
/// refinement in working precision.
pub fn solve_refined(m: &RMatrix, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = m.clone().full_piv_lu();
    let mut x = lu.solve(rhs)?;
    let residual = rhs - m * &x;
    if let Some(dx) = lu.solve(&residual) {
        x += dx;
    }
    Some(x)
}
