//! Dense complex linear-algebra aliases and a few small helpers shared by
//! the modelling and capacity code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Conjugated inner product `aᴴ b`.
pub fn dotc(a: &CVector, b: &CVector) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(v: &CVector) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

/// Eigenvalues of the Hermitian matrix `H Hᴴ`, clamped at zero and sorted
/// in descending order.
pub fn gram_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let gram = h * h.adjoint();
    // Symmetrise to scrub round-off before the Hermitian solver.
    let gram = (&gram + gram.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = gram.symmetric_eigenvalues();
    let mut values: Vec<f64> = eig.iter().map(|&v| v.max(0.0)).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

pub fn is_finite_matrix(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
