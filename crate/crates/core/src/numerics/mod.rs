//! Scalar special functions, dense linear-algebra solvers and seeded noise
//! sampling used by every other module.

mod dare;
mod lyapunov;
mod noise;
mod special;
mod toeplitz;

pub use dare::{solve_dare, DareOptions};
pub use lyapunov::solve_discrete_lyapunov;
pub use noise::{derive_seed, NoiseDistribution, NoiseStream};
pub use special::{q_function, q_inverse};
pub use toeplitz::solve_toeplitz;

use crate::Scalar;
use nalgebra::{ComplexField, DMatrix};

/// Spectral radius of a square matrix.
///
/// Triangular matrices are read off the diagonal directly; otherwise a Schur
/// decomposition with an iteration cap is used, falling back to the Gelfand
/// estimate `||A^k||^(1/k)` on the rare matrices where the QR iteration
/// stalls (e.g. large nilpotent shift registers).
pub fn spectral_radius<T: Scalar>(a: &DMatrix<T>) -> T {
    let n = a.nrows();
    if n == 0 {
        return T::zero();
    }
    let is_lower = (0..n).all(|i| (i + 1..n).all(|j| a[(i, j)] == T::zero()));
    let is_upper = (0..n).all(|i| (0..i).all(|j| a[(i, j)] == T::zero()));
    if is_lower || is_upper {
        return (0..n).fold(T::zero(), |m, i| m.max(a[(i, i)].abs()));
    }
    if let Some(schur) = nalgebra::linalg::Schur::try_new(a.clone(), T::cst(1e-14), 30 * n * n)
    {
        return schur
            .complex_eigenvalues()
            .iter()
            .map(|l| l.modulus())
            .fold(T::zero(), |m, v| m.max(v));
    }
    // Gelfand fallback: rho(A) = lim ||A^k||^(1/k)
    let k = 64usize;
    let mut p = a.clone();
    let mut log_sum = T::zero();
    for _ in 1..k {
        let norm = p.norm();
        if norm == T::zero() {
            return T::zero();
        }
        log_sum += norm.ln();
        p = (p / norm) * a;
    }
    log_sum += p.norm().ln();
    (log_sum / T::from_count(k)).exp()
}
