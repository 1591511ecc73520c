//! Discrete-time Lyapunov equation solver.

use nalgebra::DMatrix;

use super::spectral_radius;
use crate::{Error, Result, Scalar};

/// Solves `P = A P A^T + Q` for symmetric `P`.
///
/// The equation is vectorized as `(I - A (x) A) vec(P) = vec(Q)` and solved by
/// dense LU. `A` must have spectral radius strictly below one, otherwise no
/// bounded solution exists.
pub fn solve_discrete_lyapunov<T: Scalar>(
    a: &DMatrix<T>,
    q: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!(
            "lyapunov: A must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::Dimension(format!(
            "lyapunov: Q must be {n}x{n}, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    let rho = spectral_radius(a);
    if rho >= T::cst(1.0 - 1e-10) {
        return Err(Error::Unstable(format!(
            "lyapunov: spectral radius {} is not strictly below one",
            rho.to_f64()
        )));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let kron = a.kronecker(a);
    let m = DMatrix::identity(n * n, n * n) - kron;
    let vec_q = DMatrix::from_column_slice(n * n, 1, q.as_slice());
    let lu = m.lu();
    let sol = lu.solve(&vec_q).ok_or_else(|| {
        Error::Conditioning("lyapunov: vectorized system is singular".into())
    })?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    // symmetrize to remove roundoff asymmetry
    Ok((&p + p.transpose()) * T::cst(0.5))
}
