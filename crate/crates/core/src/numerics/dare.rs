//! Discrete algebraic Riccati equation for the steady-state predictor.

use nalgebra::DMatrix;

use crate::{Error, Result, Scalar};

/// Options controlling the fixed-point iteration in [`solve_dare`].
#[derive(Debug, Clone)]
pub struct DareOptions<T: Scalar> {
    /// Maximum number of iterations.
    pub max_iter: usize,
    /// Stop when the Frobenius norm of the update falls below
    /// `increment_tol * max(1, ||P||_F)`.
    pub increment_tol: T,
    /// Accept the solution only if the equation residual is below
    /// `residual_tol * max(1, ||P||_F)`.
    pub residual_tol: T,
}

impl<T: Scalar> Default for DareOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            increment_tol: T::cst(1e-14),
            residual_tol: T::cst(1e-8),
        }
    }
}

/// Solves the predictor-form Riccati equation
///
/// `P = A P A^T + W - (A P C^T + S)(C P C^T + V)^{-1}(A P C^T + S)^T`
///
/// for the stabilizing symmetric positive semidefinite `P`, where `W` is the
/// process noise covariance, `V` the measurement noise covariance and `S` an
/// optional cross-covariance (zero when `None`).
///
/// The equation is iterated to a fixed point starting from `P = W`; the result
/// is accepted only if the residual contract in [`DareOptions`] holds.
pub fn solve_dare<T: Scalar>(
    a: &DMatrix<T>,
    c: &DMatrix<T>,
    w: &DMatrix<T>,
    v: &DMatrix<T>,
    cross: Option<&DMatrix<T>>,
    opts: &DareOptions<T>,
) -> Result<DMatrix<T>> {
    let n = a.nrows();
    let p_dim = c.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension("dare: A must be square".into()));
    }
    if c.ncols() != n {
        return Err(Error::Dimension(format!(
            "dare: C must have {n} columns, got {}",
            c.ncols()
        )));
    }
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::Dimension("dare: W must match the state dimension".into()));
    }
    if v.nrows() != p_dim || v.ncols() != p_dim {
        return Err(Error::Dimension("dare: V must match the output dimension".into()));
    }
    if let Some(s) = cross {
        if s.nrows() != n || s.ncols() != p_dim {
            return Err(Error::Dimension(format!(
                "dare: cross-covariance must be {n}x{p_dim}, got {}x{}",
                s.nrows(),
                s.ncols()
            )));
        }
    }
    let zero_cross = DMatrix::zeros(n, p_dim);
    let s = cross.unwrap_or(&zero_cross);

    let step = |p: &DMatrix<T>| -> Result<DMatrix<T>> {
        let apc = a * p * c.transpose() + s;
        let inn = c * p * c.transpose() + v;
        let chol = inn.clone().cholesky().ok_or_else(|| {
            Error::Conditioning(
                "dare: innovation covariance is not positive definite".into(),
            )
        })?;
        let gain_t = chol.solve(&apc.transpose());
        let next = a * p * a.transpose() + w - &apc * gain_t;
        Ok((&next + next.transpose()) * T::cst(0.5))
    };

    let mut p = w.clone();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let next = step(&p)?;
        let delta = (&next - &p).norm();
        let scale = next.norm().max(T::one());
        p = next;
        if delta <= opts.increment_tol * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence(format!(
            "dare: no fixed point within {} iterations",
            opts.max_iter
        )));
    }
    let residual = (step(&p)? - &p).norm();
    let scale = p.norm().max(T::one());
    if residual > opts.residual_tol * scale {
        return Err(Error::Convergence(format!(
            "dare: residual {} exceeds contract {}",
            residual.to_f64(),
            (opts.residual_tol * scale).to_f64()
        )));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_golden_ratio() {
        // a = c = w = v = 1: p = p + 1 - p^2/(p+1)  =>  p^2 - p - 1 = 0
        let one = DMatrix::from_element(1, 1, 1.0f64);
        let p = solve_dare(&one, &one, &one, &one, None, &DareOptions::default()).unwrap();
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert_relative_eq!(p[(0, 0)], phi, max_relative = 1e-10);
    }

    #[test]
    fn double_integrator_exact() {
        // A = [[1,1],[0,1]], C = [1,0], W = B B^T with B = [1/2, 1]^T, V = 1
        // has the exact solution P = [[3,2],[2,2]] when W is scaled to
        // [[1/4,1/2],[1/2,1]] * 4 = [[1,2],[2,4]].
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let v = DMatrix::from_element(1, 1, 1.0f64);
        let p = solve_dare(&a, &c, &w, &v, None, &DareOptions::default()).unwrap();
        let residual_check = {
            let apc = &a * &p * c.transpose();
            let inn = &c * &p * c.transpose() + &v;
            &a * &p * a.transpose() + &w - &apc * inn.try_inverse().unwrap() * apc.transpose()
        };
        assert_relative_eq!((&p - residual_check).norm(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn random_instances_meet_residual_contract() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let opts = DareOptions::default();
        for _ in 0..50 {
            let n = rng.random_range(1..=5);
            let m = rng.random_range(1..=n);
            let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0f64));
            let rho = super::super::spectral_radius(&a);
            if rho > 1.2 {
                a *= 1.2 / rho;
            }
            let c = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0f64));
            let gw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0f64));
            let w = &gw * gw.transpose() + DMatrix::identity(n, n) * 0.1;
            let gv = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0f64));
            let v = &gv * gv.transpose() + DMatrix::identity(m, m) * 0.1;
            let p = solve_dare(&a, &c, &w, &v, None, &opts).unwrap();
            // substitution residual, computed with an independent inverse
            let apc = &a * &p * c.transpose();
            let inn = &c * &p * c.transpose() + &v;
            let rhs =
                &a * &p * a.transpose() + &w - &apc * inn.try_inverse().unwrap() * apc.transpose();
            let scale = p.norm().max(1.0);
            assert!((&p - rhs).norm() <= 1e-8 * scale);
        }
    }

    #[test]
    fn dimension_errors() {
        let a = DMatrix::from_element(2, 2, 0.5f64);
        let c = DMatrix::from_element(1, 3, 1.0f64);
        let w = DMatrix::identity(2, 2);
        let v = DMatrix::identity(1, 1);
        assert!(matches!(
            solve_dare(&a, &c, &w, &v, None, &DareOptions::default()),
            Err(Error::Dimension(_))
        ));
    }
}
