//! Levinson solver for symmetric positive definite Toeplitz systems.

use nalgebra::DVector;

use crate::{Error, Result, Scalar};

/// Solves `T h = b` where `T` is the symmetric Toeplitz matrix with first
/// column `r`.
///
/// Uses the Levinson recursion in O(n^2) operations. The matrix must be
/// positive definite; loss of positive definiteness during the recursion is
/// reported as a conditioning error.
pub fn solve_toeplitz<T: Scalar>(r: &[T], b: &[T]) -> Result<DVector<T>> {
    let n = r.len();
    if n == 0 {
        return Err(Error::Dimension("toeplitz: empty system".into()));
    }
    if b.len() != n {
        return Err(Error::Dimension(format!(
            "toeplitz: right-hand side has length {}, expected {n}",
            b.len()
        )));
    }
    if r[0] <= T::zero() {
        return Err(Error::Conditioning(
            "toeplitz: leading entry must be positive".into(),
        ));
    }
    // Normalize so the diagonal is one.
    let r0 = r[0];
    let rn: Vec<T> = r.iter().map(|&v| v / r0).collect();
    let bn: Vec<T> = b.iter().map(|&v| v / r0).collect();

    let mut y = vec![T::zero(); n];
    let mut x = vec![T::zero(); n];
    y[0] = -rn.get(1).copied().unwrap_or(T::zero());
    x[0] = bn[0];
    let mut beta = T::one();
    let mut alpha = -rn.get(1).copied().unwrap_or(T::zero());
    for k in 0..n - 1 {
        beta = (T::one() - alpha * alpha) * beta;
        if beta <= T::zero() {
            return Err(Error::Conditioning(
                "toeplitz: matrix is not positive definite".into(),
            ));
        }
        let mut mu = bn[k + 1];
        for i in 0..=k {
            mu -= rn[k + 1 - i] * x[i];
        }
        mu /= beta;
        for i in 0..=k {
            x[i] += mu * y[k - i];
        }
        x[k + 1] = mu;
        if k < n - 2 {
            let mut a = -rn[k + 2];
            for i in 0..=k {
                a -= rn[k + 1 - i] * y[i];
            }
            a /= beta;
            for i in 0..=(k / 2) {
                let j = k - i;
                let yi = y[i];
                let yj = y[j];
                y[i] = yi + a * yj;
                if i != j {
                    y[j] = yj + a * yi;
                }
            }
            y[k + 1] = a;
            alpha = a;
        }
    }
    Ok(DVector::from_vec(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn toeplitz_matrix(r: &[f64]) -> DMatrix<f64> {
        let n = r.len();
        DMatrix::from_fn(n, n, |i, j| r[i.abs_diff(j)])
    }

    #[test]
    fn two_by_two_exact() {
        // [[2,1],[1,2]] h = [1,1]  =>  h = [1/3, 1/3]
        let h = solve_toeplitz(&[2.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_relative_eq!(h[0], 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(h[1], 1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn matches_dense_lu_oracle() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let n = rng.random_range(1..=64);
            // Build a PD Toeplitz first column from an AR-like decaying sequence.
            let rho: f64 = rng.random_range(0.1..0.9);
            let mut r = vec![0.0; n];
            for (k, v) in r.iter_mut().enumerate() {
                *v = rho.powi(k as i32) + if k == 0 { 0.5 } else { 0.0 };
            }
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = solve_toeplitz(&r, &b).unwrap();
            let t = toeplitz_matrix(&r);
            let oracle = t.lu().solve(&DVector::from_vec(b.clone())).unwrap();
            assert!(
                (&h - &oracle).norm() <= 1e-9 * oracle.norm().max(1.0),
                "n={n}: levinson/dense mismatch {}",
                (&h - &oracle).norm()
            );
        }
    }

    #[test]
    fn rejects_indefinite() {
        // first column [1, 2, ...] gives an indefinite matrix
        assert!(matches!(
            solve_toeplitz(&[1.0, 2.0, 0.5], &[1.0, 0.0, 0.0]),
            Err(Error::Conditioning(_))
        ));
        assert!(matches!(
            solve_toeplitz(&[-1.0, 0.0], &[1.0, 0.0]),
            Err(Error::Conditioning(_))
        ));
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(
            solve_toeplitz::<f64>(&[], &[]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            solve_toeplitz(&[1.0, 0.2], &[1.0]),
            Err(Error::Dimension(_))
        ));
    }
}
