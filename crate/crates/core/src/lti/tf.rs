//! Rational transfer functions in powers of `z^-1`.

use nalgebra::{Complex, ComplexField, DMatrix};

use super::state_space::StateSpace;
use crate::{Error, Result, Scalar};

/// Multiplies two polynomials given by ascending coefficient lists.
fn poly_mul<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add_scaled<T: Scalar>(acc: &mut Vec<T>, term: &[T], scale: T) {
    if acc.len() < term.len() {
        acc.resize(term.len(), T::zero());
    }
    for (i, &v) in term.iter().enumerate() {
        acc[i] += scale * v;
    }
}

fn trim_trailing_zeros<T: Scalar>(mut v: Vec<T>, tol: T) -> Vec<T> {
    while v.len() > 1 && v.last().map(|x| x.abs() <= tol) == Some(true) {
        v.pop();
    }
    v
}

/// Roots of the polynomial `c_0 + c_1 x + ... + c_n x^n` via the companion
/// matrix. Leading (highest-order) zero coefficients are dropped first.
pub fn polynomial_roots<T: Scalar>(coeffs: &[T]) -> Result<Vec<Complex<T>>> {
    let scale = coeffs
        .iter()
        .fold(T::zero(), |m, c| m.max(c.abs()));
    if scale == T::zero() {
        return Err(Error::Domain("polynomial_roots: zero polynomial".into()));
    }
    let c = trim_trailing_zeros(coeffs.to_vec(), scale * T::cst(1e-300));
    let n = c.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = c[n];
    let mut comp = DMatrix::zeros(n, n);
    for i in 0..n {
        comp[(0, i)] = -c[n - 1 - i] / lead;
    }
    for i in 1..n {
        comp[(i, i - 1)] = T::one();
    }
    Ok(comp.complex_eigenvalues().iter().copied().collect())
}

/// Scalar rational transfer function
/// `G(z) = (b_0 + b_1 z^-1 + ...)/(1 + a_1 z^-1 + ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTf<T: Scalar> {
    num: Vec<T>,
    den: Vec<T>,
    min_phase: bool,
}

impl<T: Scalar> RationalTf<T> {
    /// Builds a transfer function; the denominator is normalized so its
    /// leading coefficient is one.
    pub fn new(num: Vec<T>, den: Vec<T>) -> Result<Self> {
        if num.is_empty() || den.is_empty() {
            return Err(Error::Dimension(
                "rational tf: empty coefficient list".into(),
            ));
        }
        let d0 = den[0];
        let dscale = den.iter().fold(T::zero(), |m, c| m.max(c.abs()));
        if d0.abs() <= dscale * T::cst(1e-12) || dscale == T::zero() {
            return Err(Error::Domain(
                "rational tf: leading denominator coefficient vanishes".into(),
            ));
        }
        let num: Vec<T> = num.iter().map(|&v| v / d0).collect();
        let den: Vec<T> = den.iter().map(|&v| v / d0).collect();
        let num = trim_trailing_zeros(num, T::zero());
        let den = trim_trailing_zeros(den, T::zero());
        let mut tf = Self {
            num,
            den,
            min_phase: false,
        };
        tf.min_phase = tf.certify_min_phase();
        Ok(tf)
    }

    /// FIR transfer function with the given taps.
    pub fn fir(taps: Vec<T>) -> Result<Self> {
        Self::new(taps, vec![T::one()])
    }

    /// Pure delay-free unit gain.
    pub fn identity() -> Self {
        Self {
            num: vec![T::one()],
            den: vec![T::one()],
            min_phase: true,
        }
    }

    pub fn num(&self) -> &[T] {
        &self.num
    }
    pub fn den(&self) -> &[T] {
        &self.den
    }

    /// True iff all numerator roots (zeros) lie strictly inside the unit
    /// circle, so the inverse is stable.
    pub fn is_min_phase(&self) -> bool {
        self.min_phase
    }

    fn certify_min_phase(&self) -> bool {
        let scale = self.num.iter().fold(T::zero(), |m, c| m.max(c.abs()));
        if scale == T::zero() {
            return false;
        }
        match self.zeros() {
            Ok(zs) => zs
                .iter()
                .all(|z| z.modulus() < T::cst(1.0 - 1e-10)),
            Err(_) => false,
        }
    }

    /// Zeros in the `z` plane. The numerator `sum b_k z^-k` of degree `m`
    /// equals `z^-m sum b_k z^{m-k}`, so the zeros are the roots of the
    /// reversed coefficient list.
    pub fn zeros(&self) -> Result<Vec<Complex<T>>> {
        let rev: Vec<T> = self.num.iter().rev().copied().collect();
        polynomial_roots(&rev)
    }

    /// Poles in the `z` plane.
    pub fn poles(&self) -> Result<Vec<Complex<T>>> {
        let rev: Vec<T> = self.den.iter().rev().copied().collect();
        polynomial_roots(&rev)
    }

    /// True iff all poles are strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        match self.poles() {
            Ok(ps) => ps
                .iter()
                .all(|p| p.modulus() < T::cst(1.0 - 1e-10)),
            Err(_) => false,
        }
    }

    /// Value of `G(e^{j omega})`.
    pub fn frequency_response(&self, omega: T) -> Complex<T> {
        let zi = Complex::new(omega.cos(), -omega.sin());
        let eval = |c: &[T]| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for &ck in c.iter().rev() {
                acc = acc * zi + Complex::new(ck, T::zero());
            }
            acc
        };
        eval(&self.num) / eval(&self.den)
    }

    /// Controllable-canonical state-space realization.
    pub fn to_state_space(&self) -> Result<StateSpace<T>> {
        let n = self.den.len().max(self.num.len()) - 1;
        let mut a_coef = vec![T::zero(); n];
        for (i, &v) in self.den.iter().skip(1).enumerate() {
            a_coef[i] = v;
        }
        let mut b_coef = vec![T::zero(); n + 1];
        for (i, &v) in self.num.iter().enumerate() {
            b_coef[i] = v;
        }
        let b0 = b_coef[0];
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(0, i)] = -a_coef[i];
        }
        for i in 1..n {
            a[(i, i - 1)] = T::one();
        }
        let mut b = DMatrix::zeros(n, 1);
        if n > 0 {
            b[(0, 0)] = T::one();
        }
        let mut c = DMatrix::zeros(1, n);
        for i in 0..n {
            c[(0, i)] = b_coef[i + 1] - b0 * a_coef[i];
        }
        let d = DMatrix::from_element(1, 1, b0);
        StateSpace::new(a, b, c, d)
    }

    /// Runs the difference equation over the input signal (zero initial
    /// conditions).
    pub fn simulate(&self, input: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); input.len()];
        for t in 0..input.len() {
            let mut acc = T::zero();
            for (k, &b) in self.num.iter().enumerate() {
                if t >= k {
                    acc += b * input[t - k];
                }
            }
            for (k, &a) in self.den.iter().enumerate().skip(1) {
                if t >= k {
                    acc -= a * out[t - k];
                }
            }
            out[t] = acc;
        }
        out
    }

    /// First `len` impulse-response taps.
    pub fn impulse_taps(&self, len: usize) -> Vec<T> {
        let mut delta = vec![T::zero(); len];
        if len > 0 {
            delta[0] = T::one();
        }
        self.simulate(&delta)
    }

    /// H2 norm via the state-space Gramian.
    pub fn h2_norm(&self) -> Result<T> {
        self.to_state_space()?.h2_norm()
    }

    /// H-infinity norm via the state-space grid search.
    pub fn hinf_norm(&self) -> Result<T> {
        self.to_state_space()?.hinf_norm()
    }

    /// Series composition `self * other` (frequency responses multiply).
    pub fn series(&self, other: &RationalTf<T>) -> Result<RationalTf<T>> {
        RationalTf::new(
            poly_mul(&self.num, &other.num),
            poly_mul(&self.den, &other.den),
        )
    }

    /// Inverse transfer function; requires a certified minimum-phase input so
    /// the result is stable.
    pub fn invert(&self) -> Result<RationalTf<T>> {
        if !self.min_phase {
            return Err(Error::Domain(
                "invert: transfer function is not certified minimum-phase".into(),
            ));
        }
        RationalTf::new(self.den.clone(), self.num.clone())
    }

    /// DC gain `G(z = 1)`.
    pub fn dc_gain(&self) -> T {
        let sum = |c: &[T]| c.iter().fold(T::zero(), |s, &v| s + v);
        sum(&self.num) / sum(&self.den)
    }
}

/// Maps a continuous-time rational function of `s` (ascending coefficients) to
/// a discrete-time transfer function by substituting
/// `s(z) = 2 (1 - z^-1)/(1 + z^-1)`.
pub fn bilinear_map<T: Scalar>(num_s: &[T], den_s: &[T]) -> Result<RationalTf<T>> {
    if num_s.is_empty() || den_s.is_empty() {
        return Err(Error::Dimension("bilinear_map: empty polynomial".into()));
    }
    let deg = num_s.len().max(den_s.len()) - 1;
    // s^k (1 + z^-1)^deg = 2^k (1 - z^-1)^k (1 + z^-1)^{deg - k}
    let substitute = |coeffs: &[T]| -> Vec<T> {
        let mut acc: Vec<T> = Vec::new();
        for (k, &ck) in coeffs.iter().enumerate() {
            if ck == T::zero() {
                continue;
            }
            let mut term = vec![T::one()];
            for _ in 0..k {
                term = poly_mul(&term, &[T::one(), -T::one()]);
            }
            for _ in 0..(deg - k) {
                term = poly_mul(&term, &[T::one(), T::one()]);
            }
            let scale = ck * T::cst(2.0).powi(k as i32);
            poly_add_scaled(&mut acc, &term, scale);
        }
        if acc.is_empty() {
            acc.push(T::zero());
        }
        acc
    };
    let num_z = substitute(num_s);
    let den_z = substitute(den_s);
    let dscale = den_z.iter().fold(T::zero(), |m, c| m.max(c.abs()));
    if dscale == T::zero() || den_z[0].abs() <= dscale * T::cst(1e-12) {
        return Err(Error::Domain(
            "bilinear_map: denominator degenerates under the substitution".into(),
        ));
    }
    RationalTf::new(num_z, den_z)
}
