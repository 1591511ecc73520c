//! Dense state-space systems.

use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use super::FREQ_GRID;
use crate::numerics::{solve_discrete_lyapunov, spectral_radius};
use crate::{Error, Result, Scalar};

/// Truncated impulse response with a bound on the discarded tail.
#[derive(Debug, Clone)]
pub struct ImpulseResponse<T: Scalar> {
    /// Taps `g_0 .. g_T`; each tap is a `p x m` matrix.
    pub taps: Vec<DMatrix<T>>,
    /// Upper bound on the l1 norm (sum of Frobenius norms) of the dropped
    /// taps `g_{T+1}, g_{T+2}, ...`. Zero for FIR systems, infinity when no
    /// geometric bound is available.
    pub tail_bound: T,
}

impl<T: Scalar> ImpulseResponse<T> {
    /// Taps of a single-input single-output response as scalars.
    pub fn scalar_taps(&self) -> Vec<T> {
        self.taps.iter().map(|g| g[(0, 0)]).collect()
    }
}

/// Discrete-time state-space system `x' = Ax + Bu, y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace<T: Scalar> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    c: DMatrix<T>,
    d: DMatrix<T>,
}

impl<T: Scalar> StateSpace<T> {
    pub fn new(
        a: DMatrix<T>,
        b: DMatrix<T>,
        c: DMatrix<T>,
        d: DMatrix<T>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension("state space: A must be square".into()));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!(
                "state space: B must have {n} rows, got {}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!(
                "state space: C must have {n} columns, got {}",
                c.ncols()
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "state space: D must be {}x{}, got {}x{}",
                c.nrows(),
                b.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    /// Static (memoryless) system `y = D u`.
    pub fn static_gain(d: DMatrix<T>) -> Self {
        let p = d.nrows();
        let m = d.ncols();
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, m),
            c: DMatrix::zeros(p, 0),
            d,
        }
    }

    /// Length-`l` moving average `y_t = (1/l)(u_t + ... + u_{t-l+1})` as a
    /// shift-register realization.
    pub fn moving_average(l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::Domain("moving average: window must be positive".into()));
        }
        let n = l - 1;
        let inv = T::one() / T::from_count(l);
        let mut a = DMatrix::zeros(n, n);
        for i in 1..n {
            a[(i, i - 1)] = T::one();
        }
        let mut b = DMatrix::zeros(n, 1);
        if n > 0 {
            b[(0, 0)] = T::one();
        }
        let c = DMatrix::from_element(1, n, inv);
        let d = DMatrix::from_element(1, 1, inv);
        Self::new(a, b, c, d)
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<T> {
        &self.d
    }

    /// State dimension.
    pub fn order(&self) -> usize {
        self.a.nrows()
    }
    /// Number of inputs.
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    /// Number of outputs.
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// True iff the spectral radius of `A` is strictly below one.
    pub fn is_stable(&self) -> bool {
        spectral_radius(&self.a) < T::cst(1.0 - 1e-10)
    }

    fn require_stable(&self, op: &str) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::Unstable(format!(
                "{op}: system has spectral radius {}",
                spectral_radius(&self.a).to_f64()
            )))
        }
    }

    /// Runs the system over the input sequence starting from state `x0`
    /// (origin when `None`).
    pub fn simulate(
        &self,
        input: &[DVector<T>],
        x0: Option<&DVector<T>>,
    ) -> Result<Vec<DVector<T>>> {
        let n = self.order();
        let mut x = match x0 {
            Some(v) => {
                if v.len() != n {
                    return Err(Error::Dimension(format!(
                        "simulate: initial state has length {}, expected {n}",
                        v.len()
                    )));
                }
                v.clone()
            }
            None => DVector::zeros(n),
        };
        let mut out = Vec::with_capacity(input.len());
        for u in input {
            if u.len() != self.inputs() {
                return Err(Error::Dimension(format!(
                    "simulate: input has length {}, expected {}",
                    u.len(),
                    self.inputs()
                )));
            }
            out.push(&self.c * &x + &self.d * u);
            x = &self.a * x + &self.b * u;
        }
        Ok(out)
    }

    /// Impulse response `g_0 = D, g_t = C A^{t-1} B` up to and including tap
    /// `horizon`, with a geometric tail bound for stable systems.
    pub fn impulse_response(&self, horizon: usize) -> ImpulseResponse<T> {
        let mut taps = Vec::with_capacity(horizon + 1);
        taps.push(self.d.clone());
        let mut akb = self.b.clone();
        for _ in 1..=horizon {
            taps.push(&self.c * &akb);
            akb = &self.a * akb;
        }
        let tail_bound = self.tail_bound(horizon, &akb);
        ImpulseResponse { taps, tail_bound }
    }

    /// Bound on `sum_{t > horizon} ||C A^{t-1} B||_F` from the power-iterate
    /// `A^horizon B` and the spectral radius.
    fn tail_bound(&self, _horizon: usize, a_pow_b: &DMatrix<T>) -> T {
        if self.order() == 0 {
            return T::zero();
        }
        let rho = spectral_radius(&self.a);
        if rho >= T::cst(1.0 - 1e-10) {
            return T::cst(f64::INFINITY);
        }
        // ||C A^{horizon + k} B|| <= ||C|| ||A^horizon B|| q^k with a decay
        // estimate q between rho and 1; use q = (1 + rho)/2 for safety.
        let q = (T::one() + rho) * T::cst(0.5);
        let lead = self.c.norm() * a_pow_b.norm();
        lead / (T::one() - q)
    }

    /// Picks a horizon at which the geometric tail bound falls below
    /// `rel_tol` times the accumulated response norm, then returns the
    /// truncated response.
    pub fn impulse_response_auto(&self, rel_tol: T) -> Result<ImpulseResponse<T>> {
        self.require_stable("impulse_response_auto")?;
        let mut horizon = 32.max(4 * self.order());
        for _ in 0..32 {
            let resp = self.impulse_response(horizon);
            let acc: T = resp
                .taps
                .iter()
                .map(|g| g.norm())
                .fold(T::zero(), |s, v| s + v);
            if resp.tail_bound <= rel_tol * acc.max(T::one()) {
                return Ok(resp);
            }
            horizon *= 2;
        }
        Err(Error::Convergence(
            "impulse_response_auto: tail bound did not decay".into(),
        ))
    }

    /// H2 norm `sqrt(trace(C P C^T + D D^T))` with `P` the controllability
    /// Gramian.
    pub fn h2_norm(&self) -> Result<T> {
        self.require_stable("h2_norm")?;
        let ddt = (&self.d * self.d.transpose()).trace();
        if self.order() == 0 {
            return Ok(ddt.sqrt());
        }
        let p = solve_discrete_lyapunov(&self.a, &(&self.b * self.b.transpose()))?;
        let val = (&self.c * p * self.c.transpose()).trace() + ddt;
        Ok(val.max(T::zero()).sqrt())
    }

    /// Frequency response `G(e^{j omega}) = C (e^{j omega} I - A)^{-1} B + D`.
    pub fn frequency_response(&self, omega: T) -> Result<DMatrix<Complex<T>>> {
        let n = self.order();
        let z = Complex::new(omega.cos(), omega.sin());
        let to_c = |m: &DMatrix<T>| m.map(|v| Complex::new(v, T::zero()));
        if n == 0 {
            return Ok(to_c(&self.d));
        }
        let mut zi_a = to_c(&self.a).map(|v| -v);
        for i in 0..n {
            zi_a[(i, i)] += z;
        }
        let lu = zi_a.lu();
        let x = lu.solve(&to_c(&self.b)).ok_or_else(|| {
            Error::Conditioning("frequency_response: singular resolvent".into())
        })?;
        Ok(to_c(&self.c) * x + to_c(&self.d))
    }

    fn sigma_max(&self, omega: T) -> Result<T> {
        let g = self.frequency_response(omega)?;
        if g.nrows() == 1 && g.ncols() == 1 {
            return Ok(g[(0, 0)].modulus());
        }
        // largest eigenvalue of the Hermitian matrix G^H G
        let gram = g.adjoint() * &g;
        let eig = gram.symmetric_eigen();
        let max = eig
            .eigenvalues
            .iter()
            .fold(T::zero(), |m, &v| m.max(v));
        Ok(max.max(T::zero()).sqrt())
    }

    /// H-infinity norm: supremum over frequency of the largest singular value
    /// of the frequency response. Grid search refined by golden-section.
    pub fn hinf_norm(&self) -> Result<T> {
        self.require_stable("hinf_norm")?;
        // real coefficients: response on [0, pi] suffices
        let n = FREQ_GRID;
        let mut best_k = 0usize;
        let mut best = T::cst(-1.0);
        for k in 0..=n {
            let omega = T::pi() * T::from_count(k) / T::from_count(n);
            let s = self.sigma_max(omega)?;
            if s > best {
                best = s;
                best_k = k;
            }
        }
        // golden-section refinement on the bracketing interval
        let lo_k = best_k.saturating_sub(1);
        let hi_k = (best_k + 1).min(n);
        let mut lo = T::pi() * T::from_count(lo_k) / T::from_count(n);
        let mut hi = T::pi() * T::from_count(hi_k) / T::from_count(n);
        let gr = T::cst(0.618_033_988_749_894_8);
        let mut x1 = hi - gr * (hi - lo);
        let mut x2 = lo + gr * (hi - lo);
        let mut f1 = self.sigma_max(x1)?;
        let mut f2 = self.sigma_max(x2)?;
        for _ in 0..90 {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + gr * (hi - lo);
                f2 = self.sigma_max(x2)?;
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - gr * (hi - lo);
                f1 = self.sigma_max(x1)?;
            }
            if hi - lo <= T::cst(1e-14) {
                break;
            }
        }
        Ok(best.max(f1).max(f2))
    }

    /// Series composition: `other` applied after `self` (output of `self`
    /// feeds `other`).
    pub fn series(&self, other: &StateSpace<T>) -> Result<StateSpace<T>> {
        if other.inputs() != self.outputs() {
            return Err(Error::Dimension(format!(
                "series: downstream expects {} inputs, upstream produces {} outputs",
                other.inputs(),
                self.outputs()
            )));
        }
        let n1 = self.order();
        let n2 = other.order();
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, 0), (n2, n1)).copy_from(&(&other.b * &self.c));
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let mut b = DMatrix::zeros(n1 + n2, self.inputs());
        b.view_mut((0, 0), (n1, self.inputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.inputs()))
            .copy_from(&(&other.b * &self.d));
        let mut c = DMatrix::zeros(other.outputs(), n1 + n2);
        c.view_mut((0, 0), (other.outputs(), n1))
            .copy_from(&(&other.d * &self.c));
        c.view_mut((0, n1), (other.outputs(), n2)).copy_from(&other.c);
        let d = &other.d * &self.d;
        StateSpace::new(a, b, c, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn delta(len: usize) -> Vec<DVector<f64>> {
        (0..len)
            .map(|t| DVector::from_element(1, if t == 0 { 1.0 } else { 0.0 }))
            .collect()
    }

    #[test]
    fn identity_passes_input_through() {
        let sys = StateSpace::static_gain(DMatrix::identity(1, 1));
        let u: Vec<_> = (0..5).map(|t| DVector::from_element(1, t as f64)).collect();
        let y = sys.simulate(&u, None).unwrap();
        assert_eq!(y, u);
    }

    #[test]
    fn accumulator_on_impulse_is_all_ones() {
        // y_t = y_{t-1} + u_t: x' = x + u, y = x + u
        let one = DMatrix::from_element(1, 1, 1.0);
        let sys = StateSpace::new(one.clone(), one.clone(), one.clone(), one).unwrap();
        let y = sys.simulate(&delta(6), None).unwrap();
        for v in y {
            assert_relative_eq!(v[0], 1.0);
        }
        assert!(!sys.is_stable());
    }

    #[test]
    fn moving_average_ramps_to_one() {
        let l = 4;
        let sys = StateSpace::<f64>::moving_average(l).unwrap();
        let u: Vec<_> = (0..10).map(|_| DVector::from_element(1, 1.0)).collect();
        let y = sys.simulate(&u, None).unwrap();
        for (t, v) in y.iter().enumerate() {
            let expect = ((t + 1).min(l) as f64) / l as f64;
            assert_relative_eq!(v[0], expect, epsilon = 1e-14);
        }
    }

    #[test]
    fn moving_average_impulse_taps() {
        let l = 5;
        let sys = StateSpace::<f64>::moving_average(l).unwrap();
        let resp = sys.impulse_response(8);
        let taps = resp.scalar_taps();
        for (t, g) in taps.iter().enumerate() {
            let expect = if t < l { 1.0 / l as f64 } else { 0.0 };
            assert_relative_eq!(*g, expect, epsilon = 1e-14);
        }
        assert_relative_eq!(resp.tail_bound, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn d_only_impulse() {
        let sys = StateSpace::static_gain(DMatrix::from_element(1, 1, 3.0));
        let taps = sys.impulse_response(4).scalar_taps();
        assert_eq!(taps, vec![3.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn moving_average_norms() {
        for l in [2usize, 5, 10, 50] {
            let sys = StateSpace::<f64>::moving_average(l).unwrap();
            let h2 = sys.h2_norm().unwrap();
            assert_relative_eq!(h2 * h2, 1.0 / l as f64, epsilon = 1e-9);
            assert_relative_eq!(sys.hinf_norm().unwrap(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn static_gain_norms() {
        let sys = StateSpace::static_gain(DMatrix::from_element(1, 1, -2.5));
        assert_relative_eq!(sys.h2_norm().unwrap(), 2.5);
        assert_relative_eq!(sys.hinf_norm().unwrap(), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn h2_matches_impulse_response_oracle() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..25 {
            let n = rng.random_range(1..=5);
            let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0f64));
            let rho = spectral_radius(&a);
            a *= rng.random_range(0.3..0.9) / rho.max(0.3);
            let b = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0f64));
            let c = DMatrix::from_fn(1, n, |_, _| rng.random_range(-1.0..1.0f64));
            let d = DMatrix::from_element(1, 1, rng.random_range(-1.0..1.0f64));
            let sys = StateSpace::new(a, b, c, d).unwrap();
            let h2 = sys.h2_norm().unwrap();
            let taps = sys.impulse_response(4000).scalar_taps();
            let sum: f64 = taps.iter().map(|g| g * g).sum();
            assert_relative_eq!(h2 * h2, sum, epsilon = 1e-6, max_relative = 1e-6);
        }
    }

    #[test]
    fn hinf_matches_dense_grid_oracle() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..8 {
            let n = rng.random_range(1..=4);
            let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0f64));
            let rho = spectral_radius(&a);
            a *= rng.random_range(0.3..0.9) / rho.max(0.3);
            let b = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0f64));
            let c = DMatrix::from_fn(2, n, |_, _| rng.random_range(-1.0..1.0f64));
            let d = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0f64));
            let sys = StateSpace::new(a, b, c, d).unwrap();
            let hinf = sys.hinf_norm().unwrap();
            let mut grid_max = 0.0f64;
            let m = 1 << 16;
            for k in 0..=m {
                let omega = std::f64::consts::PI * k as f64 / m as f64;
                grid_max = grid_max.max(sys.sigma_max(omega).unwrap());
            }
            assert!(hinf >= grid_max - 1e-5, "hinf {hinf} below grid {grid_max}");
            assert!(hinf <= grid_max + 1e-5, "hinf {hinf} above grid {grid_max}");
        }
    }

    #[test]
    fn unstable_norms_error() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let sys = StateSpace::new(one.clone(), one.clone(), one.clone(), one).unwrap();
        assert!(matches!(sys.h2_norm(), Err(Error::Unstable(_))));
        assert!(matches!(sys.hinf_norm(), Err(Error::Unstable(_))));
    }

    #[test]
    fn series_matches_sequential_simulation() {
        let s1 = StateSpace::<f64>::moving_average(3).unwrap();
        let s2 = StateSpace::<f64>::moving_average(2).unwrap();
        let cascade = s1.series(&s2).unwrap();
        let u: Vec<_> = (0..12)
            .map(|t| DVector::from_element(1, (t as f64 * 0.7).sin()))
            .collect();
        let mid = s1.simulate(&u, None).unwrap();
        let expect = s2.simulate(&mid, None).unwrap();
        let got = cascade.simulate(&u, None).unwrap();
        for (a, b) in got.iter().zip(&expect) {
            assert_relative_eq!(a[0], b[0], epsilon = 1e-12);
        }
    }
}
