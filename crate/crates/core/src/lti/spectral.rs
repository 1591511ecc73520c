//! Minimum-phase spectral factorization by the cepstral method.

use nalgebra::ComplexField;
use rustfft::num_complex::Complex as FftComplex;
use rustfft::{FftNum, FftPlanner};

use super::tf::{polynomial_roots, RationalTf};
use crate::{Error, Result, Scalar};

/// Result of [`spectral_factor`].
#[derive(Debug, Clone)]
pub struct SpectralFactor<T: Scalar> {
    /// Minimum-phase FIR factor `G1` with `|G1|^2 ~ lambda |G|` on the grid.
    pub factor: RationalTf<T>,
    /// Least-squares fit of the proportionality constant
    /// `lambda = |G1|^2 / |G|` actually achieved on the grid. The design
    /// targets `lambda = 1`; the fit reports how close the truncated factor
    /// comes.
    pub lambda: T,
}

/// Computes a stable, minimum-phase FIR transfer function `G1` of the given
/// order whose squared magnitude approximates the target magnitude samples.
///
/// `magnitude[k]` is the desired `|G(e^{jw_k})|` at `w_k = 2 pi k / N` over
/// the full circle (the samples of a real system's magnitude are even around
/// `N/2`). All samples must be strictly positive.
///
/// The log of the desired factor magnitude `sqrt(|G|)` is transformed to the
/// cepstral domain, folded onto causal quefrencies and exponentiated back,
/// which yields the unique minimum-phase spectrum with that magnitude; its
/// inverse transform is truncated to `order + 1` taps. Any root pushed
/// outside the unit circle by the truncation is reflected back inside, which
/// leaves the magnitude response unchanged up to a positive constant.
pub fn spectral_factor<T>(magnitude: &[T], order: usize) -> Result<SpectralFactor<T>>
where
    T: Scalar + FftNum,
{
    let n = magnitude.len();
    if n < 4 {
        return Err(Error::Dimension(
            "spectral_factor: need at least 4 magnitude samples".into(),
        ));
    }
    if order + 1 > n / 2 {
        return Err(Error::Dimension(format!(
            "spectral_factor: order {order} too large for {n} samples"
        )));
    }
    if magnitude.iter().any(|&m| !(m > T::zero()) || !m.is_finite_s()) {
        return Err(Error::Domain(
            "spectral_factor: magnitude samples must be strictly positive".into(),
        ));
    }
    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let scale = T::one() / T::from_count(n);

    // log |G1| = log sqrt(|G|)
    let mut buf: Vec<FftComplex<T>> = magnitude
        .iter()
        .map(|&m| FftComplex::new(m.sqrt().ln(), T::zero()))
        .collect();
    // cepstrum
    ifft.process(&mut buf);
    for v in buf.iter_mut() {
        *v = *v * scale;
    }
    // fold onto causal part: keep index 0 and n/2 halved once, double 1..n/2
    let half = n / 2;
    let mut folded = vec![FftComplex::new(T::zero(), T::zero()); n];
    folded[0] = buf[0];
    for k in 1..half {
        folded[k] = buf[k] + buf[n - k];
    }
    folded[half] = buf[half];
    fft.process(&mut folded);
    // exponentiate to get the minimum-phase frequency response
    let mut spec: Vec<FftComplex<T>> = folded
        .iter()
        .map(|v| {
            let r = v.re.exp();
            FftComplex::new(r * v.im.cos(), r * v.im.sin())
        })
        .collect();
    ifft.process(&mut spec);
    let mut taps: Vec<T> = spec
        .iter()
        .take(order + 1)
        .map(|v| v.re * scale)
        .collect();

    // reflect any root that truncation pushed onto or outside the circle
    taps = reflect_roots_inside(&taps)?;

    let factor = RationalTf::fir(taps)?;
    if !factor.is_min_phase() {
        return Err(Error::Convergence(
            "spectral_factor: could not certify a minimum-phase factor".into(),
        ));
    }
    // least-squares lambda: |G1|^2 = lambda |G| pointwise, LS over the grid
    let mut num = T::zero();
    let mut den = T::zero();
    for (k, &m) in magnitude.iter().enumerate() {
        let omega = T::two_pi() * T::from_count(k) / T::from_count(n);
        let g1 = factor.frequency_response(omega).modulus();
        num += g1 * g1 * m;
        den += m * m;
    }
    Ok(SpectralFactor {
        factor,
        lambda: num / den,
    })
}

/// Replaces roots with modulus >= 1 - 1e-10 by their reflections inside the
/// unit circle, scaling the leading coefficient so the magnitude response is
/// preserved.
fn reflect_roots_inside<T: Scalar>(taps: &[T]) -> Result<Vec<T>> {
    let rev: Vec<T> = taps.iter().rev().copied().collect();
    let roots = polynomial_roots(&rev)?;
    let limit = T::cst(1.0 - 1e-10);
    if roots.iter().all(|r| r.modulus() < limit) {
        return Ok(taps.to_vec());
    }
    // rebuild the polynomial from (possibly reflected) roots
    let mut gain = taps[0];
    let margin = T::cst(1.0 - 1e-8);
    let mut adjusted: Vec<nalgebra::Complex<T>> = Vec::with_capacity(roots.len());
    for r in roots {
        let m = r.modulus();
        if m >= limit {
            // z -> 1/conj(z), nudged strictly inside; |p(e^{jw})| gains |r|
            // 1/conj(r) = r / |r|^2
            let refl = r * (margin / (m * m));
            adjusted.push(refl);
            gain *= m;
        } else {
            adjusted.push(r);
        }
    }
    // expand prod (1 - r z^-1), coefficients in z^-1
    let mut coeffs = vec![nalgebra::Complex::new(T::one(), T::zero())];
    for r in adjusted {
        let mut next = vec![nalgebra::Complex::new(T::zero(), T::zero()); coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        coeffs = next;
    }
    Ok(coeffs.iter().map(|c| c.re * gain).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::FREQ_GRID;
    use approx::assert_relative_eq;

    fn sample_magnitude(tf: &RationalTf<f64>, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let omega = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                tf.frequency_response(omega).norm()
            })
            .collect()
    }

    #[test]
    fn constant_magnitude_gives_constant_factor() {
        let c = 4.0f64;
        let mag = vec![c; 64];
        let sf = spectral_factor(&mag, 4).unwrap();
        // |G1| = sqrt(c) = 2 at every frequency
        for k in 0..16 {
            let omega = std::f64::consts::PI * k as f64 / 16.0;
            assert_relative_eq!(
                sf.factor.frequency_response(omega).norm(),
                2.0,
                max_relative = 1e-8
            );
        }
        assert_relative_eq!(sf.lambda, 1.0, max_relative = 1e-8);
    }

    #[test]
    fn homogeneity_gain_doubles_when_spectrum_scales_by_four() {
        let mag1 = vec![1.0f64; 64];
        let mag4 = vec![4.0f64; 64];
        let s1 = spectral_factor(&mag1, 4).unwrap();
        let s4 = spectral_factor(&mag4, 4).unwrap();
        assert_relative_eq!(
            s4.factor.num()[0],
            2.0 * s1.factor.num()[0],
            max_relative = 1e-8
        );
    }

    #[test]
    fn low_pass_example_grid_error_within_two_percent() {
        let g = crate::lti::bilinear_map(&[1.0f64], &[0.05, 1.0]).unwrap();
        let n = FREQ_GRID;
        // the filter has a spectral zero at w = pi; flooring keeps the target
        // strictly positive as the factorization requires
        let raw = sample_magnitude(&g, n);
        let peak = raw.iter().cloned().fold(0.0f64, f64::max);
        let mag: Vec<f64> = raw.iter().map(|&m| m.max(0.02 * peak)).collect();
        let sf = spectral_factor(&mag, 96).unwrap();
        assert!(sf.factor.is_min_phase());
        for k in 0..n {
            let omega = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let g1 = sf.factor.frequency_response(omega).norm();
            let approx_mag = g1 * g1 / sf.lambda;
            assert!(
                (approx_mag - mag[k]).abs() <= 0.02 * mag[k],
                "grid point {k}: {approx_mag} vs {}",
                mag[k]
            );
        }
    }

    #[test]
    fn rejects_nonpositive_magnitude() {
        assert!(spectral_factor(&[1.0f64, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0], 2).is_err());
        assert!(spectral_factor(&[1.0f64, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0], 2).is_err());
    }
}
