//! Discrete-time LTI systems: state-space and rational transfer-function
//! representations, simulation, H2 and H-infinity norms, the bilinear
//! transform, and minimum-phase spectral factorization.

mod spectral;
mod state_space;
mod tf;

pub use spectral::{spectral_factor, SpectralFactor};
pub use state_space::{ImpulseResponse, StateSpace};
pub use tf::{bilinear_map, polynomial_roots, RationalTf};

use crate::Scalar;
use nalgebra::ComplexField;

/// Number of frequency samples used by the grid-based norm and integral
/// routines.
pub const FREQ_GRID: usize = 4096;

/// Mean of `|G(e^{jw})|` over the unit circle, `(1/2pi) Int |G| dw`, by the
/// trapezoidal rule on the standard grid. By periodicity the trapezoidal rule
/// over a full period reduces to the plain average of the samples.
pub fn mean_abs_frequency_response<T: Scalar>(tf: &RationalTf<T>) -> T {
    let n = FREQ_GRID;
    let mut acc = T::zero();
    for k in 0..n {
        let omega = T::two_pi() * T::from_count(k) / T::from_count(n);
        acc += tf.frequency_response(omega).modulus();
    }
    acc / T::from_count(n)
}
