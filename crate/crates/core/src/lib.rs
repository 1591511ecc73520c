//! Differentially private approximations of linear filters.
//!
//! The crate covers four families of privacy mechanisms for dynamic systems:
//!
//! - [`mechanisms`]: multi-participant aggregation through per-participant
//!   filters, with noise placed at the input or the output of the aggregate.
//! - [`kalman`]: steady-state Kalman filtering with privacy noise injected
//!   either on the measurements (optionally compensated in the filter design)
//!   or on the released estimate.
//! - [`lmi`]: filter synthesis trading estimation error against the filter's
//!   sensitivity to one participant, via LMI feasibility problems solved by an
//!   embedded small-scale SDP solver.
//! - [`events`]: event-level privacy for integer-valued streams, including the
//!   zero-forcing equalization mechanism, an MMSE FIR post-filter, and a
//!   threshold detector.
//!
//! All numeric code is generic over the scalar type through [`Scalar`];
//! concrete `f64` aliases are exported at the crate root.

pub mod error;
pub mod events;
pub mod kalman;
pub mod lmi;
pub mod lti;
pub mod mechanisms;
pub mod numerics;
pub mod privacy;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` state-space model.
pub type StateSpace64 = lti::StateSpace<f64>;
/// `f64` rational transfer function in `z^-1`.
pub type RationalTf64 = lti::RationalTf<f64>;
/// `f64` privacy budget.
pub type PrivacyBudget64 = privacy::PrivacyBudget<f64>;
/// `f64` noise stream.
pub type NoiseStream64 = numerics::NoiseStream<f64>;
/// `f64` participant model.
pub type ParticipantModel64 = kalman::ParticipantModel<f64>;
/// `f64` filter realization.
pub type FilterRealization64 = lmi::FilterRealization<f64>;
