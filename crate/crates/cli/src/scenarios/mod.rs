//! Scenario drivers: each module wires one experiment from config to result
//! bundle.

pub mod aggregate;
pub mod events;
pub mod norms;
pub mod reproduce;
pub mod synth;
pub mod traffic;
