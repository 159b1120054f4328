//! Simulation library for jammer-resilient massive MU-MIMO uplink reception.
//!
//! The crate provides:
//!
//! - joint jammer-mitigating detectors (`maed`, `somaed`) that unify jammer
//!   subspace estimation, channel estimation, and data detection over a whole
//!   coherence interval,
//! - classical baselines (`baselines`): LMMSE, projection-onto-orthogonal-
//!   subspace receivers, and the single-user SIMO bound,
//! - smart-jammer threat models (`jammer`) from barrage to data-dependent
//!   eclipsing attacks,
//! - a derivative-free trainer for the unfolded detector parameters
//!   (`unfolding`),
//! - executable checks of the recovery theory at desk scale (`theory`), and
//! - a deterministic Monte Carlo harness with CSV output (`harness`).
//!
//! All numeric kernels are generic over the real scalar type via
//! [`scalar::Scalar`] (`f32` or `f64`); concrete aliases for the common
//! `f64` instantiation are exported at the crate root.

pub mod baselines;
pub mod channel;
pub mod error;
pub(crate) mod fbs;
pub mod harness;
pub mod jammer;
pub mod maed;
pub mod numerics;
pub mod rng;
pub mod scalar;
pub mod scenario;
pub mod somaed;
pub mod theory;
pub mod unfolding;

pub use error::{Error, Result};
pub use numerics::{CMat, UnitVec};
pub use scalar::{Scalar, C};

/// Default real scalar for simulations.
pub type Real = f64;
/// Complex matrix over the default scalar.
pub type CMat64 = CMat<f64>;
/// Complex matrix over `f32`.
pub type CMat32 = CMat<f32>;
/// Unit vector over the default scalar.
pub type UnitVec64 = UnitVec<f64>;
/// Complex scalar over the default scalar.
pub type C64 = C<f64>;
