//! Transmit-power control for over-the-air computation (AirComp).
//!
//! A set of devices transmits analog signals simultaneously over a
//! multiple-access channel so that a fusion center receives their
//! superposition and recovers the average. This crate computes power
//! policies and receive-side denoising factors that minimize the resulting
//! computation MSE:
//!
//! * [`static_solver`]: closed-form threshold policy for a fixed channel.
//! * [`fading`]: Lagrange-dual solver over a finite fading ensemble.
//! * [`waterfilling`]: closed form when only one device is power limited.
//! * [`lowcomplexity`]: truncated channel inversion with a fixed denoising factor.
//! * [`baselines`]: full power, uniform power, and traditional channel inversion.
//!
//! MSE evaluation lives in [`model`] and [`signal`]; fading ensembles in
//! [`ensemble`]; CSV exports in [`export`]; the experiment harness behind the
//! `aircomp` binary in [`experiment`] and [`verify`].

pub mod baselines;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod export;
pub mod fading;
pub mod lowcomplexity;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod signal;
pub mod static_solver;
pub mod verify;
pub mod waterfilling;

pub use ensemble::FadingEnsemble;
pub use error::{Error, Result};
pub use model::{ChannelVector, Denoise, MseReport, PowerPolicy, SystemConfig};
