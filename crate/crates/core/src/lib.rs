//! Simulation and pulse-synthesis toolkit for multi-tone control of a single
//! d-level qudit.
//!
//! The linear-algebra and control layers are generic over [`Real`] (`f32` or
//! `f64`); the aliases below fix the scalar to `f64`, which is what the
//! synthesis, Grover, noise and benchmarking layers use throughout.

pub mod calibration;
pub mod control;
pub mod error;
pub mod grover;
pub mod levels;
pub mod linalg;
pub mod noise;
pub mod optim;
pub mod pulse_table;
pub mod rb;
pub mod rng;
pub mod scalar;
pub mod synthesis;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Complex = num_complex::Complex<f64>;
pub type ComplexMatrix = linalg::CMatrix<f64>;
pub type ComplexVector = linalg::CVector<f64>;
pub type StateVector = linalg::StateVector<f64>;
pub type ProbabilityDistribution = linalg::ProbabilityDistribution<f64>;
pub type ToneSet = control::ToneSet<f64>;
pub type PulseParams = control::PulseParams<f64>;
pub type PulseSequence = control::PulseSequence<f64>;
