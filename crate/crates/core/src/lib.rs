//! Pseudodeterministic extraction of classical pseudorandom strings from
//! low-dimensional quantum states, simulated classically.
//!
//! The pipeline is: Haar or seeded state sampling ([`states`]) → diagonal
//! tomography ([`tomography`]) → block-sum rounding ([`extractor`]) →
//! generators and pseudorandom functions ([`generators`]) → one-time pads,
//! commitments and encryption ([`protocols`]). [`stats`] holds the
//! estimators and tests used to check each stage.
//!
//! Numerical code is generic over the scalar: rounding accepts any
//! [`Scalar`] (including exact rationals) and state arithmetic any [`Real`].
//! The aliases below fix the common double-precision instantiation.

pub mod bits;
pub mod calibration;
pub mod error;
pub mod experiments;
pub mod extractor;
pub mod generators;
pub mod protocols;
pub mod rng;
pub mod scalar;
pub mod states;
pub mod stats;
pub mod tomography;

pub use bits::{BitString, SeedKey, SeedRole};
pub use error::{Error, Result};
pub use rng::{Stream, StreamRng};
pub use scalar::{Real, Scalar};

/// Double-precision pure state.
pub type State = states::PureState<f64>;
/// Double-precision density matrix.
pub type Density = states::DensityMatrix<f64>;
/// Double-precision diagonal snapshot.
pub type Snapshot = tomography::DiagonalSnapshot<f64>;
/// Double-precision extractor parameters.
pub type Params = extractor::ExtractorParams<f64>;
/// Exact rational scalar.
pub type Rational = num_rational::BigRational;
/// Extractor parameters over exact rationals.
pub type ExactParams = extractor::ExtractorParams<Rational>;
