//! Grey-box nonlinear state-space identification of mechanical vibrations.
//!
//! The crate covers the full pipeline: multisine excitation and periodic
//! signal handling ([`signals`]), ground-truth and model simulation
//! ([`simulator`]), frequency-domain nonlinear subspace initialisation
//! ([`subspace`]), maximum-likelihood refinement by Levenberg-Marquardt with
//! analytic Jacobians ([`ml`]), and conversion of identified models into
//! physical nonlinear coefficients ([`coeff`]).

pub mod coeff;
pub mod error;
pub mod ml;
pub mod model;
pub mod signals;
pub mod simulator;
pub mod subspace;

pub use error::{Error, ErrorKind, Result};
pub use model::{BasisFunctionSet, GreyBoxModel, ModelDims};
