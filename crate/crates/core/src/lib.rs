//! Estimation of additive functionals `θ(P; φ) = Σ φ(p_i)` of discrete
//! distributions from samples.
//!
//! The main estimator switches per symbol between a best-polynomial
//! estimator (small counts) and a bias-corrected plugin on a smoothed `φ`
//! (large counts), selected by an independent half of a Poissonized sample.

#![forbid(unsafe_code)]

pub mod error;
pub mod estimators;
pub mod io;
pub mod numeric;
pub mod phi;
pub mod poly;
pub mod risk;
pub mod sampling;
pub mod smoothing;

pub use error::{Error, Result};
pub use estimators::{estimate, EstimateResult, Estimator, EstimatorConfig, FourthOrderScheme, Mode};
pub use phi::{theta_true, PhiKind, PhiSpec, ProbabilityVector};
pub use poly::{remez_best_poly, Polynomial};
pub use sampling::{Histogram, Preset, SplitHistograms};
pub use smoothing::SmoothedPhi;
