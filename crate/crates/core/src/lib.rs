//! Pre-averaging estimators of integrated covariance for noisy, non-synchronous
//! and possibly endogenously sampled high-frequency data.
//!
//! The crate is organised bottom-up:
//!
//! * [`timegrid`] builds observation schemes and synchronizes multi-asset ticks
//!   (refresh times plus next-tick interpolation).
//! * [`market_sim`] simulates latent log-prices, microstructure noise and jumps.
//! * [`weights`] holds the pre-averaging weight functions and their constants.
//! * [`estimators`] implements the modulated realized covariance family, the
//!   flat-top realized kernel, threshold jump decompositions and oracle
//!   asymptotic variances.
//! * [`param_jump`] is the parametric jump model with its MA(1) covariance
//!   structure, closed-form eigendecomposition and MLE-type jump estimator.

pub mod error;
pub mod estimators;
pub mod io;
pub mod market_sim;
pub mod param_jump;
pub mod quadrature;
pub mod stats;
pub mod timegrid;
pub mod weights;

pub use error::{Error, Result};
