//! Pre-averaging estimators, the realized kernel comparator, oracle
//! asymptotic variances and jump decomposition.

pub mod avar;
pub mod jumps;
pub mod kernel;
pub mod mrc;
pub mod preaverage;

pub use avar::{avar_univariate, optimal_theta, oracle_avar, studentize, v_c_v_j, SpotPath};
pub use jumps::{
    block_std, default_threshold_constant, threshold_estimators, threshold_from_values, tricity, JumpDecomposition,
};
pub use kernel::{autocovariances_direct, autocovariances_fft, realized_kernel, Kernel};
pub use mrc::{
    block_sum, matrix_from_rows, matrix_rows, mrc, mrc_fast_exponential, mrc_from_values, realized_covariance,
    Diagnostics, EstimateReport, MrcParts,
};
pub use preaverage::{
    jitter, preaverage_bounded, preaverage_exponential_series, preaverage_jittered, preaverage_jittered_series,
    Construction, Jittered, PreAveraged,
};
