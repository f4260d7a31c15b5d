//! Newton-Stein curvature: sub-sampled covariance, eigenvalue thresholding,
//! and the factored scaling matrix.

mod check;
mod covariance;
mod scaling;
mod threshold;

pub use check::{stein_expectation_check, stein_expectation_check_with, stein_hessian_accuracy, weighted_second_moment};
pub use covariance::{eigen_threshold, subsample_covariance, CovarianceSpectrum, SampleCovariance};
pub use scaling::{SteinScaling, DENOMINATOR_GUARD};
pub use threshold::ThresholdedCovariance;
