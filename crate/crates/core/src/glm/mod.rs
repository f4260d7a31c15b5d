//! GLM objective, gradient and exact Hessian.

mod dataset;
mod family;
mod objective;

pub use dataset::Dataset;
pub use family::{sigmoid, CumulantFamily, POISSON_CLAMP};
pub use objective::Glm;
