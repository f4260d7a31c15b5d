//! The Newton-Stein loop and the baseline optimizers.
//!
//! Every method shares [`OptimizerConfig`], the ball projection, the
//! termination rule, and the [`IterationTrace`] output.

mod baselines;
mod config;
mod driver;
mod newst;
mod project;
mod trace;

use nalgebra::DVector;

pub use baselines::{baseline_optimize, max_curvature, BfgsInverse};
pub use config::{Method, OptimizerConfig, TerminationRule};
pub use newst::newst_optimize;
pub use project::project_ball;
pub use trace::{read_rows, write_rows, IterRecord, IterationTrace, RunParameters, Termination, TraceRow, TRACE_COLUMNS};

use crate::error::Result;
use crate::glm::{CumulantFamily, Dataset};

/// Runs whichever method `cfg.method` names.
pub fn optimize(
    data: &Dataset,
    family: CumulantFamily,
    beta0: &DVector<f64>,
    cfg: &OptimizerConfig,
) -> Result<IterationTrace> {
    match cfg.method {
        Method::Newst => newst_optimize(data, family, beta0, cfg),
        _ => baseline_optimize(data, family, beta0, cfg),
    }
}

/// Recorded gradient norm at iteration `t` of a trace.
pub fn grad_norm_at(trace: &IterationTrace, t: usize) -> Result<f64> {
    trace.grad_norm_at(t)
}
