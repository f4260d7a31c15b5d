use nalgebra::DVector;
use newst::optim::TraceRow;
use newst::theory::{fit_composite, iteration_bound, ConvergenceFit, IterationBound, IterationBoundInput};
use serde::Serialize;

use crate::Result;

/// How the error sequence was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSource {
    /// `‖β̂ᵗ − β*‖` from saved iterates and a reference minimizer.
    Distance,
    /// `‖β̂ᵗ⁺¹ − β̂ᵗ‖`, which tracks `‖β̂ᵗ − β*‖` once convergence is fast.
    StepNormProxy,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnosis {
    pub source: ErrorSource,
    pub errors: Vec<f64>,
    pub fit: ConvergenceFit,
    pub observed_iterations: usize,
    pub tol_eps: f64,
    /// Iteration bound for the fitted coefficients, or why it is unavailable.
    pub bound: std::result::Result<IterationBound, String>,
}

/// Distances of each iterate to `beta_star`.
pub fn distance_errors(iterates: &[DVector<f64>], beta_star: &DVector<f64>) -> Vec<f64> {
    iterates.iter().map(|b| (b - beta_star).norm()).collect()
}

/// Step-norm proxy `e_t = ‖β̂ᵗ⁺¹ − β̂ᵗ‖` from trace rows.
pub fn step_norm_errors(rows: &[TraceRow]) -> Vec<f64> {
    rows.iter().skip(1).map(|r| r.step_norm).collect()
}

/// Composite-convergence fit, phase-transition index, and the iteration
/// bound for reaching `tol_eps` from the first error.
pub fn diagnose(rows: &[TraceRow], errors: Option<Vec<f64>>, tol_eps: f64) -> Result<Diagnosis> {
    let (source, errors) = match errors {
        Some(e) => (ErrorSource::Distance, e),
        None => (ErrorSource::StepNormProxy, step_norm_errors(rows)),
    };
    let fit = fit_composite(&errors)?;
    let theta0 = errors[0];
    let bound = iteration_bound(&IterationBoundInput::new(fit.tau1, fit.tau2, theta0, tol_eps)).map_err(|e| e.to_string());
    Ok(Diagnosis {
        source,
        errors,
        fit,
        observed_iterations: rows.last().map_or(0, |r| r.t),
        tol_eps,
        bound,
    })
}

impl Diagnosis {
    pub fn report(&self) -> String {
        let f = &self.fit;
        let mut out = String::new();
        let source = match self.source {
            ErrorSource::Distance => "distance to reference minimizer",
            ErrorSource::StepNormProxy => "step-norm proxy",
        };
        out.push_str(&format!("errors: {source} ({} values)\n", self.errors.len()));
        out.push_str(&format!("tau1 = {:.6e}\ntau2 = {:.6e}\nr_squared = {:.6}\n", f.tau1, f.tau2, f.r_squared));
        match f.transition_iter {
            Some(t) => out.push_str(&format!("transition_iter = {t}\n")),
            None => out.push_str("transition_iter = none (quadratic term dominates throughout)\n"),
        }
        out.push_str(&format!("observed iterations = {}\n", self.observed_iterations));
        match &self.bound {
            Ok(b) => out.push_str(&format!(
                "iteration bound to eps = {:.1e}: J_star = {} (xi_star = {:.6e}, quadratic {:.3}, linear {:.3})\n",
                self.tol_eps, b.j_star, b.xi_star, b.quadratic_phase, b.linear_phase
            )),
            Err(e) => out.push_str(&format!("iteration bound unavailable: {e}\n")),
        }
        out
    }
}
