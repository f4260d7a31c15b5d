//! Iteration loop shared by every optimizer: evaluation, projection,
//! bookkeeping, and termination.

use std::time::Instant;

use nalgebra::DVector;

use super::{project_ball, IterRecord, IterationTrace, Method, OptimizerConfig, RunParameters, Termination, TerminationRule, TraceRow};
use crate::error::{Error, Result};
use crate::glm::Glm;

/// Iterate with its cached linear predictor, objective and gradient.
#[derive(Clone, Debug)]
pub(crate) struct State {
    pub beta: DVector<f64>,
    pub z: DVector<f64>,
    pub objective: f64,
    pub grad: DVector<f64>,
}

impl State {
    pub fn evaluate(glm: &Glm<'_>, beta: DVector<f64>) -> Result<Self> {
        let z = glm.linear_predictor(&beta)?;
        let objective = glm.objective_at(&z)?;
        let grad = glm.gradient_at(&z)?;
        Ok(Self { beta, z, objective, grad })
    }
}

/// One optimizer's update.
pub(crate) trait UpdateRule {
    /// Next iterate before projection.
    fn propose(&mut self, glm: &Glm<'_>, state: &State, t: usize, warnings: &mut Vec<String>) -> Result<DVector<f64>>;

    /// Called after `next` has been accepted.
    fn observe(&mut self, _prev: &State, _next: &State) {}
}

/// Errors that end a run as `Diverged` instead of failing it.
fn is_divergence(e: &Error) -> bool {
    matches!(e, Error::NonFinite(_) | Error::Degenerate(_))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn run<R: UpdateRule>(
    glm: &Glm<'_>,
    beta0: &DVector<f64>,
    cfg: &OptimizerConfig,
    method: Method,
    parameters: RunParameters,
    mut run_warnings: Vec<String>,
    setup_started: Instant,
    rule: &mut R,
) -> Result<IterationTrace> {
    let (beta, projected) = project_ball(beta0, cfg.radius);
    let mut state = State::evaluate(glm, beta)?;
    let mut iterates = Vec::new();
    if cfg.keep_iterates {
        iterates.push(state.beta.clone());
    }
    let mut records = vec![IterRecord {
        row: TraceRow {
            t: 0,
            objective: state.objective,
            grad_norm: state.grad.norm(),
            step_norm: 0.0,
            elapsed_seconds: setup_started.elapsed().as_secs_f64(),
        },
        projected,
        warnings: Vec::new(),
    }];

    let converged = |row: &TraceRow| match cfg.termination {
        TerminationRule::StepNorm => row.t > 0 && row.step_norm <= cfg.tol_eps,
        TerminationRule::GradNorm => row.grad_norm <= cfg.tol_eps,
    };

    let mut termination = if converged(&records[0].row) { Termination::Converged } else { Termination::MaxIterations };
    if termination != Termination::Converged {
        for t in 1..=cfg.max_iter {
            let started = Instant::now();
            let mut warnings = Vec::new();
            let candidate = match rule.propose(glm, &state, t, &mut warnings) {
                Ok(c) if c.iter().all(|v| v.is_finite()) => c,
                Ok(_) => {
                    run_warnings.push(format!("t={t}: non-finite update"));
                    termination = Termination::Diverged;
                    break;
                }
                Err(e) if is_divergence(&e) => {
                    run_warnings.push(format!("t={t}: {e}"));
                    termination = Termination::Diverged;
                    break;
                }
                Err(e) => return Err(e),
            };
            let (next_beta, projected) = project_ball(&candidate, cfg.radius);
            let step_norm = (&next_beta - &state.beta).norm();
            let next = match State::evaluate(glm, next_beta) {
                Ok(s) => s,
                Err(e) if is_divergence(&e) => {
                    run_warnings.push(format!("t={t}: {e}"));
                    termination = Termination::Diverged;
                    break;
                }
                Err(e) => return Err(e),
            };
            rule.observe(&state, &next);
            let row = TraceRow {
                t,
                objective: next.objective,
                grad_norm: next.grad.norm(),
                step_norm,
                elapsed_seconds: started.elapsed().as_secs_f64(),
            };
            let done = converged(&row);
            records.push(IterRecord { row, projected, warnings });
            if cfg.keep_iterates {
                iterates.push(next.beta.clone());
            }
            state = next;
            if done {
                termination = Termination::Converged;
                break;
            }
        }
    }

    Ok(IterationTrace {
        method,
        tol_eps: cfg.tol_eps,
        records,
        beta: state.beta,
        termination,
        parameters,
        warnings: run_warnings,
        iterates,
    })
}
