use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;

use super::driver::{self, State, UpdateRule};
use super::{IterationTrace, Method, OptimizerConfig, RunParameters};
use crate::error::{check_dim, Error, Result};
use crate::glm::{CumulantFamily, Dataset, Glm};
use crate::stein::{subsample_covariance, SteinScaling, ThresholdedCovariance};
use crate::theory;

struct NewtonStein<'a> {
    data: &'a Dataset,
    cov: Arc<ThresholdedCovariance>,
    gamma: f64,
    sample_size: usize,
    rank: usize,
    seed: u64,
    resample_every: usize,
}

impl UpdateRule for NewtonStein<'_> {
    fn propose(&mut self, glm: &Glm<'_>, state: &State, t: usize, warnings: &mut Vec<String>) -> Result<DVector<f64>> {
        if self.resample_every > 0 && t > 1 && (t - 1).is_multiple_of(self.resample_every) {
            let round = ((t - 1) / self.resample_every) as u64;
            let cov = subsample_covariance(self.data, self.sample_size, self.seed.wrapping_add(round))?;
            self.cov = Arc::new(cov.spectrum().threshold(self.rank)?);
        }
        let (mu2, mu4) = glm.curvature_moments_at(&state.z)?;
        if !(mu2 > 0.0) {
            return Err(Error::Degenerate(format!("mu2 = {mu2:e}; curvature vanished")));
        }
        let (q, warning) = SteinScaling::build_or_fallback(self.cov.clone(), mu2, mu4, &state.beta)?;
        warnings.extend(warning);
        let direction = q.apply(&state.grad)?;
        Ok(&state.beta - direction * self.gamma)
    }
}

/// Runs the Newton-Stein method.
///
/// Setup (once): draw the covariance sub-sample, eigen-decompose it, pick the
/// rank and step size if not given, and threshold. Each iteration then costs
/// `O(np + pr)`: the curvature moments `μ̂₂, μ̂₄` over all rows, the gradient,
/// and the factored scaling `Q` applied to it, followed by the ball projection.
pub fn newst_optimize(
    data: &Dataset,
    family: CumulantFamily,
    beta0: &DVector<f64>,
    cfg: &OptimizerConfig,
) -> Result<IterationTrace> {
    if cfg.method != Method::Newst {
        return Err(Error::InvalidArgument(format!("newst_optimize called with method {}", cfg.method)));
    }
    let (n, p) = (data.n(), data.p());
    check_dim(p, beta0.len())?;
    cfg.validate(n, p)?;
    data.check_family(family)?;
    let started = Instant::now();
    let mut warnings = Vec::new();
    if !family.within_theory() {
        warnings.push(format!("family {family} is outside the convergence guarantees"));
    }
    if p < 2 {
        return Err(Error::InvalidArgument("Newton-Stein needs p >= 2 to threshold".into()));
    }

    let sample_size = cfg.sample_size.unwrap_or_else(|| theory::suggest_sample_size(p, n));
    let spectrum = subsample_covariance(data, sample_size, cfg.seed)?.spectrum();
    let rank = match cfg.rank {
        Some(r) => r,
        None => {
            let s = theory::suggest_rank(spectrum.values().as_slice())?;
            warnings.extend(s.warning);
            s.rank
        }
    };
    let cov = Arc::new(spectrum.threshold(rank)?);
    let gamma = match cfg.gamma {
        Some(g) => g,
        None => theory::step_size_suggest(cov.sigma2_hat(), p, sample_size, cfg.c_fluct)?,
    };
    let parameters = RunParameters {
        gamma: Some(gamma),
        sample_size: Some(sample_size),
        rank: Some(rank),
        sigma2_hat: Some(cov.sigma2_hat()),
    };
    let mut rule = NewtonStein {
        data,
        cov,
        gamma,
        sample_size,
        rank,
        seed: cfg.seed,
        resample_every: cfg.resample_every,
    };
    let glm = Glm::new(data, family);
    driver::run(&glm, beta0, cfg, Method::Newst, parameters, warnings, started, &mut rule)
}
