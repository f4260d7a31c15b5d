//! Parameter rules and convergence diagnostics for the Newton-Stein method.
//!
//! Convergence of the method is composite: the error `eₜ = ‖βₜ − β*‖₂`
//! satisfies `eₜ₊₁ ≤ τ₁ eₜ + τ₂ eₜ²`, quadratic while `eₜ` is large and
//! linear near the optimum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default constant in front of the `√(p/|S|)` fluctuation correction.
pub const DEFAULT_C_FLUCT: f64 = 1.0;
/// Number of log-spaced `ξ` grid points in [`iteration_bound`].
pub const XI_GRID_POINTS: usize = 512;

const STEP_MIN: f64 = 1.0;
const STEP_MAX: f64 = 1.95;

/// Constant step size for the Newton-Stein update.
///
/// Thresholding inflates the noise eigenvalue `σ̂²` by roughly `√(p/|S|)`,
/// so the smallest eigenvalue of `Q·∇²ℓ` sits near `(σ̂² − √(p/|S|))/σ̂²`
/// and the step balancing both ends of the spectrum exceeds one:
///
/// ```text
/// γ = 2 / (1 + (σ̂² − c)/σ̂²),   c = min(c_fluct √(p/|S|), 0.9 σ̂²)
/// ```
///
/// clamped to `[1, 1.95]`.
pub fn step_size_suggest(sigma2_hat: f64, p: usize, sample_size: usize, c_fluct: f64) -> Result<f64> {
    if !(sigma2_hat > 0.0) || !sigma2_hat.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma2_hat must be positive, got {sigma2_hat}")));
    }
    if sample_size == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    if !(c_fluct >= 0.0) {
        return Err(Error::InvalidArgument(format!("c_fluct must be nonnegative, got {c_fluct}")));
    }
    let correction = (c_fluct * (p as f64 / sample_size as f64).sqrt()).min(0.9 * sigma2_hat);
    let gamma = 2.0 / (1.0 + (sigma2_hat - correction) / sigma2_hat);
    Ok(gamma.clamp(STEP_MIN, STEP_MAX))
}

/// Sub-sample size `min(n, ⌈p ln p⌉)`.
pub fn suggest_sample_size(p: usize, n: usize) -> usize {
    let s = (p as f64 * (p as f64).ln()).ceil() as usize;
    s.max(1).min(n)
}

/// Output of [`suggest_rank`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSuggestion {
    pub rank: usize,
    /// The spectrum that was inspected, for manual review.
    pub spectrum: Vec<f64>,
    /// Relative gaps `(λᵢ − λᵢ₊₁)/λᵢ₊₁` over the searched range, `i = 1..`.
    pub relative_gaps: Vec<f64>,
    pub warning: Option<String>,
}

/// Picks the rank at the largest relative eigengap,
/// `r = argmaxᵢ (λᵢ − λᵢ₊₁)/λᵢ₊₁` for `i ∈ [1, min(p − 1, p/2)]`.
pub fn suggest_rank(spectrum: &[f64]) -> Result<RankSuggestion> {
    let p = spectrum.len();
    if p < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: p });
    }
    if spectrum.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spectrum"));
    }
    if spectrum.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("spectrum must be sorted in descending order".into()));
    }
    let upper = (p - 1).min(p / 2).max(1);
    let gaps: Vec<f64> = (0..upper)
        .map(|i| {
            let (hi, lo) = (spectrum[i], spectrum[i + 1]);
            if lo > 0.0 {
                (hi - lo) / lo
            } else if hi > lo {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .collect();
    let (best, &gap) = gaps
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |acc, (i, g)| if *g > *acc.1 { (i, g) } else { acc });
    let (rank, warning) = if gap < 1e-9 {
        (0, Some("spectrum is flat; no eigengap found, using rank 0".to_string()))
    } else {
        (best + 1, None)
    };
    Ok(RankSuggestion { rank, spectrum: spectrum.to_vec(), relative_gaps: gaps, warning })
}

/// Fitted composite-convergence coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceFit {
    pub tau1: f64,
    pub tau2: f64,
    /// First index `t` where the linear term `τ₁eₜ` exceeds `τ₂eₜ²`.
    pub transition_iter: Option<usize>,
    pub r_squared: f64,
    /// Number of `(eₜ, eₜ₊₁)` pairs used.
    pub pairs: usize,
}

/// Nonnegative least squares of `eₜ₊₁` on `(eₜ, eₜ²)`.
///
/// The sequence is truncated at its first non-positive entry (exact
/// convergence); at least four positive values must remain.
pub fn fit_composite(errors: &[f64]) -> Result<ConvergenceFit> {
    if errors.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("error sequence"));
    }
    if !errors.is_empty() && errors.iter().all(|&e| e == 0.0) {
        return Err(Error::Degenerate("error sequence is identically zero".into()));
    }
    let len = errors.iter().position(|&e| e <= 0.0).unwrap_or(errors.len());
    let e = &errors[..len];
    if e.len() < 4 {
        return Err(Error::TooFewPoints { needed: 4, got: e.len() });
    }
    let m = e.len() - 1;
    let design = DMatrix::from_fn(m, 2, |i, j| if j == 0 { e[i] } else { e[i] * e[i] });
    let target = DVector::from_iterator(m, e[1..].iter().copied());

    let sse = |t1: f64, t2: f64| -> f64 {
        (0..m)
            .map(|i| {
                let r = target[i] - t1 * design[(i, 0)] - t2 * design[(i, 1)];
                r * r
            })
            .sum()
    };
    let single = |col: usize| -> f64 {
        let c = design.column(col);
        (c.dot(&target) / c.norm_squared()).max(0.0)
    };

    let mut candidates = vec![(single(0), 0.0), (0.0, single(1))];
    // scale columns before solving so the quadratic column does not vanish numerically
    let scales = [design.column(0).norm(), design.column(1).norm()];
    if scales.iter().all(|&s| s > 0.0) {
        let scaled = DMatrix::from_fn(m, 2, |i, j| design[(i, j)] / scales[j]);
        if let Ok(sol) = scaled.svd(true, true).solve(&target, 1e-14) {
            let (t1, t2) = (sol[0] / scales[0], sol[1] / scales[1]);
            if t1 >= 0.0 && t2 >= 0.0 {
                candidates.push((t1, t2));
            }
        }
    }
    let (tau1, tau2, _) = candidates
        .into_iter()
        .map(|(a, b)| (a, b, sse(a, b)))
        .fold((0.0, 0.0, f64::INFINITY), |best, c| if c.2 < best.2 { c } else { best });

    let mean = target.mean();
    let sst: f64 = target.iter().map(|v| (v - mean) * (v - mean)).sum();
    let residual = sse(tau1, tau2);
    let r_squared = if sst > 0.0 {
        (1.0 - residual / sst).clamp(0.0, 1.0)
    } else if residual == 0.0 {
        1.0
    } else {
        0.0
    };
    let transition_iter = e.iter().position(|&v| tau1 * v > tau2 * v * v);
    Ok(ConvergenceFit { tau1, tau2, transition_iter, r_squared, pairs: m })
}

/// Inputs of the iteration-count bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationBoundInput {
    pub tau1: f64,
    pub tau2: f64,
    /// Initial distance `ϑ = ‖β⁰ − β*‖₂`.
    pub theta0: f64,
    pub eps: f64,
    pub grid_points: usize,
}

impl IterationBoundInput {
    pub fn new(tau1: f64, tau2: f64, theta0: f64, eps: f64) -> Self {
        Self { tau1, tau2, theta0, eps, grid_points: XI_GRID_POINTS }
    }
}

/// Result of [`iteration_bound`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationBound {
    /// Minimizing quadratic-phase exit level.
    pub xi_star: f64,
    /// Integer iteration bound at `xi_star`: each phase's count rounded up.
    pub j_star: u64,
    /// Real-valued `J(ξ*)`.
    pub j_continuous: f64,
    pub quadratic_phase: f64,
    pub linear_phase: f64,
}

/// Upper bound on the iterations a compositely converging sequence needs to
/// reach `eps` from `theta0`.
///
/// For an exit level `ξ` in `Ξ = (τ₁ϑ/(1 − τ₂ϑ), ϑ)`, with `c = τ₁/ξ + τ₂`:
///
/// ```text
/// J(ξ) = log₂( log(ξ c) / log(ϑ c) ) + log(ε/ξ) / log(τ₁ + τ₂ ξ)
/// ```
///
/// The first term counts quadratic-phase steps until `eₜ ≤ ξ`, the second
/// linear-phase steps from `ξ` down to `ε`. Each phase is rounded up
/// separately (and the linear phase floored at zero) so the result bounds
/// the integer iteration count; the minimum is taken over a log-spaced grid.
pub fn iteration_bound(input: &IterationBoundInput) -> Result<IterationBound> {
    let IterationBoundInput { tau1, tau2, theta0, eps, grid_points } = *input;
    if ![tau1, tau2, theta0, eps].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("iteration bound input"));
    }
    if tau1 < 0.0 || tau2 < 0.0 || !(theta0 > 0.0) || !(eps > 0.0) || grid_points == 0 {
        return Err(Error::InvalidArgument(
            "need tau1, tau2 >= 0, theta0 > 0, eps > 0 and a nonempty grid".into(),
        ));
    }
    if eps >= theta0 {
        return Err(Error::InvalidArgument(format!("eps {eps:e} must be below theta0 {theta0:e}")));
    }
    let limit = if tau2 > 0.0 { (1.0 - tau1) / tau2 } else if tau1 < 1.0 { f64::INFINITY } else { 0.0 };
    if theta0 >= limit {
        return Err(Error::InfeasibleStart { theta: theta0, limit });
    }
    let lower = tau1 * theta0 / (1.0 - tau2 * theta0);
    let upper = theta0;
    if !(lower < upper) {
        return Err(Error::EmptyInterval { lower, upper });
    }
    let lo = if lower > 0.0 { lower } else { eps.min(theta0) * 1e-3 };
    let (ln_lo, ln_hi) = (lo.ln(), upper.ln());

    let mut best: Option<IterationBound> = None;
    for k in 0..grid_points {
        let xi = (ln_lo + (k as f64 + 0.5) / grid_points as f64 * (ln_hi - ln_lo)).exp();
        let c = tau1 / xi + tau2;
        let (num, den) = ((xi * c).ln(), (theta0 * c).ln());
        let rate = tau1 + tau2 * xi;
        if !(den < 0.0 && num < 0.0 && rate > 0.0 && rate < 1.0) {
            continue;
        }
        let quadratic = (num / den).log2().max(0.0);
        let linear = ((eps / xi).ln() / rate.ln()).max(0.0);
        if !quadratic.is_finite() || !linear.is_finite() {
            continue;
        }
        let j_star = quadratic.ceil() as u64 + linear.ceil() as u64;
        let candidate = IterationBound {
            xi_star: xi,
            j_star,
            j_continuous: quadratic + linear,
            quadratic_phase: quadratic,
            linear_phase: linear,
        };
        let better = match &best {
            None => true,
            Some(b) => (j_star, candidate.j_continuous) < (b.j_star, b.j_continuous),
        };
        if better {
            best = Some(candidate);
        }
    }
    best.ok_or(Error::EmptyInterval { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_size_examples() {
        let g = step_size_suggest(1.0, 100, 1000, 1.0).unwrap();
        let expected = 2.0 / (1.0 + (1.0 - 0.1_f64.sqrt()));
        assert!((g - expected).abs() < 1e-12);
        assert!((g - 1.1878).abs() < 1e-4);
        // γ − 1 shrinks like √(p/|S|)
        let far = step_size_suggest(1.0, 100, usize::MAX, 1.0).unwrap();
        assert!(far >= 1.0 && far - 1.0 < 1e-8, "{far}");
        // correction capped at 0.9 σ̂²
        let capped = step_size_suggest(0.5, 1000, 1, 1.0).unwrap();
        assert!((capped - 2.0 / 1.1).abs() < 1e-12);
        assert!(capped <= STEP_MAX);
        assert!(step_size_suggest(0.0, 10, 10, 1.0).is_err());
        assert!(step_size_suggest(-1.0, 10, 10, 1.0).is_err());
    }

    #[test]
    fn sample_size_examples() {
        assert_eq!(suggest_sample_size(300, 1_000_000), 1712);
        assert_eq!(suggest_sample_size(2, 3), 2);
        assert_eq!(suggest_sample_size(100, 50), 50);
    }

    #[test]
    fn rank_examples() {
        let s = suggest_rank(&[10.0, 9.0, 8.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(s.rank, 3);
        assert!(s.warning.is_none());
        let flat = suggest_rank(&[2.0; 8]).unwrap();
        assert_eq!(flat.rank, 0);
        assert!(flat.warning.is_some());
        assert!(suggest_rank(&[1.0]).is_err());
        assert!(suggest_rank(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn fit_pure_linear_decay() {
        let e: Vec<f64> = (0..20).map(|t| 0.5_f64.powi(t)).collect();
        let fit = fit_composite(&e).unwrap();
        assert!((fit.tau1 - 0.5).abs() < 1e-9);
        assert!(fit.tau2.abs() < 1e-6);
        assert_eq!(fit.transition_iter, Some(0));
    }

    #[test]
    fn fit_rejects_short_or_zero_sequences() {
        assert!(matches!(fit_composite(&[1.0, 0.5]), Err(Error::TooFewPoints { .. })));
        assert!(matches!(fit_composite(&[0.0; 6]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn bound_rejects_infeasible_start() {
        let r = iteration_bound(&IterationBoundInput::new(0.5, 1.0, 0.5, 1e-6));
        assert!(matches!(r, Err(Error::InfeasibleStart { .. })));
        let r = iteration_bound(&IterationBoundInput::new(1.0, 0.0, 0.5, 1e-6));
        assert!(matches!(r, Err(Error::InfeasibleStart { .. })));
    }

    #[test]
    fn bound_shrinks_as_eps_approaches_theta() {
        let far = iteration_bound(&IterationBoundInput::new(0.5, 1.0, 0.25, 1e-6)).unwrap();
        let near = iteration_bound(&IterationBoundInput::new(0.5, 1.0, 0.25, 0.2499)).unwrap();
        assert!(near.j_star <= 3, "{near:?}");
        assert!(near.j_star < far.j_star);
        let xi = far.xi_star;
        assert!(xi > 0.5 * 0.25 / (1.0 - 0.25) && xi < 0.25);
    }
}
