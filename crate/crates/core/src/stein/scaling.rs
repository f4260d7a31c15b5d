use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::ThresholdedCovariance;
use crate::error::{check_dim, Error, Result};

/// Relative guard on the rank-one denominator: `μ̂₂ + μ̂₄ ⟨ζβ, β⟩ > GUARD · μ̂₂`.
pub const DENOMINATOR_GUARD: f64 = 1e-8;

/// The Newton-Stein scaling matrix in factored form,
///
/// ```text
/// Q = (1/μ̂₂) [ ζ⁻¹ − β βᵀ / (μ̂₂/μ̂₄ + ⟨ζβ, β⟩) ]
///   = (μ̂₂ ζ + μ̂₄ (ζβ)(ζβ)ᵀ)⁻¹
/// ```
///
/// The rank-one coefficient is stored as `μ̂₄ / (μ̂₂ + μ̂₄ ⟨ζβ, β⟩)` so the
/// `μ̂₄ = 0` case needs no division and yields `Q = ζ⁻¹ / μ̂₂` exactly.
#[derive(Clone, Debug)]
pub struct SteinScaling {
    mu2: f64,
    mu4: f64,
    beta_ref: DVector<f64>,
    cov: Arc<ThresholdedCovariance>,
    rank_one: f64,
    correction_dropped: bool,
}

impl SteinScaling {
    /// Builds `Q`, failing with [`Error::DenominatorNearZero`] when the
    /// rank-one denominator is not safely positive.
    pub fn build(cov: Arc<ThresholdedCovariance>, mu2: f64, mu4: f64, beta: &DVector<f64>) -> Result<Self> {
        Self::assemble(cov, mu2, mu4, beta, false).map(|(q, _)| q)
    }

    /// Like [`SteinScaling::build`] but drops the rank-one term when the guard
    /// fails, returning a warning describing the fallback.
    pub fn build_or_fallback(
        cov: Arc<ThresholdedCovariance>,
        mu2: f64,
        mu4: f64,
        beta: &DVector<f64>,
    ) -> Result<(Self, Option<String>)> {
        Self::assemble(cov, mu2, mu4, beta, true)
    }

    fn assemble(
        cov: Arc<ThresholdedCovariance>,
        mu2: f64,
        mu4: f64,
        beta: &DVector<f64>,
        fallback: bool,
    ) -> Result<(Self, Option<String>)> {
        check_dim(cov.dim(), beta.len())?;
        if !(mu2 > 0.0) || !mu2.is_finite() {
            return Err(Error::InvalidArgument(format!("mu2 must be positive and finite, got {mu2}")));
        }
        if !mu4.is_finite() {
            return Err(Error::NonFinite("mu4"));
        }
        let mut warning = None;
        let mut correction_dropped = false;
        let rank_one = if mu4 == 0.0 {
            0.0
        } else {
            let denominator = mu2 + mu4 * cov.quadratic_form(beta);
            let guard = DENOMINATOR_GUARD * mu2;
            // a negative denominator makes Q indefinite, so it fails the guard too
            if denominator > guard {
                mu4 / denominator
            } else if fallback {
                correction_dropped = true;
                warning = Some(format!(
                    "rank-one denominator {denominator:e} below guard {guard:e}; using zeta^-1/mu2"
                ));
                0.0
            } else {
                return Err(Error::DenominatorNearZero { denominator, guard });
            }
        };
        let q = Self { mu2, mu4, beta_ref: beta.clone(), cov, rank_one, correction_dropped };
        Ok((q, warning))
    }

    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    pub fn mu4(&self) -> f64 {
        self.mu4
    }

    pub fn beta_ref(&self) -> &DVector<f64> {
        &self.beta_ref
    }

    pub fn covariance(&self) -> &ThresholdedCovariance {
        &self.cov
    }

    /// Whether the guard dropped the rank-one correction.
    pub fn correction_dropped(&self) -> bool {
        self.correction_dropped
    }

    /// `Q v` in `O(pr)`.
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.cov.dim(), v.len())?;
        let mut out = self.cov.apply_inverse(v);
        if self.rank_one != 0.0 {
            out.axpy(-self.rank_one * self.beta_ref.dot(v), &self.beta_ref, 1.0);
        }
        Ok(out / self.mu2)
    }

    /// Dense `Q`. For tests and small problems only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let p = self.cov.dim();
        let mut q = DMatrix::zeros(p, p);
        for j in 0..p {
            let e = DVector::from_fn(p, |i, _| if i == j { 1.0 } else { 0.0 });
            q.set_column(j, &self.apply(&e).expect("dimension checked"));
        }
        crate::linalg::symmetrize(q)
    }

    /// Dense curvature estimate `μ̂₂ ζ + μ̂₄ (ζβ)(ζβ)ᵀ` that `Q` inverts
    /// (ignoring a dropped correction).
    pub fn curvature_dense(&self) -> DMatrix<f64> {
        let zb = self.cov.apply(&self.beta_ref);
        let mut h = self.cov.to_dense() * self.mu2;
        if !self.correction_dropped {
            h += &zb * zb.transpose() * self.mu4;
        }
        h
    }
}
