use nalgebra::{DMatrix, DVector};

use super::{CumulantFamily, Dataset};
use crate::error::{check_dim, Error, Result};

/// A GLM negative log-likelihood bound to a dataset and family.
///
/// Every reduction over observations runs sequentially in row order, so
/// results are bit-reproducible for identical inputs.
#[derive(Clone, Copy, Debug)]
pub struct Glm<'a> {
    data: &'a Dataset,
    family: CumulantFamily,
}

impl<'a> Glm<'a> {
    pub fn new(data: &'a Dataset, family: CumulantFamily) -> Self {
        Self { data, family }
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn family(&self) -> CumulantFamily {
        self.family
    }

    /// `z = X β`.
    pub fn linear_predictor(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.data.p(), beta.len())?;
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficient vector"));
        }
        Ok(self.data.x() * beta)
    }

    /// `ℓ(β) = (1/n) Σᵢ [φ(⟨xᵢ, β⟩) − yᵢ ⟨xᵢ, β⟩]`.
    pub fn objective(&self, beta: &DVector<f64>) -> Result<f64> {
        let z = self.linear_predictor(beta)?;
        self.objective_at(&z)
    }

    /// `∇ℓ(β) = (1/n) Σᵢ [φ'(⟨xᵢ, β⟩) − yᵢ] xᵢ`.
    pub fn gradient(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        let z = self.linear_predictor(beta)?;
        self.gradient_at(&z)
    }

    /// `∇²ℓ(β) = (1/n) Σᵢ φ''(⟨xᵢ, β⟩) xᵢ xᵢᵀ`, densified.
    pub fn hessian(&self, beta: &DVector<f64>) -> Result<DMatrix<f64>> {
        let z = self.linear_predictor(beta)?;
        self.hessian_at(&z)
    }

    /// `μ̂ₖ(β) = (1/n) Σᵢ φ⁽ᵏ⁾(⟨xᵢ, β⟩)` for `k ∈ {2, 4}`.
    pub fn mu_hat(&self, beta: &DVector<f64>, order: u8) -> Result<f64> {
        if order != 2 && order != 4 {
            return Err(Error::InvalidArgument(format!(
                "curvature moment order must be 2 or 4, got {order}"
            )));
        }
        let z = self.linear_predictor(beta)?;
        let (mu2, mu4) = self.curvature_moments_at(&z)?;
        Ok(if order == 2 { mu2 } else { mu4 })
    }

    pub fn objective_at(&self, z: &DVector<f64>) -> Result<f64> {
        check_dim(self.data.n(), z.len())?;
        let f = self.family;
        let sum: f64 = z
            .iter()
            .zip(self.data.y().iter())
            .map(|(&zi, &yi)| f.phi(zi) - yi * zi)
            .sum();
        let value = sum / self.data.n() as f64;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFinite("objective"))
        }
    }

    pub fn gradient_at(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.data.n(), z.len())?;
        let f = self.family;
        let inv_n = 1.0 / self.data.n() as f64;
        let residual = DVector::from_iterator(
            z.len(),
            z.iter()
                .zip(self.data.y().iter())
                .map(|(&zi, &yi)| (f.d1(zi) - yi) * inv_n),
        );
        let g = self.data.x().tr_mul(&residual);
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(Error::NonFinite("gradient"))
        }
    }

    pub fn hessian_at(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.data.n(), z.len())?;
        let f = self.family;
        let inv_n = 1.0 / self.data.n() as f64;
        let mut weighted = self.data.x().clone();
        for (mut row, &zi) in weighted.row_iter_mut().zip(z.iter()) {
            row *= f.d2(zi) * inv_n;
        }
        let h = self.data.x().tr_mul(&weighted);
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("hessian"));
        }
        Ok(crate::linalg::symmetrize(h))
    }

    /// `(μ̂₂, μ̂₄)` evaluated from a precomputed linear predictor.
    pub fn curvature_moments_at(&self, z: &DVector<f64>) -> Result<(f64, f64)> {
        check_dim(self.data.n(), z.len())?;
        let f = self.family;
        let (mut s2, mut s4) = (0.0, 0.0);
        for &zi in z.iter() {
            s2 += f.d2(zi);
            s4 += f.d4(zi);
        }
        let n = self.data.n() as f64;
        let (mu2, mu4) = (s2 / n, s4 / n);
        if mu2.is_finite() && mu4.is_finite() {
            Ok((mu2, mu4))
        } else {
            Err(Error::NonFinite("curvature moments"))
        }
    }
}
