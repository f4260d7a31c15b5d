use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

/// Factored eigenvalue-thresholded covariance
/// `ζ = σ̂² I + U diag(λ − σ̂²) Uᵀ`.
///
/// Holds the top `r` eigenpairs `(λᵢ, uᵢ)` and the flattened noise level
/// `σ̂²`; the remaining `p − r` eigenvalues all equal `σ̂²`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdedCovariance {
    sigma2_hat: f64,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
}

impl ThresholdedCovariance {
    pub fn new(sigma2_hat: f64, eigvals: DVector<f64>, eigvecs: DMatrix<f64>) -> Result<Self> {
        if !(sigma2_hat > 0.0) || !sigma2_hat.is_finite() {
            return Err(Error::DegenerateSpectrum { sigma2_hat });
        }
        check_dim(eigvals.len(), eigvecs.ncols())?;
        if eigvecs.ncols() >= eigvecs.nrows() {
            return Err(Error::InvalidArgument(format!(
                "rank {} must be below the dimension {}",
                eigvecs.ncols(),
                eigvecs.nrows()
            )));
        }
        if eigvals.iter().any(|&l| !(l >= sigma2_hat) || !l.is_finite()) {
            return Err(Error::InvalidArgument(
                "retained eigenvalues must be finite and at least sigma2_hat".into(),
            ));
        }
        Ok(Self { sigma2_hat, eigvals, eigvecs })
    }

    /// Flattened noise level `σ̂² = λ_{r+1}`.
    pub fn sigma2_hat(&self) -> f64 {
        self.sigma2_hat
    }

    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn rank(&self) -> usize {
        self.eigvals.len()
    }

    pub fn dim(&self) -> usize {
        self.eigvecs.nrows()
    }

    /// `ζ v` in `O(pr)`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let coords = self.eigvecs.tr_mul(v);
        let scaled = coords.zip_map(&self.eigvals, |c, l| c * (l - self.sigma2_hat));
        v * self.sigma2_hat + &self.eigvecs * scaled
    }

    /// `ζ⁻¹ v = v / σ̂² + U diag(1/λ − 1/σ̂²) Uᵀ v` in `O(pr)`.
    pub fn apply_inverse(&self, v: &DVector<f64>) -> DVector<f64> {
        let inv = 1.0 / self.sigma2_hat;
        let coords = self.eigvecs.tr_mul(v);
        let scaled = coords.zip_map(&self.eigvals, |c, l| c * (1.0 / l - inv));
        v * inv + &self.eigvecs * scaled
    }

    /// `⟨ζ β, β⟩`.
    pub fn quadratic_form(&self, beta: &DVector<f64>) -> f64 {
        let coords = self.eigvecs.tr_mul(beta);
        let low_rank: f64 = coords
            .iter()
            .zip(self.eigvals.iter())
            .map(|(c, l)| c * c * (l - self.sigma2_hat))
            .sum();
        self.sigma2_hat * beta.norm_squared() + low_rank
    }

    /// Full spectrum, descending: `λ₁ … λ_r` then `σ̂²` repeated `p − r` times.
    pub fn spectrum(&self) -> DVector<f64> {
        let p = self.dim();
        DVector::from_iterator(
            p,
            self.eigvals
                .iter()
                .copied()
                .chain(std::iter::repeat_n(self.sigma2_hat, p - self.rank())),
        )
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let p = self.dim();
        let scaled = DMatrix::from_fn(p, self.rank(), |i, k| {
            self.eigvecs[(i, k)] * (self.eigvals[k] - self.sigma2_hat)
        });
        let m = DMatrix::identity(p, p) * self.sigma2_hat + scaled * self.eigvecs.transpose();
        crate::linalg::symmetrize(m)
    }
}
