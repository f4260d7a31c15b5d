use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ThresholdedCovariance;
use crate::error::{Error, Result};
use crate::glm::Dataset;
use crate::linalg;

/// Second-moment matrix `Σ̂_S = (1/|S|) Σ_{i∈S} xᵢ xᵢᵀ` of a row sub-sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleCovariance {
    matrix: DMatrix<f64>,
    sample_count: usize,
}

impl SampleCovariance {
    /// Wraps an existing symmetric matrix.
    pub fn from_matrix(matrix: DMatrix<f64>, sample_count: usize) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidArgument("covariance must be a nonempty square matrix".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariance"));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        if (&matrix - matrix.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidArgument("covariance must be symmetric".into()));
        }
        Ok(Self { matrix: linalg::symmetrize(matrix), sample_count })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Full eigen-decomposition, eigenvalues descending.
    pub fn spectrum(&self) -> CovarianceSpectrum {
        let (values, vectors) = linalg::sym_eigen_desc(&self.matrix);
        let norm = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        CovarianceSpectrum { values, vectors, norm, source: self.matrix.clone() }
    }
}

/// Eigenpairs of a [`SampleCovariance`], sorted by decreasing eigenvalue.
#[derive(Clone, Debug)]
pub struct CovarianceSpectrum {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    norm: f64,
    source: DMatrix<f64>,
}

impl CovarianceSpectrum {
    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Keeps the top `rank` eigenpairs and flattens the rest to `λ_{rank+1}`.
    pub fn threshold(&self, rank: usize) -> Result<ThresholdedCovariance> {
        let p = self.values.len();
        if rank + 1 > p {
            return Err(Error::InvalidArgument(format!(
                "rank {rank} must be below the dimension {p}"
            )));
        }
        // residual of every eigenpair the thresholded operator depends on
        let tol = 1e-8 * self.norm.max(f64::MIN_POSITIVE);
        for k in 0..=rank {
            let u = self.vectors.column(k);
            let residual = (&self.source * u - u * self.values[k]).norm();
            if residual > tol {
                return Err(Error::InvalidArgument(format!(
                    "eigenpair {k} residual {residual:e} exceeds {tol:e}"
                )));
            }
        }
        let sigma2_hat = self.values[rank];
        if !(sigma2_hat > 1e-12) {
            return Err(Error::DegenerateSpectrum { sigma2_hat });
        }
        let eigvals = self.values.rows(0, rank).into_owned();
        let eigvecs = self.vectors.columns(0, rank).into_owned();
        ThresholdedCovariance::new(sigma2_hat, eigvals, eigvecs)
    }
}

/// Draws `sample_size` distinct rows uniformly (seeded) and returns their
/// second-moment matrix normalized by `1/|S|`.
pub fn subsample_covariance(data: &Dataset, sample_size: usize, seed: u64) -> Result<SampleCovariance> {
    let n = data.n();
    if sample_size == 0 || sample_size > n {
        return Err(Error::InvalidArgument(format!(
            "sample size {sample_size} must lie in 1..={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = rand::seq::index::sample(&mut rng, n, sample_size).into_vec();
    rows.sort_unstable();
    let xs = data.x().select_rows(rows.iter());
    let m = xs.tr_mul(&xs) / sample_size as f64;
    Ok(SampleCovariance { matrix: linalg::symmetrize(m), sample_count: sample_size })
}

/// Eigen-thresholds a covariance: `ζ_r(Σ̂) = σ̂² I + Σ_{i≤r} (λᵢ − σ̂²) uᵢuᵢᵀ`
/// with `σ̂² = λ_{r+1}`.
pub fn eigen_threshold(cov: &SampleCovariance, rank: usize) -> Result<ThresholdedCovariance> {
    cov.spectrum().threshold(rank)
}
