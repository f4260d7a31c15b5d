use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{sigmoid, CumulantFamily, Dataset};

/// Largest natural parameter used when drawing Poisson responses.
const POISSON_RATE_CLAMP: f64 = 30.0;

/// Spiked covariance model `Σ = σ² I + Σᵢ θᵢ uᵢ uᵢᵀ` with Gaussian rows and
/// GLM responses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikedModelSpec {
    pub n: usize,
    pub p: usize,
    /// Spike magnitudes, descending and positive; `r = theta.len()`.
    pub theta: Vec<f64>,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default)]
    pub seed: u64,
    pub family: CumulantFamily,
    /// Coefficients generating the responses. Drawn uniformly on the sphere
    /// of radius `beta_norm` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_true: Option<Vec<f64>>,
    #[serde(default = "default_beta_norm")]
    pub beta_norm: f64,
}

fn default_sigma2() -> f64 {
    1.0
}

fn default_beta_norm() -> f64 {
    1.0
}

/// `r` spikes log-spaced from 100 down to 10.
pub fn default_spikes(r: usize) -> Vec<f64> {
    match r {
        0 => Vec::new(),
        1 => vec![100.0],
        _ => (0..r).map(|i| 100.0 * 0.1f64.powf(i as f64 / (r - 1) as f64)).collect(),
    }
}

impl SpikedModelSpec {
    pub fn new(n: usize, p: usize, r: usize, family: CumulantFamily, seed: u64) -> Self {
        Self {
            n,
            p,
            theta: default_spikes(r),
            sigma2: 1.0,
            seed,
            family,
            beta_true: None,
            beta_norm: 1.0,
        }
    }

    pub fn r(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidArgument(m));
        if self.n == 0 || self.p == 0 {
            return invalid(format!("spiked model needs n, p >= 1 (got n={}, p={})", self.n, self.p));
        }
        if self.r() >= self.p {
            return invalid(format!("number of spikes {} must be below p = {}", self.r(), self.p));
        }
        if self.theta.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return invalid("spike magnitudes must be positive and finite".into());
        }
        if self.theta.windows(2).any(|w| w[0] < w[1]) {
            return invalid("spike magnitudes must be in descending order".into());
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return invalid(format!("sigma2 must be positive (got {})", self.sigma2));
        }
        match &self.beta_true {
            Some(b) if b.len() != self.p => return Err(Error::DimensionMismatch { expected: self.p, found: b.len() }),
            Some(b) if b.iter().any(|v| !v.is_finite()) => return Err(Error::NonFinite("beta_true")),
            None if !(self.beta_norm.is_finite() && self.beta_norm >= 0.0) => {
                return invalid(format!("beta_norm must be non-negative (got {})", self.beta_norm))
            }
            _ => {}
        }
        Ok(())
    }

    /// Diagonal of `Λ`: `σ² + θᵢ` for the spikes, then `σ²`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        (0..self.p).map(|i| self.sigma2 + self.theta.get(i).copied().unwrap_or(0.0)).collect()
    }
}

/// A generated dataset together with its ground truth.
#[derive(Clone, Debug)]
pub struct SpikedSample {
    pub dataset: Dataset,
    pub beta_true: DVector<f64>,
    /// Orthogonal `M`; its first `r` columns are the spike directions.
    pub basis: DMatrix<f64>,
    /// Diagonal of `Λ`, descending.
    pub eigenvalues: Vec<f64>,
}

impl SpikedSample {
    /// `Σ = M Λ Mᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.basis.nrows(), self.basis.ncols(), |i, j| self.basis[(i, j)] * self.eigenvalues[j]);
        crate::linalg::symmetrize(&scaled * self.basis.transpose())
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the sign
/// of each column fixed by the diagonal of `R`.
pub fn random_orthogonal<R: Rng>(p: usize, rng: &mut R) -> DMatrix<f64> {
    let g = gaussian_matrix(p, p, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Gaussian matrix filled row by row, so the draw order does not depend on
/// storage layout.
fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let values: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(rows, cols, &values)
}

/// Draws `n` rows `x ~ N(0, M Λ Mᵀ)` and family responses at `⟨x, β_true⟩`.
///
/// Draw order from one seeded stream: `M`, then `β_true` (if not given), then
/// `X` row by row, then the responses.
pub fn generate_spiked(spec: &SpikedModelSpec) -> Result<SpikedSample> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let basis = random_orthogonal(p, &mut rng);
    let beta_true = match &spec.beta_true {
        Some(b) => DVector::from_column_slice(b),
        None => {
            let mut b = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = b.norm();
            if norm > 0.0 {
                b *= spec.beta_norm / norm;
            }
            b
        }
    };
    let eigenvalues = spec.eigenvalues();
    // X = Z diag(√λ) Mᵀ
    let roots: Vec<f64> = eigenvalues.iter().map(|v| v.sqrt()).collect();
    let mixing = DMatrix::from_fn(p, p, |i, j| roots[i] * basis[(j, i)]);
    let x = gaussian_matrix(n, p, &mut rng) * mixing;
    let z = &x * &beta_true;
    let y = draw_responses(spec.family, &z, &mut rng)?;
    let names = (0..p).map(|j| format!("x{j}")).collect();
    let dataset = Dataset::new(x, y)?.with_feature_names(names)?;
    Ok(SpikedSample { dataset, beta_true, basis, eigenvalues })
}

fn draw_responses<R: Rng>(family: CumulantFamily, z: &DVector<f64>, rng: &mut R) -> Result<DVector<f64>> {
    let mut y = DVector::zeros(z.len());
    for (yi, &zi) in y.iter_mut().zip(z.iter()) {
        *yi = match family {
            CumulantFamily::Logistic => {
                let b = Bernoulli::new(sigmoid(zi)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                f64::from(u8::from(b.sample(rng)))
            }
            CumulantFamily::LeastSquares => 2.0 * zi + rng.sample::<f64, _>(StandardNormal),
            CumulantFamily::Poisson => {
                let rate = zi.min(POISSON_RATE_CLAMP).exp();
                if rate <= 0.0 {
                    0.0
                } else {
                    Poisson::new(rate).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(rng)
                }
            }
        };
    }
    Ok(y)
}
