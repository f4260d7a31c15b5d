use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::glm::CumulantFamily;
use crate::linalg;

const BLOCK: usize = 4096;

/// Weighted second moments of Gaussian draws `x ~ N(0, Σ)`.
struct GaussianMoments {
    /// `mean[f(⟨x,β⟩) x xᵀ]`
    weighted: DMatrix<f64>,
    /// `mean[x xᵀ]`
    plain: DMatrix<f64>,
    /// `mean[f(⟨x,β⟩)]`
    mean_f: f64,
    /// `mean[f''(⟨x,β⟩)]`
    mean_f2: f64,
}

fn gaussian_moments<F, G>(
    sigma: &DMatrix<f64>,
    beta: &DVector<f64>,
    f: F,
    f2: G,
    samples: usize,
    seed: u64,
) -> Result<GaussianMoments>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let p = sigma.nrows();
    if !sigma.is_square() {
        return Err(Error::InvalidArgument("covariance must be square".into()));
    }
    check_dim(p, beta.len())?;
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one Monte-Carlo sample".into()));
    }
    let chol = sigma.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let lt = chol.l().transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut weighted = DMatrix::zeros(p, p);
    let mut plain = DMatrix::zeros(p, p);
    let (mut sum_f, mut sum_f2) = (0.0, 0.0);
    let mut remaining = samples;
    while remaining > 0 {
        let rows = remaining.min(BLOCK);
        // row-major fill so the draw order does not depend on the block layout
        let mut z = DMatrix::zeros(rows, p);
        for i in 0..rows {
            for j in 0..p {
                z[(i, j)] = StandardNormal.sample(&mut rng);
            }
        }
        let x = z * &lt;
        let eta = &x * beta;
        let mut xw = x.clone();
        for (mut row, &e) in xw.row_iter_mut().zip(eta.iter()) {
            let w = f(e);
            sum_f += w;
            sum_f2 += f2(e);
            row *= w;
        }
        weighted += x.tr_mul(&xw);
        plain += x.tr_mul(&x);
        remaining -= rows;
    }
    let m = samples as f64;
    Ok(GaussianMoments {
        weighted: linalg::symmetrize(weighted / m),
        plain: linalg::symmetrize(plain / m),
        mean_f: sum_f / m,
        mean_f2: sum_f2 / m,
    })
}

/// Monte-Carlo estimate of `E[f(⟨x,β⟩) x xᵀ]` for `x ~ N(0, Σ)`.
pub fn weighted_second_moment<F>(sigma: &DMatrix<f64>, beta: &DVector<f64>, f: F, samples: usize, seed: u64) -> Result<DMatrix<f64>>
where
    F: Fn(f64) -> f64,
{
    Ok(gaussian_moments(sigma, beta, f, |_| 0.0, samples, seed)?.weighted)
}

/// Relative spectral error of the Stein identity for a general weight `f`:
///
/// ```text
/// ‖ mean[x xᵀ f(⟨x,β⟩)] − (mean[f] Σ + mean[f''] Σ β βᵀ Σ) ‖₂ / ‖ right side ‖₂
/// ```
///
/// with `x ~ N(0, Σ)` drawn `samples` times.
pub fn stein_expectation_check_with<F, G>(
    sigma: &DMatrix<f64>,
    beta: &DVector<f64>,
    f: F,
    f2: G,
    samples: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let m = gaussian_moments(sigma, beta, f, f2, samples, seed)?;
    let sb = sigma * beta;
    let rhs = sigma * m.mean_f + &sb * sb.transpose() * m.mean_f2;
    relative_error(&m.weighted, &rhs)
}

/// Stein identity check with `f = φ''` of a family, so the right side is the
/// population form of the Newton-Stein curvature `μ₂ Σ + μ₄ Σ β βᵀ Σ`.
pub fn stein_expectation_check(
    sigma: &DMatrix<f64>,
    beta: &DVector<f64>,
    family: CumulantFamily,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    stein_expectation_check_with(sigma, beta, |z| family.d2(z), |z| family.d4(z), samples, seed)
}

/// Accuracy of the Stein Hessian estimate on a finite Gaussian sample.
///
/// Draws `samples` rows `x ~ N(0, Σ)` and compares the sample Hessian
/// `(1/m) Σ φ''(⟨xᵢ,β⟩) xᵢxᵢᵀ` with the estimate `μ̂₂ Σ̂ + μ̂₄ Σ̂ β βᵀ Σ̂`
/// built from the same rows (`Σ̂` their second-moment matrix). Returns the
/// relative spectral error with respect to the sample Hessian.
pub fn stein_hessian_accuracy(
    sigma: &DMatrix<f64>,
    beta: &DVector<f64>,
    family: CumulantFamily,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let m = gaussian_moments(sigma, beta, |z| family.d2(z), |z| family.d4(z), samples, seed)?;
    let sb = &m.plain * beta;
    let estimate = &m.plain * m.mean_f + &sb * sb.transpose() * m.mean_f2;
    relative_error(&estimate, &m.weighted)
}

fn relative_error(estimate: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<f64> {
    let denom = linalg::sym_spectral_norm(reference);
    if !(denom > 0.0) {
        return Err(Error::Degenerate("reference matrix has zero norm".into()));
    }
    Ok(linalg::sym_spectral_norm(&(estimate - reference)) / denom)
}
