use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::Dataset;

/// Per-column affine transform `x ↦ (x − mean) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    /// Applies the stored transform to another dataset with the same columns.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        crate::error::check_dim(self.mean.len(), data.p())?;
        let mut x = data.x().clone();
        for (j, mut col) in x.column_iter_mut().enumerate() {
            let (m, s) = (self.mean[j], self.scale[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        rebuild(data, x)
    }
}

fn rebuild(data: &Dataset, x: nalgebra::DMatrix<f64>) -> Result<Dataset> {
    let d = Dataset::new(x, data.y().clone())?;
    match data.feature_names() {
        Some(names) => d.with_feature_names(names.to_vec()),
        None => Ok(d),
    }
}

#[derive(Clone, Debug)]
pub struct Standardized {
    pub dataset: Dataset,
    pub transform: Standardization,
    pub warnings: Vec<String>,
}

/// Centers each column and divides by its sample standard deviation
/// (`n − 1` denominator). Constant columns are only centered.
pub fn standardize(data: &Dataset) -> Result<Standardized> {
    let n = data.n();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let x = data.x();
    let mut mean = Vec::with_capacity(data.p());
    let mut scale = Vec::with_capacity(data.p());
    let mut warnings = Vec::new();
    for (j, col) in x.column_iter().enumerate() {
        let m = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        let s = if sd > 0.0 && sd.is_finite() {
            sd
        } else {
            let name = data.feature_names().map_or_else(|| format!("{j}"), |names| names[j].clone());
            let msg = format!("column {name} has zero variance; centered but not scaled");
            log::warn!("{msg}");
            warnings.push(msg);
            1.0
        };
        mean.push(m);
        scale.push(s);
    }
    let transform = Standardization { mean, scale };
    let dataset = transform.apply(data)?;
    Ok(Standardized { dataset, transform, warnings })
}

/// Column means and `n − 1` standard deviations.
pub fn column_moments(data: &Dataset) -> (DVector<f64>, DVector<f64>) {
    let n = data.n() as f64;
    let x = data.x();
    let mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
    let sd = DVector::from_iterator(
        x.ncols(),
        x.column_iter().zip(mean.iter()).map(|(c, m)| (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()),
    );
    (mean, sd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, j| rng.random_range(-5.0..5.0) * (j + 1) as f64 + 3.0);
        Dataset::new(x, DVector::zeros(n)).unwrap()
    }

    #[test]
    fn moments_after_standardizing() {
        let s = standardize(&random(300, 6, 1)).unwrap();
        let (mean, sd) = column_moments(&s.dataset);
        assert!(mean.amax() < 1e-12);
        assert!(sd.iter().all(|v| (v - 1.0).abs() < 1e-9));
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn idempotent() {
        let once = standardize(&random(100, 4, 2)).unwrap().dataset;
        let twice = standardize(&once).unwrap().dataset;
        assert!((once.x() - twice.x()).amax() < 1e-12);
    }

    #[test]
    fn constant_column_warns() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        let s = standardize(&Dataset::new(x, DVector::zeros(3)).unwrap()).unwrap();
        assert_eq!(s.transform.scale[1], 1.0);
        assert_eq!(s.warnings.len(), 1);
        assert!(s.dataset.x().column(1).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn needs_two_rows() {
        let d = Dataset::new(DMatrix::from_element(1, 2, 1.0), DVector::zeros(1)).unwrap();
        assert!(matches!(standardize(&d), Err(Error::TooFewPoints { .. })));
    }
}
