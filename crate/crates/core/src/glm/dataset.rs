use nalgebra::{DMatrix, DVector};

use super::CumulantFamily;
use crate::error::{check_dim, Error, Result};

/// Dense design matrix `X` (n × p) with its response vector `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "dataset needs n >= 1 and p >= 1, got {} x {}",
                x.nrows(),
                x.ncols()
            )));
        }
        check_dim(x.nrows(), y.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response vector"));
        }
        Ok(Self { x, y, feature_names: None })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        check_dim(self.p(), names.len())?;
        self.feature_names = Some(names);
        Ok(self)
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of features.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Checks the response against the family's support.
    pub fn check_family(&self, family: CumulantFamily) -> Result<()> {
        match family {
            CumulantFamily::Logistic => {
                if let Some(i) = self.y.iter().position(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "logistic labels must be 0 or 1; row {i} has {}",
                        self.y[i]
                    )));
                }
            }
            CumulantFamily::Poisson => {
                if let Some(i) = self.y.iter().position(|&v| v < 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "poisson responses must be nonnegative; row {i} has {}",
                        self.y[i]
                    )));
                }
            }
            CumulantFamily::LeastSquares => {}
        }
        Ok(())
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>, Option<Vec<String>>) {
        (self.x, self.y, self.feature_names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(Dataset::new(DMatrix::zeros(0, 2), DVector::zeros(0)).is_err());
        assert!(matches!(
            Dataset::new(DMatrix::zeros(3, 2), DVector::zeros(2)),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn rejects_non_finite_entries() {
        let mut x = DMatrix::zeros(2, 2);
        x[(1, 1)] = f64::NAN;
        assert!(matches!(Dataset::new(x, DVector::zeros(2)), Err(Error::NonFinite(_))));
    }

    #[test]
    fn logistic_labels_are_checked() {
        let d = Dataset::new(DMatrix::identity(2, 2), DVector::from_vec(vec![0.0, -1.0])).unwrap();
        assert!(d.check_family(CumulantFamily::Logistic).is_err());
        assert!(d.check_family(CumulantFamily::LeastSquares).is_ok());
    }
}
