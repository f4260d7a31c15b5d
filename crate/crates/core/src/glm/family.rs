use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Natural parameters above this are clamped before exponentiating (Poisson).
pub const POISSON_CLAMP: f64 = 700.0;

/// Exponential-family cumulant function `φ` defining a GLM.
///
/// The negative log-likelihood of one observation is `φ(z) - y z` with
/// `z = ⟨x, β⟩`. Derivatives up to order four are available; the Stein
/// curvature estimate needs orders two and four.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CumulantFamily {
    /// `φ(z) = ln(1 + eᶻ)`, labels in {0, 1}.
    Logistic,
    /// `φ(z) = z²`.
    LeastSquares,
    /// `φ(z) = eᶻ`. Not covered by the bounded-derivative convergence theory.
    Poisson,
}

/// Numerically stable logistic sigmoid.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl CumulantFamily {
    pub const ALL: [CumulantFamily; 3] = [
        CumulantFamily::Logistic,
        CumulantFamily::LeastSquares,
        CumulantFamily::Poisson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CumulantFamily::Logistic => "logistic",
            CumulantFamily::LeastSquares => "least_squares",
            CumulantFamily::Poisson => "poisson",
        }
    }

    /// Whether the family satisfies the bounded-derivative assumptions behind
    /// the composite convergence guarantees.
    pub fn within_theory(self) -> bool {
        !matches!(self, CumulantFamily::Poisson)
    }

    /// `φ(z)`.
    pub fn phi(self, z: f64) -> f64 {
        match self {
            CumulantFamily::Logistic => softplus(z),
            CumulantFamily::LeastSquares => z * z,
            CumulantFamily::Poisson => z.min(POISSON_CLAMP).exp(),
        }
    }

    /// `φ'(z)`, the mean function.
    pub fn d1(self, z: f64) -> f64 {
        match self {
            CumulantFamily::Logistic => sigmoid(z),
            CumulantFamily::LeastSquares => 2.0 * z,
            CumulantFamily::Poisson => z.min(POISSON_CLAMP).exp(),
        }
    }

    /// `φ''(z)`.
    pub fn d2(self, z: f64) -> f64 {
        match self {
            CumulantFamily::Logistic => sigmoid(z) * sigmoid(-z),
            CumulantFamily::LeastSquares => 2.0,
            CumulantFamily::Poisson => z.min(POISSON_CLAMP).exp(),
        }
    }

    /// `φ'''(z)`.
    pub fn d3(self, z: f64) -> f64 {
        match self {
            CumulantFamily::Logistic => {
                let (s, c) = (sigmoid(z), sigmoid(-z));
                // 1 - 2s == c - s without cancellation in either tail
                s * c * (c - s)
            }
            CumulantFamily::LeastSquares => 0.0,
            CumulantFamily::Poisson => z.min(POISSON_CLAMP).exp(),
        }
    }

    /// `φ''''(z)`.
    pub fn d4(self, z: f64) -> f64 {
        match self {
            CumulantFamily::Logistic => {
                let v = sigmoid(z) * sigmoid(-z);
                // 1 - 6s + 6s² == 1 - 6 s (1 - s)
                v * (1.0 - 6.0 * v)
            }
            CumulantFamily::LeastSquares => 0.0,
            CumulantFamily::Poisson => z.min(POISSON_CLAMP).exp(),
        }
    }

    /// Derivative of order `k` in `0..=4`.
    ///
    /// # Panics
    /// If `k > 4`.
    pub fn derivative(self, k: u8, z: f64) -> f64 {
        match k {
            0 => self.phi(z),
            1 => self.d1(z),
            2 => self.d2(z),
            3 => self.d3(z),
            4 => self.d4(z),
            _ => panic!("cumulant derivative of order {k} is not available"),
        }
    }
}

impl fmt::Display for CumulantFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CumulantFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "logistic" | "lr" => Ok(CumulantFamily::Logistic),
            "least_squares" | "ls" | "ols" => Ok(CumulantFamily::LeastSquares),
            "poisson" => Ok(CumulantFamily::Poisson),
            other => Err(format!("unknown family `{other}`")),
        }
    }
}
