use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Optimization method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Newton-Stein.
    Newst,
    Newton,
    Gd,
    /// Nesterov accelerated gradient.
    Agd,
    Bfgs,
    Lbfgs,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Newst, Method::Newton, Method::Gd, Method::Agd, Method::Bfgs, Method::Lbfgs];

    pub fn name(self) -> &'static str {
        match self {
            Method::Newst => "newst",
            Method::Newton => "newton",
            Method::Gd => "gd",
            Method::Agd => "agd",
            Method::Bfgs => "bfgs",
            Method::Lbfgs => "lbfgs",
        }
    }

    /// Rough floating-point operation count of one iteration.
    ///
    /// Newton-Stein: `np + pr` (gradient plus low-rank scaling). Newton:
    /// `np² + p³` (Hessian plus factorization).
    pub fn flops_per_iteration(self, n: usize, p: usize, rank: usize, memory: usize) -> f64 {
        let (n, p, r, m) = (n as f64, p as f64, rank as f64, memory as f64);
        match self {
            Method::Newst => n * p + p * r,
            Method::Newton => n * p * p + p * p * p,
            Method::Gd => n * p,
            Method::Agd => 2.0 * n * p,
            Method::Bfgs => n * p + p * p,
            Method::Lbfgs => n * p + 4.0 * m * p,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "newst" | "newtonstein" => Ok(Method::Newst),
            "newton" | "nm" => Ok(Method::Newton),
            "gd" => Ok(Method::Gd),
            "agd" | "nesterov" => Ok(Method::Agd),
            "bfgs" => Ok(Method::Bfgs),
            "lbfgs" => Ok(Method::Lbfgs),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// Quantity compared against `tol_eps` to stop.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationRule {
    /// `‖βₜ₊₁ − βₜ‖₂ ≤ ε`.
    #[default]
    StepNorm,
    /// `‖∇ℓ(βₜ)‖₂ ≤ ε`.
    GradNorm,
}

/// Settings shared by every optimizer. `None` fields are filled from the
/// method's defaults at run time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Constant step size. Defaults: Newton-Stein uses the suggested rule,
    /// Newton/BFGS/L-BFGS use 1, GD/AGD use `1/L̂` with `L̂ = λ_max(∇²ℓ(β⁰))`.
    pub gamma: Option<f64>,
    /// Covariance sub-sample size (Newton-Stein); defaults to `⌈p ln p⌉`.
    pub sample_size: Option<usize>,
    /// Thresholding rank (Newton-Stein); defaults to the eigengap suggestion.
    pub rank: Option<usize>,
    pub tol_eps: f64,
    /// Radius of the projection ball.
    pub radius: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub lbfgs_memory: usize,
    /// Redraw the covariance sub-sample every this many iterations (0 = never).
    pub resample_every: usize,
    pub termination: TerminationRule,
    /// Armijo backtracking for BFGS/L-BFGS (c = 1e-4, halving).
    pub line_search: bool,
    /// Constant in the step-size fluctuation correction.
    pub c_fluct: f64,
    /// Keep every iterate `β̂ᵗ` in the trace (costs `O(p)` memory per step).
    pub keep_iterates: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::Newst,
            gamma: None,
            sample_size: None,
            rank: None,
            tol_eps: 1e-8,
            radius: 1e6,
            max_iter: 1000,
            seed: 0,
            lbfgs_memory: 10,
            resample_every: 0,
            termination: TerminationRule::StepNorm,
            line_search: false,
            c_fluct: crate::theory::DEFAULT_C_FLUCT,
            keep_iterates: false,
        }
    }
}

impl OptimizerConfig {
    pub fn for_method(method: Method) -> Self {
        Self { method, ..Self::default() }
    }

    /// Checks the invariants against a problem of size `n × p`.
    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if let Some(g) = self.gamma {
            if !(g > 0.0) || !g.is_finite() {
                return bad(format!("gamma must be positive, got {g}"));
            }
        }
        if !(self.tol_eps > 0.0) {
            return bad(format!("tol_eps must be positive, got {}", self.tol_eps));
        }
        if !(self.radius > 0.0) {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        if let Some(s) = self.sample_size {
            if s == 0 || s > n {
                return bad(format!("sample_size {s} must lie in 1..={n}"));
            }
        }
        if let Some(r) = self.rank {
            if r >= p {
                return bad(format!("rank {r} must be below p = {p}"));
            }
        }
        if self.method == Method::Lbfgs && self.lbfgs_memory == 0 {
            return bad("lbfgs_memory must be positive".into());
        }
        if !(self.c_fluct >= 0.0) {
            return bad(format!("c_fluct must be nonnegative, got {}", self.c_fluct));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        assert!("sgd".parse::<Method>().is_err());
    }

    #[test]
    fn validation() {
        let cfg = OptimizerConfig::default();
        assert!(cfg.validate(100, 10).is_ok());
        assert!(OptimizerConfig { rank: Some(10), ..cfg.clone() }.validate(100, 10).is_err());
        assert!(OptimizerConfig { sample_size: Some(101), ..cfg.clone() }.validate(100, 10).is_err());
        assert!(OptimizerConfig { gamma: Some(0.0), ..cfg.clone() }.validate(100, 10).is_err());
        assert!(OptimizerConfig { tol_eps: 0.0, ..cfg }.validate(100, 10).is_err());
    }

    #[test]
    fn partial_json_uses_defaults() {
        let cfg: OptimizerConfig = serde_json::from_str(r#"{"method":"gd","max_iter":5}"#).unwrap();
        assert_eq!(cfg.method, Method::Gd);
        assert_eq!(cfg.max_iter, 5);
        assert_eq!(cfg.tol_eps, 1e-8);
        assert!(serde_json::from_str::<OptimizerConfig>(r#"{"gama":1}"#).is_err());
    }

    #[test]
    fn flop_ratio_favors_newton_stein() {
        let ns = Method::Newst.flops_per_iteration(50_000, 100, 3, 10);
        let nm = Method::Newton.flops_per_iteration(50_000, 100, 3, 10);
        assert_eq!(ns, 50_000.0 * 100.0 + 300.0);
        assert!(nm / ns > 99.0);
    }
}
