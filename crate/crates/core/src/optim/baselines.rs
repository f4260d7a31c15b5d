use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::driver::{self, State, UpdateRule};
use super::{IterationTrace, Method, OptimizerConfig, RunParameters};
use crate::error::{check_dim, Error, Result};
use crate::glm::{CumulantFamily, Dataset, Glm};
use crate::linalg;

const ARMIJO_C: f64 = 1e-4;
const ARMIJO_MAX_HALVINGS: usize = 60;
/// Hessians with a larger condition number are treated as singular.
const MAX_CONDITION: f64 = 1e15;

/// `λ_max(∇²ℓ(β))`, the local smoothness constant.
pub fn max_curvature(glm: &Glm<'_>, beta: &DVector<f64>) -> Result<f64> {
    let h = glm.hessian(beta)?;
    Ok(linalg::sym_max_eigenvalue(&h))
}

struct Newton {
    gamma: f64,
}

impl UpdateRule for Newton {
    fn propose(&mut self, glm: &Glm<'_>, state: &State, _t: usize, _w: &mut Vec<String>) -> Result<DVector<f64>> {
        let h = glm.hessian_at(&state.z)?;
        let step = solve_spd(h, &state.grad)?;
        Ok(&state.beta - step * self.gamma)
    }
}

fn solve_spd(h: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let eig = linalg::sym_eigenvalues_desc(&h);
    let (max, min) = (eig[0], eig[eig.len() - 1]);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition < MAX_CONDITION) {
        return Err(Error::SingularHessian { condition });
    }
    match h.cholesky() {
        Some(c) => Ok(c.solve(rhs)),
        None => Err(Error::SingularHessian { condition }),
    }
}

struct GradientDescent {
    gamma: f64,
}

impl UpdateRule for GradientDescent {
    fn propose(&mut self, _glm: &Glm<'_>, state: &State, _t: usize, _w: &mut Vec<String>) -> Result<DVector<f64>> {
        Ok(&state.beta - &state.grad * self.gamma)
    }
}

/// Nesterov's accelerated gradient with the `(t − 1)/(t + 2)` momentum
/// schedule.
struct Nesterov {
    gamma: f64,
    previous: Option<DVector<f64>>,
}

impl UpdateRule for Nesterov {
    fn propose(&mut self, glm: &Glm<'_>, state: &State, t: usize, _w: &mut Vec<String>) -> Result<DVector<f64>> {
        let momentum = (t as f64 - 1.0) / (t as f64 + 2.0);
        let lookahead = match &self.previous {
            Some(prev) => &state.beta + (&state.beta - prev) * momentum,
            None => state.beta.clone(),
        };
        let g = glm.gradient(&lookahead)?;
        Ok(lookahead - g * self.gamma)
    }

    fn observe(&mut self, prev: &State, _next: &State) {
        self.previous = Some(prev.beta.clone());
    }
}

/// Dense BFGS inverse-Hessian approximation `H ≈ (∇²ℓ)⁻¹`.
///
/// After [`BfgsInverse::update`] with a pair `(s, y)` the secant equation
/// `H y = s` holds.
#[derive(Clone, Debug)]
pub struct BfgsInverse {
    h: DMatrix<f64>,
    initial_scale: f64,
    updates: usize,
}

impl BfgsInverse {
    /// Starts from `scale · I`.
    pub fn new(p: usize, scale: f64) -> Self {
        Self { h: DMatrix::identity(p, p) * scale, initial_scale: scale, updates: 0 }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.h * v
    }

    pub fn reset(&mut self) {
        let p = self.h.nrows();
        self.h = DMatrix::identity(p, p) * self.initial_scale;
        self.updates = 0;
    }

    /// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ` with `ρ = 1/(yᵀs)`.
    ///
    /// Skips the pair (returns `false`) when the curvature condition
    /// `yᵀs > 0` fails numerically. Before the first accepted update the
    /// initial matrix is rescaled to `(yᵀs / yᵀy) I`.
    pub fn update(&mut self, s: &DVector<f64>, y: &DVector<f64>) -> bool {
        let sy = s.dot(y);
        if !(sy > 1e-12 * s.norm() * y.norm()) || !sy.is_finite() {
            return false;
        }
        let p = self.h.nrows();
        if self.updates == 0 {
            self.h = DMatrix::identity(p, p) * (sy / y.norm_squared());
        }
        let rho = 1.0 / sy;
        let hy = &self.h * y;
        let yhy = y.dot(&hy);
        // expanded form of the product update
        let mut h = self.h.clone();
        h.ger(-rho, &hy, s, 1.0);
        h.ger(-rho, s, &hy, 1.0);
        h.ger(rho * rho * yhy + rho, s, s, 1.0);
        self.h = linalg::symmetrize(h);
        self.updates += 1;
        true
    }
}

fn armijo(glm: &Glm<'_>, state: &State, direction: &DVector<f64>, gamma: f64) -> Result<f64> {
    let slope = state.grad.dot(direction);
    let mut step = gamma;
    for _ in 0..ARMIJO_MAX_HALVINGS {
        let trial = &state.beta - direction * step;
        match glm.objective(&trial) {
            Ok(v) if v <= state.objective - ARMIJO_C * step * slope => return Ok(step),
            Ok(_) | Err(Error::NonFinite(_)) => step *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Ok(step)
}

struct Bfgs {
    gamma: f64,
    inverse: BfgsInverse,
    line_search: bool,
    fallback_scale: f64,
}

impl UpdateRule for Bfgs {
    fn propose(&mut self, glm: &Glm<'_>, state: &State, _t: usize, warnings: &mut Vec<String>) -> Result<DVector<f64>> {
        let mut direction = self.inverse.apply(&state.grad);
        if self.line_search && !(state.grad.dot(&direction) > 0.0) {
            warnings.push("BFGS direction is not a descent direction; resetting".into());
            self.inverse.reset();
            direction = &state.grad * self.fallback_scale;
        }
        let step = if self.line_search { armijo(glm, state, &direction, self.gamma)? } else { self.gamma };
        Ok(&state.beta - direction * step)
    }

    fn observe(&mut self, prev: &State, next: &State) {
        self.inverse.update(&(&next.beta - &prev.beta), &(&next.grad - &prev.grad));
    }
}

struct Lbfgs {
    gamma: f64,
    memory: usize,
    pairs: VecDeque<(DVector<f64>, DVector<f64>, f64)>,
    line_search: bool,
    fallback_scale: f64,
}

impl Lbfgs {
    /// Two-loop recursion for `H g`.
    fn direction(&self, grad: &DVector<f64>) -> DVector<f64> {
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * s.dot(&q);
            q.axpy(-a, y, 1.0);
            alphas.push(a);
        }
        let scale = match self.pairs.back() {
            Some((s, y, _)) => s.dot(y) / y.norm_squared(),
            None => self.fallback_scale,
        };
        let mut r = q * scale;
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * y.dot(&r);
            r.axpy(a - b, s, 1.0);
        }
        r
    }
}

impl UpdateRule for Lbfgs {
    fn propose(&mut self, glm: &Glm<'_>, state: &State, _t: usize, warnings: &mut Vec<String>) -> Result<DVector<f64>> {
        let mut direction = self.direction(&state.grad);
        if self.line_search && !(state.grad.dot(&direction) > 0.0) {
            warnings.push("L-BFGS direction is not a descent direction; clearing memory".into());
            self.pairs.clear();
            direction = &state.grad * self.fallback_scale;
        }
        let step = if self.line_search { armijo(glm, state, &direction, self.gamma)? } else { self.gamma };
        Ok(&state.beta - direction * step)
    }

    fn observe(&mut self, prev: &State, next: &State) {
        let s = &next.beta - &prev.beta;
        let y = &next.grad - &prev.grad;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() && sy.is_finite() {
            if self.pairs.len() == self.memory {
                self.pairs.pop_front();
            }
            self.pairs.push_back((s, y, 1.0 / sy));
        }
    }
}

/// Runs one of the baseline methods (Newton, GD, AGD, BFGS, L-BFGS) with a
/// constant step size.
pub fn baseline_optimize(
    data: &Dataset,
    family: CumulantFamily,
    beta0: &DVector<f64>,
    cfg: &OptimizerConfig,
) -> Result<IterationTrace> {
    let (n, p) = (data.n(), data.p());
    check_dim(p, beta0.len())?;
    cfg.validate(n, p)?;
    data.check_family(family)?;
    let started = Instant::now();
    let glm = Glm::new(data, family);
    let mut warnings = Vec::new();
    if !family.within_theory() {
        warnings.push(format!("family {family} is outside the convergence guarantees"));
    }
    // 1/L̂ scale used by GD/AGD steps and the quasi-Newton initial matrices
    let inverse_smoothness = || -> Result<f64> {
        let l = max_curvature(&glm, beta0)?;
        if l > 0.0 && l.is_finite() {
            Ok(1.0 / l)
        } else {
            Err(Error::Degenerate(format!("hessian at the start has lambda_max = {l:e}")))
        }
    };
    let params = |gamma: f64| RunParameters { gamma: Some(gamma), ..RunParameters::default() };
    match cfg.method {
        Method::Newst => Err(Error::InvalidArgument("use newst_optimize for the Newton-Stein method".into())),
        Method::Newton => {
            let gamma = cfg.gamma.unwrap_or(1.0);
            driver::run(&glm, beta0, cfg, Method::Newton, params(gamma), warnings, started, &mut Newton { gamma })
        }
        Method::Gd => {
            let gamma = match cfg.gamma {
                Some(g) => g,
                None => inverse_smoothness()?,
            };
            let mut rule = GradientDescent { gamma };
            driver::run(&glm, beta0, cfg, Method::Gd, params(gamma), warnings, started, &mut rule)
        }
        Method::Agd => {
            let gamma = match cfg.gamma {
                Some(g) => g,
                None => inverse_smoothness()?,
            };
            let mut rule = Nesterov { gamma, previous: None };
            driver::run(&glm, beta0, cfg, Method::Agd, params(gamma), warnings, started, &mut rule)
        }
        Method::Bfgs => {
            let gamma = cfg.gamma.unwrap_or(1.0);
            let scale = inverse_smoothness()?;
            let mut rule = Bfgs { gamma, inverse: BfgsInverse::new(p, scale), line_search: cfg.line_search, fallback_scale: scale };
            driver::run(&glm, beta0, cfg, Method::Bfgs, params(gamma), warnings, started, &mut rule)
        }
        Method::Lbfgs => {
            let gamma = cfg.gamma.unwrap_or(1.0);
            let scale = inverse_smoothness()?;
            let mut rule = Lbfgs {
                gamma,
                memory: cfg.lbfgs_memory,
                pairs: VecDeque::with_capacity(cfg.lbfgs_memory),
                line_search: cfg.line_search,
                fallback_scale: scale,
            };
            driver::run(&glm, beta0, cfg, Method::Lbfgs, params(gamma), warnings, started, &mut rule)
        }
    }
}
