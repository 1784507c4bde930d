//! Hölder-smooth test functions on `[0, 1]` with analytic derivatives and
//! certified Hölder radii.
//!
//! For smoothness `beta` the derivatives `f^(r)`, `0 <= r < beta`, are used;
//! the top one (`r = ceil(beta) - 1`) carries a Hölder seminorm of exponent
//! `beta - r`, which lies in `(0, 1]`. The radius is
//! `K = sum_{r < beta} ||f^(r)||_inf + |f^(top)|_{beta - top}`.

use std::f64::consts::{E, PI};

use crate::error::{Error, Result};
use crate::par::{self, Parallelism};

/// Number of derivative orders `r` with `0 <= r < beta`.
pub fn derivative_count(beta: f64) -> usize {
    assert!(beta > 0.0, "smoothness must be positive");
    beta.ceil() as usize
}

/// Exponent of the Hölder seminorm on the top derivative.
pub fn holder_exponent(beta: f64) -> f64 {
    beta - (derivative_count(beta) - 1) as f64
}

/// A function on `[0, 1]` together with its derivatives and smoothness
/// class `C^beta(K)`.
pub trait SmoothFunction: Send + Sync {
    fn label(&self) -> String;
    fn beta(&self) -> f64;
    /// Hölder radius `K` with `f` in `C^beta(K)`.
    fn holder_radius(&self) -> f64;
    /// `f^(r)(x)` for any order `r`.
    fn derivative(&self, r: usize, x: f64) -> f64;

    fn value(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }

    /// `[f(a), f'(a), ..., f^(ceil(beta)-1)(a)]`.
    fn derivatives(&self, a: f64) -> Vec<f64> {
        (0..derivative_count(self.beta()))
            .map(|r| self.derivative(r, a))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionKind {
    /// Coefficients in ascending powers of `x`.
    Polynomial(Vec<f64>),
    /// `sin(2 pi freq x)`.
    Sine { freq: f64 },
    Exp,
    /// `sum_{j < terms} 2^(-j beta) cos(2^j pi x)`: smoothness exactly
    /// `beta` down to scale `2^-terms`.
    Weierstrass { terms: usize },
    /// `|x - center|^beta`: smoothness exactly `beta` at the cusp, for
    /// integer `beta` as well.
    Cusp { center: f64 },
}

/// One of the built-in functions at a chosen smoothness level.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    kind: FunctionKind,
    beta: f64,
    radius: f64,
}

/// `sup |g(x) - g(y)| / |x - y|^alpha` for `|g'| <= lip` and
/// `sup g - inf g <= osc`, via `min(lip h, osc) <= (lip h)^alpha osc^(1-alpha)`.
fn seminorm_bound(lip: f64, osc: f64, alpha: f64) -> f64 {
    if alpha >= 1.0 {
        lip
    } else {
        lip.powf(alpha) * osc.powf(1.0 - alpha)
    }
}

fn falling_factorial(j: usize, r: usize) -> f64 {
    (j + 1 - r..=j).map(|i| i as f64).product()
}

/// `b (b - 1) ... (b - r + 1)` for real `b`.
fn falling_factorial_real(b: f64, r: usize) -> f64 {
    (0..r).map(|i| b - i as f64).product()
}

impl TestFunction {
    pub fn new(kind: FunctionKind, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive, got {beta}")));
        }
        match &kind {
            FunctionKind::Sine { freq } if !(freq.is_finite() && *freq > 0.0) => {
                return Err(Error::invalid("sine frequency must be positive"));
            }
            FunctionKind::Weierstrass { terms: 0 } => {
                return Err(Error::invalid("Weierstrass sum needs at least one term"));
            }
            FunctionKind::Polynomial(c) if c.iter().any(|x| !x.is_finite()) => {
                return Err(Error::invalid("polynomial coefficients must be finite"));
            }
            FunctionKind::Cusp { center } if !(0.0..=1.0).contains(center) => {
                return Err(Error::invalid("cusp center must lie in [0, 1]"));
            }
            _ => {}
        }
        let mut f = TestFunction { kind, beta, radius: 0.0 };
        f.radius = f.analytic_radius();
        Ok(f)
    }

    pub fn polynomial(coeffs: Vec<f64>, beta: f64) -> Result<Self> {
        Self::new(FunctionKind::Polynomial(coeffs), beta)
    }

    pub fn sine(freq: f64, beta: f64) -> Result<Self> {
        Self::new(FunctionKind::Sine { freq }, beta)
    }

    pub fn exp(beta: f64) -> Result<Self> {
        Self::new(FunctionKind::Exp, beta)
    }

    pub fn weierstrass(terms: usize, beta: f64) -> Result<Self> {
        Self::new(FunctionKind::Weierstrass { terms }, beta)
    }

    pub fn cusp(center: f64, beta: f64) -> Result<Self> {
        Self::new(FunctionKind::Cusp { center }, beta)
    }

    /// Built-in by name: `poly`, `sin`, `exp`, `weierstrass`, `cusp`.
    pub fn by_name(name: &str, beta: f64) -> Result<Self> {
        match name {
            "poly" => Self::polynomial(default_polynomial(), beta),
            "sin" => Self::sine(1.0, beta),
            "exp" => Self::exp(beta),
            "weierstrass" => Self::weierstrass(12, beta),
            "cusp" => Self::cusp(1.0 / 3.0, beta),
            other => Err(Error::invalid(format!(
                "unknown function {other:?} (expected poly, sin, exp, weierstrass, cusp)"
            ))),
        }
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    /// Upper bound on `||f^(r)||_inf` over `[0, 1]`.
    pub fn sup_bound(&self, r: usize) -> f64 {
        match &self.kind {
            FunctionKind::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(r)
                .map(|(j, cj)| cj.abs() * falling_factorial(j, r))
                .sum(),
            FunctionKind::Sine { freq } => (2.0 * PI * freq).powi(r as i32),
            FunctionKind::Exp => E,
            FunctionKind::Weierstrass { terms } => (0..*terms)
                .map(|j| {
                    let w = 2f64.powi(j as i32) * PI;
                    2f64.powf(-(j as f64) * self.beta) * w.powi(r as i32)
                })
                .sum(),
            FunctionKind::Cusp { center } => {
                let exponent = self.beta - r as f64;
                if exponent < 0.0 {
                    f64::INFINITY
                } else {
                    falling_factorial_real(self.beta, r).abs() * center.max(1.0 - center).powf(exponent)
                }
            }
        }
    }

    fn analytic_radius(&self) -> f64 {
        let count = derivative_count(self.beta);
        let top = count - 1;
        let alpha = holder_exponent(self.beta);
        let sups: f64 = (0..count).map(|r| self.sup_bound(r)).sum();
        let seminorm = match &self.kind {
            FunctionKind::Exp => seminorm_bound(E, E - 1.0, alpha),
            FunctionKind::Weierstrass { terms } => (0..*terms)
                .map(|j| {
                    let w = 2f64.powi(j as i32) * PI;
                    let a = 2f64.powf(-(j as f64) * self.beta) * w.powi(top as i32);
                    seminorm_bound(a * w, 2.0 * a, alpha)
                })
                .sum(),
            // x^alpha is alpha-Hölder with constant 1; an odd reflection
            // costs at most 2^(1 - alpha)
            FunctionKind::Cusp { .. } => {
                let reflection = if top % 2 == 0 { 1.0 } else { 2f64.powf(1.0 - alpha) };
                falling_factorial_real(self.beta, top).abs() * reflection
            }
            _ => seminorm_bound(self.sup_bound(top + 1), 2.0 * self.sup_bound(top), alpha),
        };
        sups + seminorm
    }
}

/// `0.5 - x + 0.75 x^2 + 0.5 x^3 - 0.25 x^4 + 0.2 x^5`.
pub fn default_polynomial() -> Vec<f64> {
    vec![0.5, -1.0, 0.75, 0.5, -0.25, 0.2]
}

impl SmoothFunction for TestFunction {
    fn label(&self) -> String {
        match &self.kind {
            FunctionKind::Polynomial(c) => format!("poly{c:?}"),
            FunctionKind::Sine { freq } => format!("sin(2pi*{freq}x)"),
            FunctionKind::Exp => "exp".into(),
            FunctionKind::Weierstrass { terms } => format!("weierstrass[{terms}]"),
            FunctionKind::Cusp { center } => format!("|x-{center}|^{}", self.beta),
        }
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn holder_radius(&self) -> f64 {
        self.radius
    }

    fn derivative(&self, r: usize, x: f64) -> f64 {
        let phase = r as f64 * PI / 2.0;
        match &self.kind {
            FunctionKind::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(r)
                .rev()
                .fold(0.0, |acc, (j, cj)| acc * x + cj * falling_factorial(j, r)),
            FunctionKind::Sine { freq } => {
                let w = 2.0 * PI * freq;
                w.powi(r as i32) * (w * x + phase).sin()
            }
            FunctionKind::Exp => x.exp(),
            FunctionKind::Weierstrass { terms } => (0..*terms)
                .map(|j| {
                    let w = 2f64.powi(j as i32) * PI;
                    2f64.powf(-(j as f64) * self.beta) * w.powi(r as i32) * (w * x + phase).cos()
                })
                .sum(),
            FunctionKind::Cusp { center } => {
                let t = x - center;
                let sign = if r % 2 == 1 { t.signum() } else { 1.0 };
                falling_factorial_real(self.beta, r) * t.abs().powf(self.beta - r as f64) * sign
            }
        }
    }
}

/// Grid estimate of `sum_{r<beta} ||f^(r)|| + |f^(top)|_alpha`; a lower
/// bound on the true norm, for spot-checking a claimed radius.
pub fn estimate_holder_norm(f: &dyn SmoothFunction, grid: usize, mode: Parallelism) -> f64 {
    let xs = par::unit_grid(grid);
    let count = derivative_count(f.beta());
    let alpha = holder_exponent(f.beta());
    let sups: f64 = (0..count)
        .map(|r| par::max_over(mode, grid, |i| f.derivative(r, xs[i]).abs()))
        .sum();
    let top: Vec<f64> = xs.iter().map(|&x| f.derivative(count - 1, x)).collect();
    // pairs at every lag on a coarser subgrid keep this O(grid * lags)
    let lags: Vec<usize> = (0..)
        .map(|k| 1usize << k)
        .take_while(|&l| l < grid)
        .collect();
    let quotient = par::map(mode, &lags, |&lag| {
        let h = lag as f64 / (grid - 1) as f64;
        (0..grid - lag)
            .map(|i| (top[i + lag] - top[i]).abs() / h.powf(alpha))
            .fold(0.0, f64::max)
    })
    .into_iter()
    .fold(0.0, f64::max);
    sups + quotient
}
