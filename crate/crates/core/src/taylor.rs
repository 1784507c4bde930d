//! Localized Taylor polynomials on `[0, 1]` and the `sigma`-networks that
//! equal them.
//!
//! `P_M f(x) = sum_l sum_{r < beta} f^(r)(l/M) / r! (x - l/M)^r (1 - M|x - l/M|)_+`.
//! Each product `(x - l/M)^r (1 - M|x - l/M|)_+` is one `sigma` unit with
//! input weight 1 and bias `k_{r,M} - l/M`, where `k_{r,M}` is the piece of
//! `sigma` with `a_k = r` and `b_k = M`; the output weights are the Taylor
//! coefficients.

use std::path::Path;

use crate::activation::{powu, sigma_knot_for};
use crate::error::{Error, Result};
use crate::network::{Activation, ShallowNetwork};
use crate::par::{self, Parallelism};
use crate::smooth::{derivative_count, SmoothFunction};

fn factorial(r: usize) -> f64 {
    (1..=r).map(|i| i as f64).product()
}

/// `sum_r coeffs[r] (x - center)^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTaylor {
    pub center: f64,
    pub coeffs: Vec<f64>,
}

impl LocalTaylor {
    pub fn eval(&self, x: f64) -> f64 {
        let t = x - self.center;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// Coefficients in ascending powers of `x`.
    pub fn monomial_coefficients(&self) -> Vec<f64> {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        for (r, c) in self.coeffs.iter().enumerate() {
            // (x - a)^r = sum_s C(r, s) x^s (-a)^(r-s)
            let mut binom = 1.0;
            for s in 0..=r {
                out[s] += c * binom * (-self.center).powi((r - s) as i32);
                binom = binom * (r - s) as f64 / (s + 1) as f64;
            }
        }
        out
    }
}

pub fn local_taylor(f: &dyn SmoothFunction, a: f64) -> Result<LocalTaylor> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::invalid(format!("expansion point {a} outside [0, 1]")));
    }
    let coeffs = f
        .derivatives(a)
        .into_iter()
        .enumerate()
        .map(|(r, d)| d / factorial(r))
        .collect();
    Ok(LocalTaylor { center: a, coeffs })
}

/// Table of Taylor coefficients `f^(r)(l/M) / r!` at the grid `l/M`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizedTaylor {
    m: usize,
    beta: f64,
    /// `coeffs[l][r]`.
    coeffs: Vec<Vec<f64>>,
}

impl LocalizedTaylor {
    /// Builds from raw derivative values `derivs[l][r] = f^(r)(l/M)`.
    pub fn from_derivatives(m: usize, beta: f64, derivs: Vec<Vec<f64>>) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("M must be at least 1"));
        }
        let count = derivative_count(beta);
        if derivs.len() != m + 1 {
            return Err(Error::DimensionMismatch { expected: m + 1, got: derivs.len() });
        }
        if let Some(row) = derivs.iter().find(|row| row.len() != count) {
            return Err(Error::DimensionMismatch { expected: count, got: row.len() });
        }
        let coeffs = derivs
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .enumerate()
                    .map(|(r, d)| d / factorial(r))
                    .collect()
            })
            .collect();
        Ok(LocalizedTaylor { m, beta, coeffs })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    /// Direct double sum over grid points and orders.
    pub fn eval(&self, x: f64) -> f64 {
        let m = self.m as f64;
        let mut acc = 0.0;
        for (l, row) in self.coeffs.iter().enumerate() {
            let center = l as f64 / m;
            let hat = hat_weight(self.m, l, x);
            if hat == 0.0 {
                continue;
            }
            let t = x - center;
            acc += hat * row.iter().rev().fold(0.0, |s, c| s * t + c);
        }
        acc
    }
}

/// `(1 - M |x - l/M|)_+`.
pub fn hat_weight(m: usize, l: usize, x: f64) -> f64 {
    (1.0 - (m as f64 * x - l as f64).abs()).max(0.0)
}

pub fn localized_taylor(f: &dyn SmoothFunction, m: usize) -> Result<LocalizedTaylor> {
    if m == 0 {
        return Err(Error::invalid("M must be at least 1"));
    }
    let derivs = (0..=m).map(|l| f.derivatives(l as f64 / m as f64)).collect();
    LocalizedTaylor::from_derivatives(m, f.beta(), derivs)
}

/// Reads a CSV derivative table with header `l,r,value` giving
/// `f^(r)(l/M)` for `l = 0..=M`, `0 <= r < beta`.
pub fn read_derivative_table(path: &Path, m: usize, beta: f64) -> Result<LocalizedTaylor> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_derivative_table(&text, m, beta)
}

pub fn parse_derivative_table(text: &str, m: usize, beta: f64) -> Result<LocalizedTaylor> {
    let count = derivative_count(beta);
    let mut derivs: Vec<Vec<Option<f64>>> = vec![vec![None; count]; m + 1];
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Parse("empty derivative table".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["l", "r", "value"] {
        return Err(Error::Parse(format!("expected header l,r,value, got {header:?}")));
    }
    for line in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [l, r, v] = fields[..] else {
            return Err(Error::Parse(format!("bad row {line:?}")));
        };
        let l: usize = l.parse().map_err(|_| Error::Parse(format!("bad l in {line:?}")))?;
        let r: usize = r.parse().map_err(|_| Error::Parse(format!("bad r in {line:?}")))?;
        let v: f64 = v.parse().map_err(|_| Error::Parse(format!("bad value in {line:?}")))?;
        if l > m || r >= count {
            return Err(Error::Parse(format!("row {line:?} outside l <= {m}, r < {count}")));
        }
        derivs[l][r] = Some(v);
    }
    let filled = derivs
        .into_iter()
        .enumerate()
        .map(|(l, row)| {
            row.into_iter()
                .enumerate()
                .map(|(r, v)| v.ok_or_else(|| Error::Parse(format!("missing entry l={l}, r={r}"))))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    LocalizedTaylor::from_derivatives(m, beta, filled)
}

/// The `f`-independent hidden layer: biases `k_{r,M} - l/M` and unit
/// weights, ordered by `l` then `r`.
pub fn fixed_hidden_layer(beta: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1, "M must be at least 1");
    let count = derivative_count(beta);
    let mut v = Vec::with_capacity((m + 1) * count);
    for l in 0..=m {
        for r in 0..count {
            let k = sigma_knot_for(r as u64, m as u64) as f64;
            v.push(k - l as f64 / m as f64);
        }
    }
    let w = vec![1.0; v.len()];
    (v, w)
}

/// `sigma`-network of width `(M+1) ceil(beta)` equal to `taylor` on `[0,1]`.
pub fn sigma_network(taylor: &LocalizedTaylor) -> ShallowNetwork<f64> {
    let (v, w) = fixed_hidden_layer(taylor.beta, taylor.m);
    let u: Vec<f64> = taylor.coeffs.iter().flatten().copied().collect();
    ShallowNetwork::new(Activation::Sigma, u, v, w.into_iter().map(|x| vec![x]).collect())
        .expect("layer sizes agree")
}

pub fn build_sigma_network(f: &dyn SmoothFunction, m: usize) -> Result<ShallowNetwork<f64>> {
    Ok(sigma_network(&localized_taylor(f, m)?))
}

/// Parameter radius `K + (M + ceil(beta) + 1)^2` that every built network
/// respects.
pub fn parameter_radius(k: f64, beta: f64, m: usize) -> f64 {
    k + ((m + derivative_count(beta) + 1) as f64).powi(2)
}

/// `(x - l/M)^r (1 - M|x - l/M|)_+` for every unit `(l, r)`, in network order.
pub fn taylor_features(beta: f64, m: usize, x: f64) -> Vec<f64> {
    let count = derivative_count(beta);
    let mut out = Vec::with_capacity((m + 1) * count);
    for l in 0..=m {
        let t = x - l as f64 / m as f64;
        let hat = hat_weight(m, l, x);
        for r in 0..count {
            out.push(powu(t, r as u64) * hat);
        }
    }
    out
}

/// Largest `|f(x) - g(x)|` over `grid` uniform points of `[0, 1]`.
pub fn sup_error<F, G>(f: F, g: G, grid: usize, mode: Parallelism) -> f64
where
    F: Fn(f64) -> f64 + Sync + Send,
    G: Fn(f64) -> f64 + Sync + Send,
{
    assert!(grid >= 2, "grid needs at least two points");
    let last = (grid - 1) as f64;
    par::max_over(mode, grid, |i| {
        let x = i as f64 / last;
        (f(x) - g(x)).abs()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationRow {
    pub m: usize,
    pub sup_error: f64,
    /// `K M^-beta`.
    pub bound: f64,
}

/// Sup error of `P_M f` against `f` for each `M`, next to its bound.
pub fn approximation_sweep(
    f: &dyn SmoothFunction,
    ms: &[usize],
    grid: usize,
    mode: Parallelism,
) -> Result<Vec<ApproximationRow>> {
    ms.iter()
        .map(|&m| {
            let taylor = localized_taylor(f, m)?;
            Ok(ApproximationRow {
                m,
                sup_error: sup_error(|x| f.value(x), |x| taylor.eval(x), grid, mode),
                bound: f.holder_radius() * (m as f64).powf(-f.beta()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth::TestFunction;
    use std::f64::consts::PI;

    #[test]
    fn local_taylor_examples() {
        let sq = TestFunction::polynomial(vec![0.0, 0.0, 1.0], 3.0).unwrap();
        let p = local_taylor(&sq, 0.5).unwrap();
        let c = p.monomial_coefficients();
        assert!(c.iter().zip([0.0, 0.0, 1.0]).all(|(a, b)| (a - b).abs() < 1e-15));

        let constant = TestFunction::polynomial(vec![3.5], 2.5).unwrap();
        let p = local_taylor(&constant, 0.3).unwrap();
        assert_eq!(p.monomial_coefficients(), vec![3.5, 0.0, 0.0]);

        let s = TestFunction::sine(1.0, 2.0).unwrap();
        let p = local_taylor(&s, 0.0).unwrap();
        let c = p.monomial_coefficients();
        assert!(c[0].abs() < 1e-15 && (c[1] - 2.0 * PI).abs() < 1e-12);

        assert!(local_taylor(&s, 1.5).is_err());
    }

    #[test]
    fn hats_partition_unity() {
        for m in [1, 3, 8, 64] {
            for i in 0..=10_000 {
                let x = i as f64 / 10_000.0;
                let s: f64 = (0..=m).map(|l| hat_weight(m, l, x)).sum();
                assert!((s - 1.0).abs() <= 1e-12, "M={m} x={x}");
            }
        }
    }

    #[test]
    fn linear_functions_are_reproduced() {
        let f = TestFunction::polynomial(vec![0.3, -1.7], 2.0).unwrap();
        for m in [1, 2, 5, 17] {
            let t = localized_taylor(&f, m).unwrap();
            let err = sup_error(|x| f.value(x), |x| t.eval(x), 1001, Parallelism::Sequential);
            assert!(err < 1e-14, "M={m}: {err}");
        }
    }

    #[test]
    fn order_zero_is_piecewise_linear_interpolation() {
        let f = TestFunction::polynomial(vec![0.0, 0.0, 1.0], 1.0).unwrap();
        let t = localized_taylor(&f, 4).unwrap();
        for i in 0..=400 {
            let x = i as f64 / 400.0;
            let l = ((x * 4.0).floor() as usize).min(3);
            let (x0, x1) = (l as f64 / 4.0, (l + 1) as f64 / 4.0);
            let interp = x0 * x0 + (x1 * x1 - x0 * x0) * (x - x0) / (x1 - x0);
            assert!((t.eval(x) - interp).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_at_grid_points() {
        let f = TestFunction::sine(1.0, 2.0).unwrap();
        let t = localized_taylor(&f, 7).unwrap();
        for l in 0..=7 {
            let x = l as f64 / 7.0;
            assert!((t.eval(x) - f.value(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn sine_error_within_bound_and_refines() {
        let f = TestFunction::sine(1.0, 2.0).unwrap();
        let k = 1.0 + 2.0 * PI + 4.0 * PI * PI;
        assert!((f.holder_radius() - k).abs() < 1e-12);
        let rows = approximation_sweep(&f, &[1, 2, 4, 8, 16, 32], 20_001, Parallelism::default()).unwrap();
        assert!(rows[3].sup_error <= k / 64.0);
        for r in &rows {
            assert!(r.sup_error <= r.bound);
        }
        for w in rows.windows(2).skip(1) {
            assert!(w[1].sup_error <= w[0].sup_error);
        }
    }

    #[test]
    fn constant_network_is_one() {
        let f = TestFunction::polynomial(vec![1.0], 1.0).unwrap();
        let net = build_sigma_network(&f, 1).unwrap();
        assert_eq!(net.width(), 2);
        assert_eq!(net.u(), &[1.0, 1.0]);
        for i in 0..=100 {
            assert!((net.eval1(i as f64 / 100.0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hidden_layer_examples() {
        let (v, w) = fixed_hidden_layer(1.0, 1);
        assert_eq!(v, vec![0.0, -1.0]);
        assert_eq!(w, vec![1.0, 1.0]);
        for (beta, m) in [(1.5, 3), (3.0, 10), (2.0, 64)] {
            assert_eq!(fixed_hidden_layer(beta, m).0.len(), (m + 1) * derivative_count(beta));
        }
        // sigma(V + x) reproduces the localized features at x = 0.3
        let (v, _) = fixed_hidden_layer(2.0, 4);
        let direct = taylor_features(2.0, 4, 0.3);
        for (b, want) in v.iter().zip(direct) {
            assert!((crate::activation::sigma(b + 0.3) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_network_equals_taylor() {
        let f = TestFunction::sine(1.0, 2.0).unwrap();
        let t = localized_taylor(&f, 8).unwrap();
        let net = sigma_network(&t);
        assert_eq!(net.width(), 18);
        let err = sup_error(|x| net.eval1(x), |x| t.eval(x), 100_000, Parallelism::default());
        assert!(err <= 1e-9, "{err}");
        let k = f.holder_radius();
        assert!(net.u().iter().all(|u| u.abs() <= k));
        assert!(net.max_abs_parameter() <= parameter_radius(k, 2.0, 8));
        let peak = sup_error(|x| net.eval1(x), |_| 0.0, 10_001, Parallelism::default());
        assert!(peak <= 2.0 * 2.0 * k);
    }

    #[test]
    fn derivative_table_round_trip() {
        let f = TestFunction::exp(2.0).unwrap();
        let m = 3;
        let mut text = String::from("l,r,value\n");
        for l in 0..=m {
            for (r, d) in f.derivatives(l as f64 / m as f64).iter().enumerate() {
                text.push_str(&format!("{l},{r},{d:e}\n"));
            }
        }
        let from_table = parse_derivative_table(&text, m, 2.0).unwrap();
        assert_eq!(from_table, localized_taylor(&f, m).unwrap());
        assert!(parse_derivative_table("l,r,value\n0,0,1\n", m, 2.0).is_err());
        assert!(parse_derivative_table("a,b\n", m, 2.0).is_err());
        assert!(parse_derivative_table("l,r,value\n9,0,1\n", m, 2.0).is_err());
    }
}
