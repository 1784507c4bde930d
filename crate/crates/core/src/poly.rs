//! Multi-indices, sparse multivariate polynomials and the multinomial
//! expansion of powers of linear forms.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::rational::{self, ExactRational};

/// Exponent vector `(r_1, ..., r_d)` of the monomial `x_1^r_1 ... x_d^r_d`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::invalid("multi-index must have at least one entry"));
        }
        Ok(MultiIndex(exponents))
    }

    pub fn zero(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    /// Unit vector `e_i`.
    pub fn unit(d: usize, i: usize) -> Self {
        let mut e = vec![0; d];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// All multi-indices in `d` variables of total degree exactly `r`, in
/// ascending lexicographic order.
pub fn enumerate_monomials(d: usize, r: u32) -> Vec<MultiIndex> {
    assert!(d >= 1, "dimension must be positive");
    fn fill(prefix: &mut Vec<u32>, slots: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for e in 0..=remaining {
            prefix.push(e);
            fill(prefix, slots - 1, remaining - e, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    fill(&mut Vec::with_capacity(d), d, r, &mut out);
    out
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

fn factorial(n: u32) -> BigUint {
    (1..=n as u64).fold(BigUint::one(), |acc, i| acc * i)
}

/// `r! / (r_1! ... r_d!)`, the coefficient of `x^r` in `(x_1 + ... + x_d)^r`.
pub fn multinomial_coefficient(index: &MultiIndex) -> BigUint {
    let denom = index
        .exponents()
        .iter()
        .fold(BigUint::one(), |acc, &e| acc * factorial(e));
    factorial(index.degree()) / denom
}

/// A polynomial in `d` variables stored as a sparse map from exponent
/// vectors to nonzero coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<MultiIndex, ExactRational>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Polynomial {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: ExactRational) -> Self {
        let mut p = Polynomial::zero(dim);
        p.add_term(MultiIndex::zero(dim), c).expect("dimension matches");
        p
    }

    pub fn from_terms(
        dim: usize,
        terms: impl IntoIterator<Item = (MultiIndex, ExactRational)>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let mut p = Polynomial::zero(dim);
        for (m, c) in terms {
            p.add_term(m, c)?;
        }
        Ok(p)
    }

    /// Adds `c * x^m`, dropping the term if the coefficient cancels.
    pub fn add_term(&mut self, m: MultiIndex, c: ExactRational) -> Result<()> {
        if m.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: m.dim(),
            });
        }
        if c.is_zero() {
            return Ok(());
        }
        match self.terms.entry(m) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Highest term degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &ExactRational)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &MultiIndex) -> ExactRational {
        self.terms.get(m).cloned().unwrap_or_else(ExactRational::zero)
    }

    pub fn scale(&self, s: &ExactRational) -> Polynomial {
        if s.is_zero() {
            return Polynomial::zero(self.dim);
        }
        Polynomial {
            dim: self.dim,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect(),
        }
    }

    fn check_point_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    /// Exact value at a rational point.
    pub fn eval_exact(&self, x: &[ExactRational]) -> Result<ExactRational> {
        self.check_point_dim(x.len())?;
        let mut acc = ExactRational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &e) in x.iter().zip(m.exponents()) {
                if e > 0 {
                    t *= rational::pow(xi, e as u64);
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Floating-point value; coefficients are rounded to `f64` first.
    pub fn eval_f64(&self, x: &[f64]) -> Result<f64> {
        self.check_point_dim(x.len())?;
        Ok(self
            .terms
            .iter()
            .map(|(m, c)| {
                let mono: f64 = x
                    .iter()
                    .zip(m.exponents())
                    .map(|(xi, &e)| xi.powi(e as i32))
                    .product();
                rational::to_f64(c) * mono
            })
            .sum())
    }

    /// Coefficients of the degree-`r` part, indexed by
    /// `enumerate_monomials(dim, r)`.
    pub fn homogeneous_coefficients(&self, r: u32) -> Vec<ExactRational> {
        enumerate_monomials(self.dim, r)
            .iter()
            .map(|m| self.coefficient(m))
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|(m, c)| json!({"exps": m.exponents(), "coef": rational::format_rational(c)}))
            .collect();
        json!({"d": self.dim, "terms": terms})
    }

    /// Reads `{"d": int, "terms": [{"exps": [...], "coef": "p/q" | number}]}`.
    /// Numeric coefficients are taken at their exact binary value.
    pub fn from_json(v: &Value) -> Result<Self> {
        let d = v
            .get("d")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Parse("polynomial needs integer field \"d\"".into()))?
            as usize;
        let terms = v
            .get("terms")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("polynomial needs array field \"terms\"".into()))?;
        let mut p = Polynomial::zero(d.max(1));
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        for t in terms {
            let exps = t
                .get("exps")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Parse("term needs \"exps\" array".into()))?
                .iter()
                .map(|e| {
                    e.as_u64()
                        .and_then(|e| u32::try_from(e).ok())
                        .ok_or_else(|| Error::Parse(format!("bad exponent {e}")))
                })
                .collect::<Result<Vec<u32>>>()?;
            let coef = parse_scalar(
                t.get("coef")
                    .ok_or_else(|| Error::Parse("term needs \"coef\"".into()))?,
            )?;
            p.add_term(MultiIndex::new(exps)?, coef)?;
        }
        Ok(p)
    }
}

/// A JSON scalar: `"p/q"` strings are exact, numbers are converted through
/// their exact binary expansion.
pub fn parse_scalar(v: &Value) -> Result<ExactRational> {
    match v {
        Value::String(s) => rational::parse_rational(s),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(rational::int(i))
            } else {
                rational::from_f64(n.as_f64().ok_or_else(|| Error::Parse(format!("bad number {n}")))?)
            }
        }
        other => Err(Error::Parse(format!("expected number or \"p/q\" string, got {other}"))),
    }
}

impl Add<&Polynomial> for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone()).expect("dims checked");
        }
        out
    }
}

impl Mul<&Polynomial> for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let mut out = Polynomial::zero(self.dim);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                let exps = ma.0.iter().zip(&mb.0).map(|(a, b)| a + b).collect();
                out.add_term(MultiIndex(exps), ca * cb).expect("dims checked");
            }
        }
        out
    }
}

/// `(w_1 x_1 + ... + w_d x_d)^r` expanded term by term via the multinomial
/// theorem.
pub fn poly_expand_power_of_linear_form(weights: &[ExactRational], r: u32) -> Polynomial {
    let d = weights.len();
    assert!(d >= 1, "need at least one weight");
    let mut p = Polynomial::zero(d);
    for m in enumerate_monomials(d, r) {
        let mut c = BigRational::from_integer(multinomial_coefficient(&m).into());
        for (w, &e) in weights.iter().zip(m.exponents()) {
            if e > 0 {
                c *= rational::pow(w, e as u64);
            }
        }
        p.add_term(m, c).expect("dims match");
    }
    p
}

/// `(c + w·x)^r` as a polynomial, by binomial expansion over powers of the
/// linear part.
pub fn poly_expand_power_of_affine_form(
    constant: &ExactRational,
    weights: &[ExactRational],
    r: u32,
) -> Polynomial {
    let d = weights.len();
    let mut p = Polynomial::zero(d);
    for s in 0..=r {
        let coeff = BigRational::from_integer(binomial(r as u64, s as u64).into())
            * rational::pow(constant, (r - s) as u64);
        if coeff.is_zero() {
            continue;
        }
        p = &p + &poly_expand_power_of_linear_form(weights, s).scale(&coeff);
    }
    p
}
