//! Exact compilation of polynomials on `[0, 1]^d` into shallow
//! `rho`-networks.
//!
//! A homogeneous block of degree `r >= 2` with `N` monomials becomes `N + 1`
//! units `u_j rho(r - 1 + sum_i b_j^((r+1)^(i-1)) x_i)`. On `[0, 1]^d` the
//! inner sum lies in `[0, 1]`, so each unit contributes
//! `u_j (t_j^r + r - 1)`, and expanding `t_j^r` by the multinomial theorem
//! turns the block into the generalized Vandermonde system
//! `sum_j u_j b_j^(a_k) = c_k / multinomial(r_k)`, `sum_j u_j = 0`, where
//! `a_k` reads the multi-index `r_k` as base-`(r+1)` digits.
//! Constants and linear terms use one unit each.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{bareiss_determinant, solve_exact};
use crate::network::{Activation, ShallowNetwork};
use crate::par::{self, Parallelism};
use crate::poly::{
    binomial, enumerate_monomials, multinomial_coefficient, poly_expand_power_of_affine_form,
    MultiIndex, Polynomial,
};
use crate::rational::{self, ExactRational};
use crate::rng::substream;

/// `sum_i r_i (r+1)^(i-1)`: the multi-index read as a base-`(r+1)` number.
pub fn exponent_code(index: &MultiIndex, r: u32) -> Result<u64> {
    if index.degree() != r {
        return Err(Error::invalid(format!(
            "multi-index {index} has degree {}, expected {r}",
            index.degree()
        )));
    }
    let base = r as u64 + 1;
    let mut code: u64 = 0;
    let mut place: u64 = 1;
    for (i, &e) in index.exponents().iter().enumerate() {
        code = (e as u64)
            .checked_mul(place)
            .and_then(|t| code.checked_add(t))
            .ok_or_else(|| Error::invalid("exponent code overflows u64"))?;
        if i + 1 < index.dim() {
            place = place
                .checked_mul(base)
                .ok_or_else(|| Error::invalid("exponent code overflows u64"))?;
        }
    }
    Ok(code)
}

/// Nodes `b_j = (j+1) / ((N+1) d)`, `j = 0..=N`.
pub fn choose_nodes(n: usize, d: usize) -> Vec<ExactRational> {
    assert!(n >= 1 && d >= 1, "need N >= 1 and d >= 1");
    let den = ((n + 1) * d) as i64;
    (0..=n).map(|j| rational::rat(j as i64 + 1, den)).collect()
}

/// The solved system for one homogeneous degree block.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeBlockPlan {
    pub degree: u32,
    pub dim: usize,
    /// Degree-`r` multi-indices in lexicographic order; `coefficients`
    /// follows the same order.
    pub monomials: Vec<MultiIndex>,
    pub coefficients: Vec<ExactRational>,
    /// Row exponents `0 = a_0 < a_1 < ... < a_N`.
    pub exponents: Vec<u64>,
    /// For row `i >= 1`, the position in `monomials` it belongs to.
    pub row_monomial: Vec<usize>,
    pub nodes: Vec<ExactRational>,
    pub u: Vec<ExactRational>,
}

impl DegreeBlockPlan {
    /// Number of degree-`r` monomials; the block has `N + 1` units.
    pub fn n(&self) -> usize {
        self.monomials.len()
    }

    /// Common denominator `(N+1) d` of the nodes.
    fn node_denominator(&self) -> i64 {
        ((self.n() + 1) * self.dim) as i64
    }

    /// `[b_j^(a_i)]` with rows in ascending exponent order.
    pub fn vandermonde_matrix(&self) -> Vec<Vec<ExactRational>> {
        self.exponents
            .iter()
            .map(|&a| self.nodes.iter().map(|b| rational::pow(b, a)).collect())
            .collect()
    }

    /// `det [b_j^(a_i)]`, computed as `det [(j+1)^(a_i)] / D^(sum a_i)` with
    /// the integer determinant taken fraction-free.
    pub fn vandermonde_determinant(&self) -> ExactRational {
        let int_matrix: Vec<Vec<BigInt>> = self
            .exponents
            .iter()
            .map(|&a| {
                (1..=self.nodes.len())
                    .map(|j| num_traits::pow(BigInt::from(j), a as usize))
                    .collect()
            })
            .collect();
        let det = bareiss_determinant(int_matrix);
        let total: u64 = self.exponents.iter().sum();
        let scale = num_traits::pow(BigInt::from(self.node_denominator()), total as usize);
        ExactRational::new(det, scale)
    }

    /// Right-hand side of the system in row order.
    pub fn rhs(&self) -> Vec<ExactRational> {
        std::iter::once(ExactRational::zero())
            .chain(self.row_monomial.iter().map(|&k| {
                &self.coefficients[k]
                    / ExactRational::from_integer(multinomial_coefficient(&self.monomials[k]).into())
            }))
            .collect()
    }

    /// Input weights `b_j^((r+1)^(i-1))` of unit `j`.
    pub fn unit_weights(&self, j: usize) -> Vec<ExactRational> {
        let base = self.degree as u64 + 1;
        (0..self.dim)
            .map(|i| rational::pow(&self.nodes[j], base.pow(i as u32)))
            .collect()
    }
}

/// Solves the degree-`r` block for coefficients `c` given in lexicographic
/// monomial order.
pub fn solve_degree_block(c: &[ExactRational], r: u32, d: usize) -> Result<DegreeBlockPlan> {
    if r < 2 {
        return Err(Error::invalid(format!("degree blocks need r >= 2, got {r}")));
    }
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let monomials = enumerate_monomials(d, r);
    let n = monomials.len();
    if c.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: c.len() });
    }
    let mut rows: Vec<(u64, usize)> = monomials
        .iter()
        .enumerate()
        .map(|(k, m)| exponent_code(m, r).map(|a| (a, k)))
        .collect::<Result<_>>()?;
    rows.sort_unstable();
    if rows.windows(2).any(|w| w[0].0 == w[1].0) || rows[0].0 == 0 {
        return Err(Error::Consistency("exponent codes are not distinct".into()));
    }
    let exponents: Vec<u64> = std::iter::once(0).chain(rows.iter().map(|&(a, _)| a)).collect();
    let row_monomial: Vec<usize> = rows.iter().map(|&(_, k)| k).collect();

    let mut plan = DegreeBlockPlan {
        degree: r,
        dim: d,
        monomials,
        coefficients: c.to_vec(),
        exponents,
        row_monomial,
        nodes: choose_nodes(n, d),
        u: vec![ExactRational::zero(); n + 1],
    };
    if c.iter().all(Zero::is_zero) {
        return Ok(plan);
    }
    // Row i scaled by D^(a_i) turns b_j^(a_i) into the integer (j+1)^(a_i).
    let den = BigInt::from(plan.node_denominator());
    let matrix: Vec<Vec<ExactRational>> = plan
        .exponents
        .iter()
        .map(|&a| {
            (1..=n + 1)
                .map(|j| ExactRational::from_integer(num_traits::pow(BigInt::from(j), a as usize)))
                .collect()
        })
        .collect();
    let rhs: Vec<ExactRational> = plan
        .rhs()
        .into_iter()
        .zip(&plan.exponents)
        .map(|(v, &a)| v * ExactRational::from_integer(num_traits::pow(den.clone(), a as usize)))
        .collect();
    plan.u = solve_exact(matrix, rhs)?;
    if !plan.u.iter().fold(ExactRational::zero(), |s, x| s + x).is_zero() {
        return Err(Error::Consistency("block weights do not sum to zero".into()));
    }
    Ok(plan)
}

fn block_network(plan: &DegreeBlockPlan) -> ShallowNetwork<ExactRational> {
    let bias = rational::int(plan.degree as i64 - 1);
    let w = (0..plan.u.len()).map(|j| plan.unit_weights(j)).collect();
    ShallowNetwork::new(Activation::Rho, plan.u.clone(), vec![bias; plan.u.len()], w)
        .expect("block shapes are consistent")
}

/// Width-`(N+1)` `rho`-network equal on `[0,1]^d` to `sum_k c_k x^(r_k)`.
pub fn represent_monomial_block(
    c: &[ExactRational],
    r: u32,
    d: usize,
) -> Result<ShallowNetwork<ExactRational>> {
    Ok(block_network(&solve_degree_block(c, r, d)?))
}

/// A compiled polynomial together with the per-degree systems behind it.
#[derive(Debug, Clone)]
pub struct CompiledPolynomial {
    pub network: ShallowNetwork<ExactRational>,
    pub blocks: Vec<DegreeBlockPlan>,
}

/// Compiles `p` into a `rho`-network: one constant unit, `d` linear units,
/// then one block per degree `2..=deg(p)`. Blocks are solved in parallel
/// under `mode`.
pub fn compile_polynomial(p: &Polynomial, mode: Parallelism) -> Result<CompiledPolynomial> {
    let d = p.dim();
    let degree = p.degree();
    let mut u = Vec::new();
    let mut v = Vec::new();
    let mut w = Vec::new();

    // rho(1) = 1
    u.push(p.coefficient(&MultiIndex::zero(d)));
    v.push(ExactRational::one());
    w.push(vec![ExactRational::zero(); d]);

    // rho(x_i) = x_i on [0, 1]
    for i in 0..d {
        let e = MultiIndex::unit(d, i);
        u.push(p.coefficient(&e));
        v.push(ExactRational::zero());
        w.push(
            e.exponents()
                .iter()
                .map(|&x| rational::int(x as i64))
                .collect(),
        );
    }

    let degrees: Vec<u32> = (2..=degree).collect();
    let blocks = par::map(mode, &degrees, |&r| {
        solve_degree_block(&p.homogeneous_coefficients(r), r, d)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    for plan in &blocks {
        let (_, bu, bv, bw) = block_network(plan).into_parts();
        u.extend(bu);
        v.extend(bv);
        w.extend(bw);
    }
    Ok(CompiledPolynomial {
        network: ShallowNetwork::new(Activation::Rho, u, v, w)?,
        blocks,
    })
}

pub fn represent_polynomial(p: &Polynomial) -> Result<ShallowNetwork<ExactRational>> {
    Ok(compile_polynomial(p, Parallelism::default())?.network)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WidthBound {
    /// `2 (R + d)^d`.
    pub bound: BigUint,
    /// `d + 1 + sum_{r=2}^{R} (C(r+d-1, d-1) + 1)`, the width actually built.
    pub exact_count: BigUint,
}

pub fn width_bound(degree: u32, d: usize) -> WidthBound {
    assert!(d >= 1, "dimension must be positive");
    let bound = BigUint::from(2u32) * BigUint::from(degree as usize + d).pow(d as u32);
    let exact_count = (2..=degree as u64).fold(BigUint::from(d + 1), |acc, r| {
        acc + binomial(r + d as u64 - 1, d as u64 - 1) + 1u32
    });
    WidthBound { bound, exact_count }
}

/// Rescales every unit of a ReLU network so its preactivation stays in
/// `[-1, 1]` on `[0,1]^d`, where `rho` equals ReLU: with
/// `s_j = max(1, |v_j| + sum_i |w_ji|)`, `(u, v, w) -> (s u, v / s, w / s)`.
pub fn relu_to_rho<T>(net: &ShallowNetwork<T>) -> Result<ShallowNetwork<T>>
where
    T: Clone + Signed + PartialOrd,
{
    if net.activation() != Activation::Relu {
        return Err(Error::invalid(format!(
            "expected a relu network, got {}",
            net.activation().name()
        )));
    }
    let mut u = Vec::with_capacity(net.width());
    let mut v = Vec::with_capacity(net.width());
    let mut w = Vec::with_capacity(net.width());
    for (uj, vj, wj) in net.units() {
        let l1 = wj.iter().fold(vj.abs(), |acc, x| acc + x.abs());
        let s = if l1 > T::one() { l1 } else { T::one() };
        u.push(uj.clone() * s.clone());
        v.push(vj.clone() / s.clone());
        w.push(wj.iter().map(|x| x.clone() / s.clone()).collect());
    }
    ShallowNetwork::new(Activation::Rho, u, v, w)
}

/// Polynomial equal to `net` on `[0,1]^d`, when every unit stays inside a
/// single polynomial piece of its activation over the cube. `None` when
/// some unit crosses a breakpoint or the activation is `sigma`.
pub fn network_as_polynomial(net: &ShallowNetwork<ExactRational>) -> Option<Polynomial> {
    let d = net.dim();
    let mut total = Polynomial::zero(d);
    for (u, v, w) in net.units() {
        if u.is_zero() {
            continue;
        }
        let lo = w.iter().fold(v.clone(), |acc, x| if x.is_negative() { acc + x } else { acc });
        let hi = w.iter().fold(v.clone(), |acc, x| if x.is_positive() { acc + x } else { acc });
        let unit = match net.activation() {
            Activation::Sigma => return None,
            _ if !hi.is_positive() => continue,
            Activation::Relu if !lo.is_negative() => {
                poly_expand_power_of_affine_form(v, w, 1)
            }
            Activation::Relu => return None,
            Activation::Rho => {
                if lo.is_negative() {
                    return None;
                }
                let k = lo.floor();
                if hi > &k + ExactRational::one() {
                    return None;
                }
                let exp = u32::try_from(k.to_integer()).ok()?.checked_add(1)?;
                &poly_expand_power_of_affine_form(&(v - &k), w, exp)
                    + &Polynomial::constant(d, k)
            }
        };
        total = &total + &unit.scale(u);
    }
    Some(total)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolicVerdict {
    Exact,
    /// First monomial whose coefficients disagree.
    Mismatch(MultiIndex),
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub points_checked: usize,
    pub max_discrepancy: ExactRational,
    /// A point attaining `max_discrepancy`, when it is nonzero.
    pub witness: Option<Vec<ExactRational>>,
    pub symbolic: SymbolicVerdict,
}

impl VerificationReport {
    pub fn is_exact(&self) -> bool {
        self.max_discrepancy.is_zero() && !matches!(self.symbolic, SymbolicVerdict::Mismatch(_))
    }

    pub fn verdict(&self) -> &'static str {
        if self.is_exact() {
            "exact"
        } else {
            "mismatch"
        }
    }
}

/// Random point of `[0,1]^d` with denominators up to 1024.
pub fn random_rational_point<R: Rng>(rng: &mut R, d: usize) -> Vec<ExactRational> {
    (0..d)
        .map(|_| {
            let den: i64 = rng.random_range(1..=1024);
            let num: i64 = rng.random_range(0..=den);
            rational::rat(num, den)
        })
        .collect()
}

/// Checks `net == p` exactly at every corner of `[0,1]^d`, at `trials`
/// random rational points, and symbolically by expanding each unit.
pub fn verify_exact_representation(
    p: &Polynomial,
    net: &ShallowNetwork<ExactRational>,
    trials: usize,
    seed: u64,
) -> Result<VerificationReport> {
    verify_exact_representation_with(p, net, trials, seed, Parallelism::default())
}

/// Units with a piece exponent above this are not expanded symbolically.
const SYMBOLIC_DEGREE_LIMIT: u32 = 16;

pub fn verify_exact_representation_with(
    p: &Polynomial,
    net: &ShallowNetwork<ExactRational>,
    trials: usize,
    seed: u64,
    mode: Parallelism,
) -> Result<VerificationReport> {
    let d = p.dim();
    if net.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: net.dim() });
    }
    let mut points: Vec<Vec<ExactRational>> = (0..1usize << d.min(16))
        .map(|mask| {
            (0..d)
                .map(|i| rational::int(((mask >> i) & 1) as i64))
                .collect()
        })
        .collect();
    let mut rng = substream(seed, "verify-points", 0);
    points.extend((0..trials).map(|_| random_rational_point(&mut rng, d)));

    let diffs = par::map(mode, &points, |x| -> Result<ExactRational> {
        Ok((net.eval_exact(x)? - p.eval_exact(x)?).abs())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut max_discrepancy = ExactRational::zero();
    let mut witness = None;
    for (x, diff) in points.iter().zip(diffs) {
        if diff > max_discrepancy {
            max_discrepancy = diff;
            witness = Some(x.clone());
        }
    }

    let symbolic = if p.degree() > SYMBOLIC_DEGREE_LIMIT {
        SymbolicVerdict::Skipped(format!("degree above {SYMBOLIC_DEGREE_LIMIT}"))
    } else {
        match network_as_polynomial(net) {
            None => SymbolicVerdict::Skipped("a unit crosses an activation breakpoint".into()),
            Some(q) if q.degree() > SYMBOLIC_DEGREE_LIMIT => {
                SymbolicVerdict::Skipped(format!("degree above {SYMBOLIC_DEGREE_LIMIT}"))
            }
            Some(q) => {
                let diff = &q + &p.scale(&-ExactRational::one());
                let first = diff.terms().next().map(|(m, _)| m.clone());
                match first {
                    None => SymbolicVerdict::Exact,
                    Some(m) => SymbolicVerdict::Mismatch(m),
                }
            }
        }
    };

    Ok(VerificationReport {
        points_checked: points.len(),
        max_discrepancy,
        witness,
        symbolic,
    })
}
