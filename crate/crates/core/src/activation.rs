//! The piecewise-polynomial activations `rho` and `sigma`.
//!
//! `rho` is zero on `(-inf, 0]` and `(x - k)^(k+1) + k` on `[k, k+1]`, so it
//! agrees with ReLU on `(-inf, 1]`. `sigma` is zero on `(-inf, -1]` and on
//! each window `[k-1, k+1]` (k even) equals `(x - k)^a_k (1 - b_k |x - k|)_+`,
//! where `(a_k, b_k)` walks through every pair `(r, M)` with `r >= 0`,
//! `M >= 1` as `k` increases.
//!
//! Float evaluation of `rho` on piece `k` raises a number in `[0, 1)` to the
//! power `k + 1`, so its relative accuracy degrades as `k` grows; use
//! [`rho_exact`] when exactness matters.

use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, ExactRational};

/// `base^exp` by repeated squaring with a 64-bit exponent.
pub(crate) fn powu(base: f64, mut exp: u64) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= b;
        }
        exp >>= 1;
        b *= b;
    }
    acc
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn rho(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return x;
    }
    let k = x.floor();
    let t = x - k;
    if t == 0.0 {
        return k;
    }
    powu(t, k as u64 + 1) + k
}

/// [`rho`] that rejects non-finite inputs and outputs.
pub fn rho_checked(x: f64) -> Result<f64> {
    let y = rho(x);
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::NonFinite(format!("rho({x})")));
    }
    Ok(y)
}

pub fn rho_exact(x: &ExactRational) -> ExactRational {
    if !x.is_positive() {
        return ExactRational::zero();
    }
    let k = x.floor();
    let t = x - &k;
    let exp = k
        .to_integer()
        .to_u64()
        .expect("rho_exact: piece index exceeds u64")
        + 1;
    rational::pow(&t, exp) + k
}

/// Bookkeeping for the `sigma` piece centred at the even integer `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SigmaPieceIndex {
    pub k: u64,
    pub m: u64,
    /// Power of `(x - k)`.
    pub a: u64,
    /// Slope of the hat factor.
    pub b: u64,
}

/// Solves `m(m+1) <= k < (m+1)(m+2)` by integer square root and derives
/// `a_k = k/2 - m(m+1)/2`, `b_k = (m+1)(m+2)/2 - k/2`.
pub fn sigma_piece_index(k: u64) -> Result<SigmaPieceIndex> {
    if k % 2 != 0 {
        return Err(Error::invalid(format!("sigma piece index must be even, got {k}")));
    }
    let k128 = k as u128;
    let mut m = ((4 * k128 + 1).isqrt() - 1) / 2;
    while m * (m + 1) > k128 {
        m -= 1;
    }
    while (m + 1) * (m + 2) <= k128 {
        m += 1;
    }
    let a = (k128 - m * (m + 1)) / 2;
    let b = ((m + 1) * (m + 2) - k128) / 2;
    Ok(SigmaPieceIndex {
        k,
        m: m as u64,
        a: a as u64,
        b: b as u64,
    })
}

/// Even centre of the window `[k-1, k+1)` containing `x`, for `x > -1`.
fn sigma_window(x: f64) -> Option<u64> {
    if x.is_nan() || x <= -1.0 || x >= 9.0e15 {
        // beyond 2^53 every float is an integer, where sigma vanishes
        return None;
    }
    Some(2 * ((x + 1.0) / 2.0).floor() as u64)
}

/// Value of the formula of piece `k` at `x`, ignoring which window `x` is in.
pub fn sigma_piece_value(piece: &SigmaPieceIndex, x: f64) -> f64 {
    let t = x - piece.k as f64;
    let hat = 1.0 - piece.b as f64 * t.abs();
    if hat <= 0.0 {
        return 0.0;
    }
    // 0^0 = 1, so a = 0 leaves the bare hat
    powu(t, piece.a) * hat
}

pub fn sigma(x: f64) -> f64 {
    match sigma_window(x) {
        Some(k) => sigma_piece_value(&sigma_piece_index(k).expect("window centre is even"), x),
        None if x.is_nan() => f64::NAN,
        None => 0.0,
    }
}

pub fn sigma_piece_value_exact(piece: &SigmaPieceIndex, x: &ExactRational) -> ExactRational {
    let t = x - ExactRational::from_integer(piece.k.into());
    let hat = ExactRational::one() - ExactRational::from_integer(piece.b.into()) * t.abs();
    if !hat.is_positive() {
        return ExactRational::zero();
    }
    rational::pow(&t, piece.a) * hat
}

pub fn sigma_exact(x: &ExactRational) -> ExactRational {
    if *x <= -ExactRational::one() {
        return ExactRational::zero();
    }
    let half = (x + ExactRational::one()) / ExactRational::from_integer(2.into());
    let k: num_bigint::BigInt = half.floor().to_integer() * 2;
    let k = k.to_u64().expect("sigma_exact: argument exceeds u64 range");
    sigma_piece_value_exact(&sigma_piece_index(k).expect("even"), x)
}

/// Even `k` with `a_k = r` and `b_k = m`, namely `k = 2r + (m+r-1)(m+r)`.
pub fn sigma_knot_for(r: u64, m: u64) -> u64 {
    assert!(m >= 1, "hat slope must be positive");
    let s = m + r;
    let k = 2 * r + (s - 1) * s;
    debug_assert!({
        let p = sigma_piece_index(k).expect("even");
        p.a == r && p.b == m
    });
    k
}

/// Lipschitz constant `L + 1` of `sigma` on `[-L, L]`.
pub fn sigma_lipschitz_bound(l: u64) -> Result<f64> {
    if l < 2 || l % 2 != 0 {
        return Err(Error::invalid(format!("L must be even and >= 2, got {l}")));
    }
    Ok((l + 1) as f64)
}

/// Local Lipschitz constant `a_k + b_k` on the window of piece `k`.
pub fn sigma_piece_lipschitz(piece: &SigmaPieceIndex) -> u64 {
    piece.a + piece.b
}
