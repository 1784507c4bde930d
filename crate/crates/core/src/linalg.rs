//! Exact dense linear algebra: rational Gaussian elimination and
//! fraction-free (Bareiss) determinants.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::ExactRational;

/// Solves `a x = b` exactly by Gaussian elimination, choosing the pivot of
/// largest magnitude in each column.
pub fn solve_exact(mut a: Vec<Vec<ExactRational>>, mut b: Vec<ExactRational>) -> Result<Vec<ExactRational>> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    if let Some(row) = a.iter().find(|row| row.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: row.len() });
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .filter(|&r| !a[r][col].is_zero())
            .max_by(|&r, &s| a[r][col].abs().cmp(&a[s][col].abs()))
            .ok_or_else(|| Error::Consistency(format!("zero pivot in column {col}")))?;
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        let pivot = a[col][col].clone();
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let factor = &a[r][col] / &pivot;
            let (upper, lower) = a.split_at_mut(r);
            let src = &upper[col];
            let dst = &mut lower[0];
            dst[col] = ExactRational::zero();
            for c in col + 1..n {
                if !src[c].is_zero() {
                    dst[c] -= &factor * &src[c];
                }
            }
            let delta = &factor * &b[col];
            b[r] -= delta;
        }
    }
    let mut x = vec![ExactRational::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for c in r + 1..n {
            if !a[r][c].is_zero() {
                acc -= &a[r][c] * &x[c];
            }
        }
        x[r] = acc / &a[r][r];
    }
    Ok(x)
}

/// Determinant of an integer matrix by Bareiss fraction-free elimination;
/// every intermediate stays an integer.
pub fn bareiss_determinant(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    assert!(a.iter().all(|row| row.len() == n), "matrix must be square");
    if n == 0 {
        return BigInt::from(1);
    }
    let mut sign = 1;
    let mut prev = BigInt::from(1);
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = num / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    let det = a[n - 1][n - 1].clone();
    if sign < 0 {
        -det
    } else {
        det
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn cofactor_det(m: &[Vec<BigInt>]) -> BigInt {
        let n = m.len();
        if n == 1 {
            return m[0][0].clone();
        }
        let mut total = BigInt::zero();
        for j in 0..n {
            let minor: Vec<Vec<BigInt>> = m[1..]
                .iter()
                .map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| v.clone()).collect())
                .collect();
            let term = &m[0][j] * cofactor_det(&minor);
            if j % 2 == 0 {
                total += term;
            } else {
                total -= term;
            }
        }
        total
    }

    #[test]
    fn two_by_two_vandermonde_example() {
        // [[1, 1], [1/4, 1]] u = (0, 1)  ->  u = (-4/3, 4/3)
        let a = vec![vec![int(1), int(1)], vec![rat(1, 4), int(1)]];
        let u = solve_exact(a, vec![int(0), int(1)]).unwrap();
        assert_eq!(u, vec![rat(-4, 3), rat(4, 3)]);
    }

    #[test]
    fn singular_system_is_consistency_error() {
        let a = vec![vec![int(1), int(2)], vec![int(2), int(4)]];
        let err = solve_exact(a, vec![int(1), int(1)]).unwrap_err();
        assert!(err.is_consistency());
    }

    #[test]
    fn solution_satisfies_system() {
        let a: Vec<Vec<ExactRational>> = (0..5)
            .map(|i| (0..5).map(|j| rat((i * 7 + j * 3) % 11 - 5, (i + j) as i64 + 1)).collect())
            .collect();
        let b: Vec<ExactRational> = (0..5).map(|i| rat(i - 2, 3)).collect();
        let x = solve_exact(a.clone(), b.clone()).unwrap();
        for (row, bi) in a.iter().zip(&b) {
            let lhs: ExactRational = row.iter().zip(&x).map(|(p, q)| p * q).sum();
            assert_eq!(&lhs, bi);
        }
    }

    #[test]
    fn bareiss_matches_cofactor_expansion() {
        for seed in 0..20i64 {
            let n = (seed % 5 + 1) as usize;
            let m: Vec<Vec<BigInt>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| BigInt::from((seed * 31 + i as i64 * 17 + j as i64 * 7) % 13 - 6))
                        .collect()
                })
                .collect();
            assert_eq!(bareiss_determinant(m.clone()), cofactor_det(&m), "seed {seed}");
        }
        let zero_lead = vec![
            vec![BigInt::from(0), BigInt::from(1)],
            vec![BigInt::from(1), BigInt::from(0)],
        ];
        assert_eq!(bareiss_determinant(zero_lead), BigInt::from(-1));
    }
}
