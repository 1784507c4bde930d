//! Box-constrained least squares `min |y - X u|^2 / n` subject to
//! `|u_i| <= bound`, via projected gradient with Barzilai-Borwein steps
//! followed by an active-set Newton polish.

use nalgebra::{DMatrix, DVector};

/// Quadratic `u' A u - 2 b' u` with `A = X'X / n`, `b = X'y / n`.
#[derive(Debug, Clone)]
pub struct BoxLsProblem {
    pub gram: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxLsSolution {
    pub u: DVector<f64>,
    pub iterations: usize,
    /// Largest violation of the first-order conditions, see
    /// [`BoxLsProblem::kkt_violation`].
    pub kkt_violation: f64,
    /// Free block of the Gram matrix was singular; its min-norm solution
    /// was used.
    pub rank_deficient: bool,
}

/// Singular values below `RANK_TOL * s_max` are treated as zero.
const RANK_TOL: f64 = 1e-12;
/// Stop projected-gradient steps once a step lowers the objective by less
/// than this (relative).
const DECREASE_TOL: f64 = 1e-10;
const MAX_PG_STEPS: usize = 20_000;
/// Active-set iterations allowed per coordinate.
const MAX_ACTIVE_SET_STEPS: usize = 20;

impl BoxLsProblem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    fn objective(&self, u: &DVector<f64>) -> f64 {
        (u.transpose() * &self.gram * u)[(0, 0)] - 2.0 * self.rhs.dot(u)
    }

    pub fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        (&self.gram * u - &self.rhs) * 2.0
    }

    fn project(&self, u: &mut DVector<f64>) {
        for x in u.iter_mut() {
            *x = x.clamp(-self.bound, self.bound);
        }
    }

    /// Zero at a minimizer: `|g_i|` on free coordinates, `max(0, g_i)` at
    /// `+bound` and `max(0, -g_i)` at `-bound`.
    pub fn kkt_violation(&self, u: &DVector<f64>) -> f64 {
        let g = self.gradient(u);
        u.iter()
            .zip(g.iter())
            .map(|(&x, &gi)| {
                if x >= self.bound {
                    gi.max(0.0)
                } else if x <= -self.bound {
                    (-gi).max(0.0)
                } else {
                    gi.abs()
                }
            })
            .fold(0.0, f64::max)
    }

    fn min_norm_solve(a: DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, bool) {
        if let Some(chol) = a.clone().cholesky() {
            let x = chol.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                let eig = a.symmetric_eigenvalues();
                if eig.min() > RANK_TOL * eig.max() {
                    return (x, false);
                }
            }
        }
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let x = svd
            .solve(b, RANK_TOL * smax.max(f64::MIN_POSITIVE))
            .expect("u and v were computed");
        (x, true)
    }

    /// Projected-gradient phase from `u`; returns steps taken.
    fn projected_gradient(&self, u: &mut DVector<f64>) -> usize {
        let mut g = self.gradient(u);
        let lmax = self.gram.norm().max(f64::MIN_POSITIVE);
        let mut step = 0.5 / lmax;
        let mut f = self.objective(u);
        for it in 0..MAX_PG_STEPS {
            let mut trial = &*u - &g * step;
            self.project(&mut trial);
            let d = &trial - &*u;
            let gd = g.dot(&d);
            if gd >= 0.0 {
                return it;
            }
            // exact minimization of the quadratic along d, capped at the
            // projected point
            let ad = &self.gram * &d;
            let curv = d.dot(&ad);
            let t = if curv > 0.0 { (-gd / (2.0 * curv)).min(1.0) } else { 1.0 };
            let s = &d * t;
            *u += &s;
            let g_new = &g + &ad * (2.0 * t);
            let f_new = self.objective(u);
            let y = &g_new - &g;
            let sy = s.dot(&y);
            step = if sy > 0.0 { s.dot(&s) / sy } else { 1.0 / lmax };
            g = g_new;
            if f - f_new <= DECREASE_TOL * (1.0 + f.abs()) {
                return it + 1;
            }
            f = f_new;
        }
        MAX_PG_STEPS
    }

    /// Minimizer of the quadratic over the free coordinates with the rest
    /// held at their current values.
    fn free_minimizer(&self, u: &DVector<f64>, free: &[usize], fixed: &[bool]) -> (DVector<f64>, bool) {
        let p = self.dim();
        let a_ff = DMatrix::from_fn(free.len(), free.len(), |i, j| self.gram[(free[i], free[j])]);
        let b_f = DVector::from_fn(free.len(), |i, _| {
            let fi = free[i];
            self.rhs[fi]
                - (0..p)
                    .filter(|&j| fixed[j])
                    .map(|j| self.gram[(fi, j)] * u[j])
                    .sum::<f64>()
        });
        Self::min_norm_solve(a_ff, &b_f)
    }

    /// Primal active-set method from a feasible `u`: Newton steps on the
    /// free coordinates, stopping at the first bound hit, and releasing the
    /// bound coordinate with the worst multiplier once the free block is
    /// optimal.
    fn active_set(&self, u: &mut DVector<f64>) -> (usize, bool) {
        let p = self.dim();
        let mut fixed: Vec<bool> = u.iter().map(|x| x.abs() >= self.bound).collect();
        let mut rank_deficient = false;
        for it in 0..MAX_ACTIVE_SET_STEPS * p.max(1) {
            let free: Vec<usize> = (0..p).filter(|&i| !fixed[i]).collect();
            if !free.is_empty() {
                let (x_f, deficient) = self.free_minimizer(u, &free, &fixed);
                rank_deficient |= deficient;
                // longest feasible fraction of the step, and who blocks it
                let mut t = 1.0;
                let mut blocker = None;
                for (k, &i) in free.iter().enumerate() {
                    let d = x_f[k] - u[i];
                    let room = if d > 0.0 {
                        self.bound - u[i]
                    } else if d < 0.0 {
                        -self.bound - u[i]
                    } else {
                        continue;
                    };
                    let ti = room / d;
                    if ti < t {
                        t = ti.max(0.0);
                        blocker = Some(i);
                    }
                }
                for (k, &i) in free.iter().enumerate() {
                    u[i] = if t == 1.0 {
                        x_f[k]
                    } else {
                        (u[i] + t * (x_f[k] - u[i])).clamp(-self.bound, self.bound)
                    };
                }
                if let Some(i) = blocker {
                    u[i] = u[i].signum() * self.bound;
                    fixed[i] = true;
                    continue;
                }
            }
            let g = self.gradient(u);
            let release = (0..p)
                .filter(|&i| fixed[i])
                .map(|i| (i, if u[i] > 0.0 { g[i] } else { -g[i] }))
                .filter(|&(_, wrong)| wrong > 0.0)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            match release {
                Some((i, _)) => fixed[i] = false,
                None => return (it, rank_deficient),
            }
        }
        (MAX_ACTIVE_SET_STEPS * p.max(1), rank_deficient)
    }

    pub fn solve(&self) -> BoxLsSolution {
        let (mut u, rank_deficient) = Self::min_norm_solve(self.gram.clone(), &self.rhs);
        self.project(&mut u);
        let pg_steps = self.projected_gradient(&mut u);
        let (as_steps, deficient) = self.active_set(&mut u);
        BoxLsSolution {
            kkt_violation: self.kkt_violation(&u),
            u,
            iterations: pg_steps + as_steps,
            rank_deficient: rank_deficient || deficient,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(x: &[[f64; 2]], y: &[f64], bound: f64) -> BoxLsProblem {
        let n = x.len() as f64;
        let xm = DMatrix::from_fn(x.len(), 2, |i, j| x[i][j]);
        let yv = DVector::from_column_slice(y);
        BoxLsProblem {
            gram: xm.transpose() * &xm / n,
            rhs: xm.transpose() * yv / n,
            bound,
        }
    }

    /// Brute force over a fine grid of the box.
    fn grid_minimum(p: &BoxLsProblem) -> f64 {
        let steps = 2000;
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                let u = DVector::from_vec(vec![
                    -p.bound + 2.0 * p.bound * i as f64 / steps as f64,
                    -p.bound + 2.0 * p.bound * j as f64 / steps as f64,
                ]);
                best = best.min(p.objective(&u));
            }
        }
        best
    }

    #[test]
    fn interior_solution_matches_normal_equations() {
        let p = problem(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], &[1.0, 2.0, 3.5], 10.0);
        let s = p.solve();
        let exact = p.gram.clone().cholesky().unwrap().solve(&p.rhs);
        assert!((s.u - exact).amax() < 1e-12);
        assert!(s.kkt_violation < 1e-12);
    }

    #[test]
    fn clipped_solution_matches_grid_search() {
        let p = problem(&[[1.0, 0.2], [0.3, 1.0], [1.0, 1.0], [0.5, -0.4]], &[4.0, -3.0, 0.5, 2.0], 1.0);
        let s = p.solve();
        assert!(s.kkt_violation < 1e-10);
        assert!(p.objective(&s.u) <= grid_minimum(&p) + 1e-9);
        assert!(s.u.iter().any(|x| x.abs() == 1.0));
    }

    #[test]
    fn singular_gram_uses_min_norm() {
        // duplicated column: only u0 + u1 is identified
        let p = problem(&[[1.0, 1.0], [2.0, 2.0]], &[2.0, 4.0], 5.0);
        let s = p.solve();
        assert!(s.rank_deficient);
        assert!((s.u[0] + s.u[1] - 2.0).abs() < 1e-9);
        assert!((s.u[0] - s.u[1]).abs() < 1e-9);
        assert!(s.kkt_violation < 1e-9);
    }

    #[test]
    fn tiny_bound_saturates() {
        let p = problem(&[[1.0, 0.0], [0.0, 1.0]], &[3.0, -2.0], 1e-6);
        let s = p.solve();
        assert_eq!(s.u.as_slice(), &[1e-6, -1e-6]);
        assert_eq!(s.kkt_violation, 0.0);
    }

    proptest::proptest! {
        #[test]
        fn certificate_holds_on_random_problems(
            xs in proptest::collection::vec(-3.0f64..3.0, 40),
            ys in proptest::collection::vec(-10.0f64..10.0, 10),
            bound in 0.01f64..5.0,
        ) {
            let n = ys.len();
            let x = DMatrix::from_row_slice(n, 4, &xs);
            let p = BoxLsProblem {
                gram: x.transpose() * &x / n as f64,
                rhs: x.transpose() * DVector::from_vec(ys) / n as f64,
                bound,
            };
            let s = p.solve();
            proptest::prop_assert!(s.kkt_violation <= 1e-8, "{:?}", s);
            proptest::prop_assert!(s.u.iter().all(|v| v.abs() <= bound));
        }
    }
}
