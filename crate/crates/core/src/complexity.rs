//! Entropy bound for univariate `sigma`-networks with parameters in
//! `[-R, R]`, and the quantized-parameter cover that realizes it.
//!
//! Rounding every weight and bias of `g` to the grid `eps Z` with
//! `eps = delta / (4 P (R+1)^2)` moves `g` by at most `delta` in sup norm,
//! because
//! `|g - g1| <= |U|_1 |sigma(z) - sigma(z1)|_inf + |U - U1|_inf |sigma(z1)|_1
//!           <= P R (2R+3) |z - z1|_inf + eps P <= 4 eps P (R+1)^2`.

use num_bigint::BigUint;
use rand::Rng;

use crate::activation::sigma;
use crate::error::{Error, Result};
use crate::network::{Activation, ShallowNetwork};
use crate::par::{self, Parallelism};
use crate::rng::substream;

/// `3 P log2(16 P (R+1)^3 / delta)`.
pub fn entropy_bound(width: usize, radius: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    check_class(width, radius)?;
    let p = width as f64;
    Ok(3.0 * p * (16.0 * p * (radius + 1.0).powi(3) / delta).log2())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    Ok(())
}

fn check_class(width: usize, radius: f64) -> Result<()> {
    if width == 0 {
        return Err(Error::invalid("width must be at least 1"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!("radius must be positive, got {radius}")));
    }
    Ok(())
}

/// Largest `m` with `m eps <= R`, tolerant of rounding when `R / eps` is
/// an integer.
fn grid_max_index(radius: f64, epsilon: f64) -> u64 {
    ((radius / epsilon) * (1.0 + 1e-12)).floor() as u64
}

/// The cover of the class `N_sigma(P, R)` at sup-radius `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverSpec {
    pub width: usize,
    pub radius: f64,
    pub delta: f64,
}

impl CoverSpec {
    pub fn new(width: usize, radius: f64, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        check_class(width, radius)?;
        Ok(CoverSpec { width, radius, delta })
    }

    /// Grid pitch `delta / (4 P (R+1)^2)`.
    pub fn epsilon(&self) -> f64 {
        self.delta / (4.0 * self.width as f64 * (self.radius + 1.0).powi(2))
    }

    pub fn grid_max_index(&self) -> u64 {
        grid_max_index(self.radius, self.epsilon())
    }

    pub fn cover_size(&self) -> BigUint {
        quantized_cover_size(self.width, self.radius, self.epsilon()).expect("spec validated")
    }

    pub fn log2_cover_size(&self) -> f64 {
        log2_quantized_cover_size(self.width, self.radius, self.epsilon()).expect("spec validated")
    }

    pub fn entropy_bound(&self) -> f64 {
        entropy_bound(self.width, self.radius, self.delta).expect("spec validated")
    }
}

/// `(2 floor(R/eps) + 1)^(3P)`: networks whose `3P` parameters all lie on
/// `eps Z ∩ [-R, R]`.
pub fn quantized_cover_size(width: usize, radius: f64, epsilon: f64) -> Result<BigUint> {
    check_class(width, radius)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("grid pitch must be positive"));
    }
    let per_param = BigUint::from(2 * grid_max_index(radius, epsilon) + 1);
    Ok(per_param.pow(3 * width as u32))
}

pub fn log2_quantized_cover_size(width: usize, radius: f64, epsilon: f64) -> Result<f64> {
    check_class(width, radius)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("grid pitch must be positive"));
    }
    Ok(3.0 * width as f64 * ((2 * grid_max_index(radius, epsilon) + 1) as f64).log2())
}

fn check_sigma_network(g: &ShallowNetwork<f64>, radius: f64) -> Result<()> {
    if g.activation() != Activation::Sigma || g.dim() != 1 {
        return Err(Error::invalid("expected a univariate sigma network"));
    }
    if let Some(p) = g
        .u()
        .iter()
        .chain(g.v())
        .chain(g.w().iter().flatten())
        .find(|p| !(p.abs() <= radius))
    {
        return Err(Error::invalid(format!("parameter {p} outside [-{radius}, {radius}]")));
    }
    Ok(())
}

/// Rounds every parameter of `g` to the nearest point of the cover grid,
/// halves away from zero, clamped to `[-R, R]`.
pub fn nearest_cover_point(g: &ShallowNetwork<f64>, spec: &CoverSpec) -> Result<ShallowNetwork<f64>> {
    if g.width() != spec.width {
        return Err(Error::DimensionMismatch { expected: spec.width, got: g.width() });
    }
    check_sigma_network(g, spec.radius)?;
    let eps = spec.epsilon();
    let max_m = spec.grid_max_index() as f64;
    let snap = |x: &f64| (x / eps).round().clamp(-max_m, max_m) * eps;
    ShallowNetwork::new(
        Activation::Sigma,
        g.u().iter().map(snap).collect(),
        g.v().iter().map(snap).collect(),
        g.w().iter().map(|row| row.iter().map(snap).collect()).collect(),
    )
}

pub fn sup_distance(g: &ShallowNetwork<f64>, h: &ShallowNetwork<f64>, grid: usize, mode: Parallelism) -> f64 {
    crate::taylor::sup_error(|x| g.eval1(x), |x| h.eval1(x), grid, mode)
}

/// Lipschitz constant of a network in `N_sigma(P, R)` as a function of
/// `x` on `[0, 1]`, used to turn grid sup-distances into certified ones.
pub fn network_lipschitz_bound(width: usize, radius: f64) -> f64 {
    width as f64 * radius * (2.0 * radius + 3.0) * (radius + 1.0)
}

pub fn random_sigma_network<R: Rng>(rng: &mut R, width: usize, radius: f64) -> ShallowNetwork<f64> {
    let mut draw = |_| rng.random_range(-radius..=radius);
    let u = (0..width).map(&mut draw).collect();
    let v = (0..width).map(&mut draw).collect();
    let w = (0..width).map(|i| vec![draw(i)]).collect();
    ShallowNetwork::new(Activation::Sigma, u, v, w).expect("consistent shapes")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainLink {
    /// Index `i` of the step `link_i <= link_{i+1}`.
    pub step: usize,
    pub description: &'static str,
    /// `min_x (link_{i+1}(x) - link_i(x))`; negative means the step fails.
    pub min_slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainAudit {
    /// Parameter distance `max(|U-U1|, |V-V1|, |W-W1|)`.
    pub epsilon: f64,
    /// Steps sorted by ascending slack.
    pub links: Vec<ChainLink>,
}

impl ChainAudit {
    pub fn holds(&self, tol: f64) -> bool {
        self.links.iter().all(|l| l.min_slack >= -tol)
    }

    pub fn tightest(&self) -> &ChainLink {
        self.links.first().expect("audit has links")
    }

    pub fn slackest(&self) -> &ChainLink {
        self.links.last().expect("audit has links")
    }
}

const CHAIN_STEPS: [&str; 5] = [
    "|g-g1| <= |U s - U s1| + |U s1 - U1 s1|",
    "triangle terms <= |U|_1 |s-s1|_inf + |U-U1|_inf |s1|_1",
    "Hölder terms <= P R (2R+3) |z-z1|_inf + eps P",
    "|z-z1|_inf <= 2 eps",
    "2 eps P R (2R+3) + eps P <= 4 eps P (R+1)^2",
];

/// Evaluates each inequality of the cover-distance chain at every grid
/// point and reports, per step, the smallest slack observed.
pub fn lipschitz_chain_audit(
    g: &ShallowNetwork<f64>,
    g1: &ShallowNetwork<f64>,
    radius: f64,
    xs: &[f64],
) -> Result<ChainAudit> {
    if g.width() != g1.width() {
        return Err(Error::DimensionMismatch { expected: g.width(), got: g1.width() });
    }
    check_sigma_network(g, radius)?;
    check_sigma_network(g1, radius)?;
    let p = g.width() as f64;
    let r = radius;
    let max_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let w0: Vec<f64> = g.w().iter().map(|row| row[0]).collect();
    let w1: Vec<f64> = g1.w().iter().map(|row| row[0]).collect();
    let eps = max_diff(g.u(), g1.u())
        .max(max_diff(g.v(), g1.v()))
        .max(max_diff(&w0, &w1));
    let u_l1: f64 = g.u().iter().map(|x| x.abs()).sum();
    let du = max_diff(g.u(), g1.u());

    let mut slack = [f64::INFINITY; 5];
    for &x in xs {
        let z: Vec<f64> = g.v().iter().zip(&w0).map(|(v, w)| v + w * x).collect();
        let z1: Vec<f64> = g1.v().iter().zip(&w1).map(|(v, w)| v + w * x).collect();
        let s: Vec<f64> = z.iter().map(|&t| sigma(t)).collect();
        let s1: Vec<f64> = z1.iter().map(|&t| sigma(t)).collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let us = dot(g.u(), &s);
        let us1 = dot(g.u(), &s1);
        let u1s1 = dot(g1.u(), &s1);
        let dz = max_diff(&z, &z1);

        let links = [
            (us - u1s1).abs(),
            (us - us1).abs() + (us1 - u1s1).abs(),
            u_l1 * max_diff(&s, &s1) + du * s1.iter().map(|t| t.abs()).sum::<f64>(),
            p * r * (2.0 * r + 3.0) * dz + eps * p,
            2.0 * eps * p * r * (2.0 * r + 3.0) + eps * p,
            4.0 * eps * p * (r + 1.0).powi(2),
        ];
        for i in 0..5 {
            slack[i] = slack[i].min(links[i + 1] - links[i]);
        }
    }
    let mut links: Vec<ChainLink> = CHAIN_STEPS
        .iter()
        .enumerate()
        .map(|(step, description)| ChainLink { step, description, min_slack: slack[step] })
        .collect();
    links.sort_by(|a, b| a.min_slack.total_cmp(&b.min_slack).then(a.step.cmp(&b.step)));
    Ok(ChainAudit { epsilon: eps, links })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverAuditRecord {
    pub sample: usize,
    pub grid_distance: f64,
    /// `grid_distance` plus the Lipschitz slack between grid points.
    pub certified_distance: f64,
    pub delta: f64,
}

impl CoverAuditRecord {
    pub fn passes(&self) -> bool {
        self.certified_distance <= self.delta
    }
}

/// Draws `samples` random networks from `N_sigma(P, R)`, snaps each to the
/// cover and measures the sup distance on a `grid`-point mesh.
pub fn cover_audit(
    spec: &CoverSpec,
    samples: usize,
    seed: u64,
    grid: usize,
    mode: Parallelism,
) -> Vec<CoverAuditRecord> {
    // g - g1 is 2L-Lipschitz and every x lies within half a mesh step of the grid
    let slack = network_lipschitz_bound(spec.width, spec.radius) / (grid - 1) as f64;
    par::map_range(mode, samples, |i| {
        let mut rng = substream(seed, "cover-audit", i as u64);
        let g = random_sigma_network(&mut rng, spec.width, spec.radius);
        let g1 = nearest_cover_point(&g, spec).expect("sample lies in the class");
        let d = sup_distance(&g, &g1, grid, Parallelism::Sequential);
        CoverAuditRecord {
            sample: i,
            grid_distance: d,
            certified_distance: d + slack,
            delta: spec.delta,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(u: &[f64], v: &[f64], w: &[f64]) -> ShallowNetwork<f64> {
        ShallowNetwork::new(
            Activation::Sigma,
            u.to_vec(),
            v.to_vec(),
            w.iter().map(|x| vec![*x]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy_bound(1, 1.0, 1.0).unwrap() - 21.0).abs() < 1e-12);
        assert!((entropy_bound(2, 1.0, 1.0).unwrap() - 48.0).abs() < 1e-12);
        assert!(entropy_bound(1, 1.0, 0.0).is_err());
        assert!(entropy_bound(1, 1.0, 1.5).is_err());
        assert!(entropy_bound(0, 1.0, 0.5).is_err());
    }

    #[test]
    fn entropy_monotonicity() {
        for p in 1..6 {
            for r in [0.5, 1.0, 2.0, 5.0] {
                for d in [1.0, 0.5, 0.1, 0.01] {
                    let e = entropy_bound(p, r, d).unwrap();
                    assert!(entropy_bound(p + 1, r, d).unwrap() > e);
                    assert!(entropy_bound(p, r * 1.5, d).unwrap() > e);
                    assert!(entropy_bound(p, r, d / 2.0).unwrap() > e);
                }
            }
        }
    }

    #[test]
    fn cover_size_examples() {
        assert_eq!(quantized_cover_size(1, 1.0, 1.0).unwrap(), BigUint::from(27u32));
        assert_eq!(quantized_cover_size(1, 1.0, 0.5).unwrap(), BigUint::from(125u32));
        let mut rng = substream(3, "cover-size", 0);
        for _ in 0..50 {
            let p = rng.random_range(1..=3usize);
            let r = rng.random_range(0.1..=2.0);
            let eps = rng.random_range(0.01..=1.0);
            let exact = quantized_cover_size(p, r, eps).unwrap();
            let bound = (2.0 * r / eps + 1.0).powi(3 * p as i32);
            assert!(exact.to_string().parse::<f64>().unwrap() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn log_cover_below_entropy_bound() {
        for p in 1..=4 {
            for r in [0.5, 1.0, 2.0, 7.5] {
                for d in [1.0, 0.3, 0.1, 1e-3] {
                    let spec = CoverSpec::new(p, r, d).unwrap();
                    assert!(spec.log2_cover_size() <= spec.entropy_bound());
                }
            }
        }
    }

    #[test]
    fn on_grid_network_is_fixed_point() {
        let spec = CoverSpec::new(2, 1.0, 1.0).unwrap();
        let eps = spec.epsilon();
        let g = net(&[3.0 * eps, -eps], &[0.0, 5.0 * eps], &[-2.0 * eps, eps]);
        let g1 = nearest_cover_point(&g, &spec).unwrap();
        assert_eq!(g, g1);
        assert_eq!(sup_distance(&g, &g1, 1000, Parallelism::Sequential), 0.0);
    }

    #[test]
    fn midpoint_parameters_stay_within_delta() {
        let spec = CoverSpec::new(2, 1.0, 0.1).unwrap();
        let eps = spec.epsilon();
        let g = net(&[10.5 * eps, -20.5 * eps], &[0.5 * eps, -3.5 * eps], &[7.5 * eps, -0.5 * eps]);
        let g1 = nearest_cover_point(&g, &spec).unwrap();
        assert!(sup_distance(&g, &g1, 10_000, Parallelism::Sequential) <= 0.1);
        assert!(g1.max_abs_parameter() <= 1.0);
    }

    #[test]
    fn rejects_out_of_class_parameters() {
        let spec = CoverSpec::new(1, 1.0, 0.5).unwrap();
        assert!(nearest_cover_point(&net(&[1.5], &[0.0], &[0.0]), &spec).is_err());
        assert!(nearest_cover_point(&net(&[0.5, 0.5], &[0.0, 0.0], &[0.0, 0.0]), &spec).is_err());
    }

    #[test]
    fn random_cover_audit() {
        let spec = CoverSpec::new(2, 1.0, 0.1).unwrap();
        let records = cover_audit(&spec, 20, 11, 10_000, Parallelism::default());
        assert!(records.iter().all(CoverAuditRecord::passes));
    }

    #[test]
    fn chain_audit_identity_and_random_pair() {
        let xs = crate::par::unit_grid(2001);
        let g = net(&[0.5, -0.25], &[0.1, -0.7], &[0.9, 0.3]);
        let audit = lipschitz_chain_audit(&g, &g, 1.0, &xs).unwrap();
        assert_eq!(audit.epsilon, 0.0);
        assert!(audit.links.iter().all(|l| l.min_slack == 0.0));

        let mut rng = substream(5, "chain", 0);
        for _ in 0..10 {
            let g = random_sigma_network(&mut rng, 3, 2.0);
            let spec = CoverSpec::new(3, 2.0, 0.3).unwrap();
            let g1 = nearest_cover_point(&g, &spec).unwrap();
            let audit = lipschitz_chain_audit(&g, &g1, 2.0, &xs).unwrap();
            assert!(audit.holds(1e-12), "{audit:?}");
            assert!(audit.epsilon <= spec.epsilon());
            assert!(audit.links.windows(2).all(|w| w[0].min_slack <= w[1].min_slack));
            assert!(audit.tightest().min_slack <= audit.slackest().min_slack);
        }
    }
}
