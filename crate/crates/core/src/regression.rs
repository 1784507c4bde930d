//! Simulated nonparametric regression with the fixed-hidden-layer
//! `sigma`-network class: sampling, constrained least squares, Monte-Carlo
//! prediction error and rate sweeps.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::activation::sigma;
use crate::bls::BoxLsProblem;
use crate::complexity::entropy_bound;
use crate::error::{Error, Result};
use crate::network::{Activation, ShallowNetwork};
use crate::par::{self, Parallelism};
use crate::rng::substream;
use crate::smooth::{derivative_count, estimate_holder_norm, SmoothFunction};
use crate::stats::{loglog_slope, mean_and_stderr, median};
use crate::taylor::{fixed_hidden_layer, parameter_radius};

/// Grid used when checking a truth function against the constraint radius.
const HOLDER_CHECK_GRID: usize = 4097;
/// Relative slack for rounding in the grid estimate of the Hölder norm.
const HOLDER_CHECK_RTOL: f64 = 1e-9;
/// Tolerance of the first-order optimality certificate on every fit.
pub const KKT_TOLERANCE: f64 = 1e-8;

/// Law of the covariate on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Design {
    #[default]
    Uniform,
}

impl Design {
    pub fn sample<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            Design::Uniform => rng.random::<f64>(),
        }
    }
}

/// `M_n = ceil(n^(1/(2 beta + 1)))`, guarded against `n^(1/(2beta+1))`
/// landing a hair above an exact integer.
pub fn schedule_m(n: usize, beta: f64) -> usize {
    let root = (n as f64).powf(1.0 / (2.0 * beta + 1.0));
    let nearest = root.round();
    let m = if (root - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        root.ceil()
    };
    (m as usize).max(1)
}

/// Theoretical prediction-error exponent `-2 beta / (2 beta + 1)`.
pub fn theoretical_exponent(beta: f64) -> f64 {
    -2.0 * beta / (2.0 * beta + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionConfig {
    pub n: usize,
    pub beta: f64,
    /// Constraint radius: fitted output weights satisfy `|U_j| <= k`.
    pub k: f64,
    pub design: Design,
    /// Standard deviation of the Gaussian noise.
    pub noise_scale: f64,
    pub seed: u64,
}

impl RegressionConfig {
    /// Config for `f0` with radius `k`; refuses a truth whose estimated
    /// Hölder norm exceeds `k`.
    pub fn new(f0: &dyn SmoothFunction, n: usize, k: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("sample size must be at least 1"));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::invalid(format!("K must be positive and finite, got {k}")));
        }
        let estimate = estimate_holder_norm(f0, HOLDER_CHECK_GRID, Parallelism::Sequential);
        if estimate > k * (1.0 + HOLDER_CHECK_RTOL) {
            return Err(Error::invalid(format!(
                "truth {} has estimated Hölder norm {estimate} above K = {k}",
                f0.label()
            )));
        }
        Ok(Self::unchecked(n, f0.beta(), k, seed))
    }

    /// Config without the truth check, for fits on externally supplied data.
    pub fn unchecked(n: usize, beta: f64, k: f64, seed: u64) -> Self {
        Self {
            n,
            beta,
            k,
            design: Design::Uniform,
            noise_scale: 1.0,
            seed,
        }
    }

    pub fn with_noise(mut self, scale: f64) -> Self {
        self.noise_scale = scale;
        self
    }

    pub fn m_n(&self) -> usize {
        schedule_m(self.n, self.beta)
    }

    pub fn p_n(&self) -> usize {
        (self.m_n() + 1) * derivative_count(self.beta)
    }

    pub fn r_n(&self) -> f64 {
        parameter_radius(self.k, self.beta, self.m_n())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// `n` draws of `(X, f0(X) + scale * eps)`, reproducible from `cfg.seed`.
pub fn simulate_sample(f0: &dyn SmoothFunction, cfg: &RegressionConfig) -> Dataset {
    let mut rng = substream(cfg.seed, "sample", 0);
    let x: Vec<f64> = (0..cfg.n).map(|_| cfg.design.sample(&mut rng)).collect();
    // noise from its own stream so it is independent of the design draws
    let mut noise = substream(cfg.seed, "noise", 0);
    let y = x
        .iter()
        .map(|&xi| {
            let eps: f64 = noise.sample(StandardNormal);
            f0.value(xi) + cfg.noise_scale * eps
        })
        .collect();
    Dataset { x, y }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    /// `sqrt(mean (Y_i - g(X_i))^2)` over the sample.
    pub residual_rms: f64,
    /// Output weights sitting on the constraint boundary.
    pub clipped: usize,
    pub kkt_violation: f64,
    pub iterations: usize,
    pub rank_deficient: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErmFit {
    pub network: ShallowNetwork<f64>,
    pub diagnostics: FitDiagnostics,
}

/// Least squares over the reduced class: hidden layer fixed to
/// `fixed_hidden_layer(beta, M_n)`, output weights `|U|_inf <= K`.
pub fn erm_fit(data: &Dataset, cfg: &RegressionConfig) -> Result<ErmFit> {
    if data.is_empty() || data.x.len() != data.y.len() {
        return Err(Error::invalid("dataset must be non-empty with matching x and y"));
    }
    let m = cfg.m_n();
    let (v, w) = fixed_hidden_layer(cfg.beta, m);
    let p = v.len();
    let n = data.len();
    let mut warnings = Vec::new();
    if n < p {
        warnings.push(format!("sample size {n} below width {p}"));
    }
    let design = DMatrix::from_fn(n, p, |i, j| sigma(v[j] + data.x[i]));
    let y = DVector::from_column_slice(&data.y);
    let problem = BoxLsProblem {
        gram: design.tr_mul(&design) / n as f64,
        rhs: design.tr_mul(&y) / n as f64,
        bound: cfg.k,
    };
    let solution = problem.solve();
    if solution.rank_deficient {
        warnings.push("singular design; minimum-norm solution used".into());
    }
    let residual = &y - &design * &solution.u;
    let clipped = solution.u.iter().filter(|u| u.abs() >= cfg.k).count();
    let network = ShallowNetwork::new(
        Activation::Sigma,
        solution.u.iter().copied().collect(),
        v,
        w.into_iter().map(|x| vec![x]).collect(),
    )?;
    Ok(ErmFit {
        network,
        diagnostics: FitDiagnostics {
            residual_rms: (residual.norm_squared() / n as f64).sqrt(),
            clipped,
            kkt_violation: solution.kkt_violation,
            iterations: solution.iterations,
            rank_deficient: solution.rank_deficient,
            warnings,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Monte-Carlo estimate of `E (g(X) - f0(X))^2` from `rng`.
pub fn prediction_error_with<R: Rng>(
    g: &ShallowNetwork<f64>,
    f0: &dyn SmoothFunction,
    design: Design,
    mc_points: usize,
    rng: &mut R,
) -> McEstimate {
    assert!(mc_points >= 1, "need at least one Monte-Carlo point");
    let sq: Vec<f64> = (0..mc_points)
        .map(|_| {
            let x = design.sample(rng);
            (g.eval1(x) - f0.value(x)).powi(2)
        })
        .collect();
    let (mean, stderr) = mean_and_stderr(&sq);
    McEstimate { mean, stderr }
}

pub fn prediction_error(
    g: &ShallowNetwork<f64>,
    f0: &dyn SmoothFunction,
    mc_points: usize,
    seed: u64,
) -> McEstimate {
    prediction_error_with(g, f0, Design::Uniform, mc_points, &mut substream(seed, "mc", 0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub n: usize,
    pub rep: usize,
    /// Seed of this replicate's config; rerunning it reproduces the row.
    pub seed: u64,
    pub error: f64,
    pub stderr: f64,
    pub residual_rms: f64,
    pub clipped: usize,
    pub kkt_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub k: f64,
    pub noise_scale: f64,
    pub mc_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepLevel {
    pub n: usize,
    pub m: usize,
    pub median: f64,
    /// Normal-theory standard error of the median, `1.2533 sd / sqrt(reps)`.
    pub median_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub beta: f64,
    pub records: Vec<ExperimentRecord>,
    pub levels: Vec<SweepLevel>,
    /// Slope of `log median` against `log n`.
    pub slope_raw: f64,
    /// Slope of `log(median / log2 n)` against `log n`.
    pub slope_log_adjusted: f64,
    pub theoretical: f64,
}

impl SweepResult {
    pub fn worst_kkt_violation(&self) -> f64 {
        self.records.iter().map(|r| r.kkt_violation).fold(0.0, f64::max)
    }

    /// Consecutive levels whose median rises by more than one standard
    /// error of the larger-`n` median.
    pub fn monotonicity_breaks(&self) -> Vec<(usize, usize)> {
        self.levels
            .windows(2)
            .filter(|w| w[1].median > w[0].median + w[1].median_stderr)
            .map(|w| (w[0].n, w[1].n))
            .collect()
    }
}

/// Seed of replicate `rep` at sample size `n`.
pub fn replicate_seed(seed: u64, n: usize, rep: usize) -> u64 {
    substream(seed, "replicate", ((n as u64) << 24) | rep as u64).random()
}

/// One simulate, fit, evaluate cycle.
pub fn run_replicate(
    f0: &dyn SmoothFunction,
    n: usize,
    rep: usize,
    seed: u64,
    opts: &SweepOptions,
) -> Result<ExperimentRecord> {
    let rep_seed = replicate_seed(seed, n, rep);
    let cfg = RegressionConfig::unchecked(n, f0.beta(), opts.k, rep_seed).with_noise(opts.noise_scale);
    let data = simulate_sample(f0, &cfg);
    let fit = erm_fit(&data, &cfg)?;
    let err = prediction_error_with(
        &fit.network,
        f0,
        cfg.design,
        opts.mc_points,
        &mut substream(rep_seed, "mc", 0),
    );
    Ok(ExperimentRecord {
        n,
        rep,
        seed: rep_seed,
        error: err.mean,
        stderr: err.stderr,
        residual_rms: fit.diagnostics.residual_rms,
        clipped: fit.diagnostics.clipped,
        kkt_violation: fit.diagnostics.kkt_violation,
    })
}

/// Replicated fits at every `n`; replicates run as independent tasks and are
/// reduced in `(n, rep)` order.
pub fn rate_sweep(
    f0: &dyn SmoothFunction,
    n_list: &[usize],
    replicates: usize,
    seed: u64,
    opts: &SweepOptions,
    mode: Parallelism,
) -> Result<SweepResult> {
    if n_list.len() < 4 {
        return Err(Error::invalid("rate sweep needs at least four sample sizes"));
    }
    if replicates < 10 {
        return Err(Error::invalid("rate sweep needs at least ten replicates"));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sample sizes must be strictly increasing"));
    }
    // refuse truths outside the constraint set before doing any work
    RegressionConfig::new(f0, n_list[0], opts.k, seed)?;
    let tasks: Vec<(usize, usize)> = n_list
        .iter()
        .flat_map(|&n| (0..replicates).map(move |rep| (n, rep)))
        .collect();
    let mut records = par::map(mode, &tasks, |&(n, rep)| run_replicate(f0, n, rep, seed, opts))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| (r.n, r.rep));

    let levels: Vec<SweepLevel> = n_list
        .iter()
        .map(|&n| {
            let errors: Vec<f64> = records.iter().filter(|r| r.n == n).map(|r| r.error).collect();
            let (_, se_mean) = mean_and_stderr(&errors);
            SweepLevel {
                n,
                m: schedule_m(n, f0.beta()),
                median: median(&errors),
                median_stderr: 1.2533 * se_mean,
            }
        })
        .collect();
    let ns: Vec<f64> = levels.iter().map(|l| l.n as f64).collect();
    let meds: Vec<f64> = levels.iter().map(|l| l.median).collect();
    let adjusted: Vec<f64> = levels.iter().map(|l| l.median / (l.n as f64).log2()).collect();
    Ok(SweepResult {
        beta: f0.beta(),
        slope_raw: loglog_slope(&ns, &meds),
        slope_log_adjusted: loglog_slope(&ns, &adjusted),
        theoretical: theoretical_exponent(f0.beta()),
        records,
        levels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleComponents {
    /// Squared-error approximation term `inf_g ||g - f0||^2`.
    pub approximation: f64,
    /// Entropy bound of the class at scale `delta`.
    pub entropy: f64,
    pub n: usize,
    pub delta: f64,
    pub k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub components: OracleComponents,
    pub approximation_term: f64,
    pub complexity_term: f64,
    pub discretization_term: f64,
    pub rhs: f64,
}

/// `4 [approx + 4 K^2 (18 H + 72) / n + 64 delta K]`, split into its three
/// terms (each including the leading factor 4).
pub fn oracle_inequality_report(c: OracleComponents) -> Result<OracleReport> {
    if !(c.delta > 0.0 && c.delta <= 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1], got {}", c.delta)));
    }
    if c.n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let approximation_term = 4.0 * c.approximation;
    let complexity_term = 4.0 * 4.0 * c.k * c.k * (18.0 * c.entropy + 72.0) / c.n as f64;
    let discretization_term = 4.0 * 64.0 * c.delta * c.k;
    Ok(OracleReport {
        components: c,
        approximation_term,
        complexity_term,
        discretization_term,
        rhs: approximation_term + complexity_term + discretization_term,
    })
}

/// Components on the rate schedules: `M = M_n`, width `P_n`, radius
/// `R_n`, `delta = n^(-2beta/(2beta+1))`, approximation `(K M^-beta)^2`.
pub fn scheduled_components(beta: f64, k: f64, n: usize) -> Result<OracleComponents> {
    let cfg = RegressionConfig::unchecked(n, beta, k, 0);
    let delta = (n as f64).powf(theoretical_exponent(beta));
    let m = cfg.m_n() as f64;
    Ok(OracleComponents {
        approximation: (k * m.powf(-beta)).powi(2),
        entropy: entropy_bound(cfg.p_n(), cfg.r_n(), delta)?,
        n,
        delta,
        k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth::TestFunction;

    #[test]
    fn schedule_values() {
        assert_eq!(schedule_m(1, 1.0), 1);
        // 1000^(1/3) is 10 up to rounding
        assert_eq!(schedule_m(1000, 1.0), 10);
        assert_eq!(schedule_m(1001, 1.0), 11);
        assert_eq!(schedule_m(32, 2.0), 2);
        assert_eq!(schedule_m(33, 2.0), 3);
        assert!((theoretical_exponent(1.0) + 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(theoretical_exponent(2.0), -0.8);
        let f = TestFunction::by_name("sin", 2.0).unwrap();
        let cfg = RegressionConfig::new(&f, 1024, f.holder_radius(), 1).unwrap();
        assert_eq!(cfg.m_n(), 4);
        assert_eq!(cfg.p_n(), 10);
        assert_eq!(cfg.r_n(), f.holder_radius() + 49.0);
    }

    #[test]
    fn refuses_truth_above_radius() {
        let f = TestFunction::by_name("sin", 2.0).unwrap();
        assert!(RegressionConfig::new(&f, 100, 1.0, 0).is_err());
        assert!(RegressionConfig::new(&f, 0, 100.0, 0).is_err());
    }

    #[test]
    fn noiseless_sample_is_exact_and_reproducible() {
        let f = TestFunction::by_name("exp", 1.5).unwrap();
        let cfg = RegressionConfig::unchecked(500, 1.5, 10.0, 3).with_noise(0.0);
        let d = simulate_sample(&f, &cfg);
        assert!(d.x.iter().zip(&d.y).all(|(&x, &y)| y == f.value(x)));
        assert_eq!(d, simulate_sample(&f, &cfg));
        let noisy = simulate_sample(&f, &cfg.clone().with_noise(1.0));
        assert_eq!(noisy.x, d.x);
    }

    #[test]
    fn noise_mean_is_centred() {
        let f = TestFunction::polynomial(vec![0.0], 1.0).unwrap();
        let n = 100_000;
        let d = simulate_sample(&f, &RegressionConfig::unchecked(n, 1.0, 1.0, 11));
        let mean = d.y.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn polynomial_truth_in_class_is_recovered() {
        // degree 1 < beta = 2; Taylor coefficients bounded by K
        let f = TestFunction::polynomial(vec![0.3, -0.7], 2.0).unwrap();
        let k = 2.0;
        let cfg = RegressionConfig::unchecked(400, 2.0, k, 5).with_noise(0.0);
        let fit = erm_fit(&simulate_sample(&f, &cfg), &cfg).unwrap();
        assert!(fit.diagnostics.residual_rms <= 1e-6, "{:?}", fit.diagnostics);
        assert!(fit.diagnostics.kkt_violation <= KKT_TOLERANCE);
    }

    #[test]
    fn tiny_radius_clips_everything() {
        let f = TestFunction::by_name("sin", 1.0).unwrap();
        let cfg = RegressionConfig::unchecked(300, 1.0, 1e-6, 2);
        let fit = erm_fit(&simulate_sample(&f, &cfg), &cfg).unwrap();
        assert_eq!(fit.diagnostics.clipped, cfg.p_n());
        assert!(fit.diagnostics.kkt_violation <= KKT_TOLERANCE);
    }

    #[test]
    fn fitted_network_is_bounded() {
        let f = TestFunction::by_name("sin", 2.0).unwrap();
        let k = f.holder_radius();
        let cfg = RegressionConfig::unchecked(64, 2.0, k, 9);
        let fit = erm_fit(&simulate_sample(&f, &cfg), &cfg).unwrap();
        let bound = 2.0 * 2.0 * k;
        assert!(par::unit_grid(10_001).iter().all(|&x| fit.network.eval1(x).abs() <= bound));
        assert!(fit.diagnostics.kkt_violation <= KKT_TOLERANCE);
    }

    #[test]
    fn prediction_error_of_shifted_truth() {
        let f = TestFunction::by_name("sin", 1.0).unwrap();
        let g = crate::taylor::build_sigma_network(&TestFunction::polynomial(vec![0.0], 1.0).unwrap(), 4).unwrap();
        // g == 0, so the error is E sin^2(2 pi X) = 1/2
        let est = prediction_error(&g, &f, 200_000, 1);
        assert!((est.mean - 0.5).abs() < 3.0 * est.stderr, "{est:?}");

        let c = 0.25;
        let zero = TestFunction::polynomial(vec![0.0], 1.0).unwrap();
        let shifted = crate::taylor::build_sigma_network(&TestFunction::polynomial(vec![c], 1.0).unwrap(), 4).unwrap();
        let est = prediction_error(&shifted, &zero, 1000, 2);
        assert!((est.mean - c * c).abs() < 1e-12);
        assert_eq!(prediction_error(&g, &zero, 1000, 3).mean, 0.0);
    }

    #[test]
    fn prediction_error_matches_reference() {
        let f = TestFunction::by_name("sin", 2.0).unwrap();
        let cfg = RegressionConfig::unchecked(256, 2.0, f.holder_radius(), 4);
        let fit = erm_fit(&simulate_sample(&f, &cfg), &cfg).unwrap();
        let est = prediction_error(&fit.network, &f, 10_000, 8);
        let reference = prediction_error(&fit.network, &f, 1_000_000, 99);
        assert!((est.mean - reference.mean).abs() <= 3.0 * est.stderr, "{est:?} vs {reference:?}");
    }

    #[test]
    fn sweep_is_reproducible_and_checks_inputs() {
        let f = TestFunction::by_name("sin", 1.0).unwrap();
        let opts = SweepOptions { k: f.holder_radius(), noise_scale: 1.0, mc_points: 500 };
        let ns = [64, 128, 256, 512];
        let a = rate_sweep(&f, &ns, 10, 7, &opts, Parallelism::Sequential).unwrap();
        let b = rate_sweep(&f, &ns, 10, 7, &opts, Parallelism::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 40);
        assert!(a.records.iter().all(|r| r.error >= 0.0));
        assert!(rate_sweep(&f, &ns[..3], 10, 7, &opts, Parallelism::Sequential).is_err());
        assert!(rate_sweep(&f, &ns, 9, 7, &opts, Parallelism::Sequential).is_err());
        let one = run_replicate(&f, 128, 3, 7, &opts).unwrap();
        assert_eq!(&one, a.records.iter().find(|r| r.n == 128 && r.rep == 3).unwrap());
    }

    #[test]
    fn oracle_report_terms() {
        let zero = OracleComponents { approximation: 0.0, entropy: 0.0, n: 10, delta: 1.0, k: 0.0 };
        assert_eq!(oracle_inequality_report(zero).unwrap().rhs, 0.0);
        let c = OracleComponents { approximation: 0.5, entropy: 2.0, n: 8, delta: 0.25, k: 1.0 };
        let r = oracle_inequality_report(c).unwrap();
        assert_eq!(r.approximation_term, 2.0);
        assert_eq!(r.complexity_term, 4.0 * 4.0 * (36.0 + 72.0) / 8.0);
        assert_eq!(r.discretization_term, 64.0);
        assert!(oracle_inequality_report(OracleComponents { delta: 0.0, ..c }).is_err());
        assert!(oracle_inequality_report(OracleComponents { delta: 1.5, ..c }).is_err());
    }

    #[test]
    fn scheduled_rhs_decreases_in_n() {
        for beta in [1.0, 2.0] {
            let rhs: Vec<f64> = (8..=20)
                .map(|e| {
                    let c = scheduled_components(beta, 5.0, 1 << e).unwrap();
                    oracle_inequality_report(c).unwrap().rhs
                })
                .collect();
            assert!(rhs.windows(2).all(|w| w[1] < w[0]), "{rhs:?}");
        }
    }
}
