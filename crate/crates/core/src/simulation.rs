//! Scenario generators and Monte Carlo experiments.
//!
//! Every trial draws from its own ChaCha stream, selected by the base seed
//! and a stream index that depends only on the trial's coordinates, so
//! results do not depend on how trials are scheduled across threads.

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::median::{
    loss_gradient, loss_hessian, min_norm_subgradient, MedianSolver, DEFAULT_TOL_GRAD,
};
use crate::profile::{VoterProfile, WeightedProfile};
use crate::skewness::{skewness, skewness_numeric};
use crate::strategy::{
    best_response_weighted, best_response_with, byzantine_bound, BestResponseOptions,
};
use crate::vector_core::{Point, SpdMatrix};

/// Distribution of a voter's preferred vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PreferenceDistribution {
    IsotropicGaussian { dim: usize },
    DiagonalGaussian { sigmas: Vec<f64> },
    /// The atoms `(+-x, +-1)`; sampling `V` voters yields `V` copies of each.
    FourCorner { x: f64 },
    UniformBall { dim: usize, radius: f64 },
}

impl PreferenceDistribution {
    pub fn dim(&self) -> usize {
        match self {
            Self::IsotropicGaussian { dim } | Self::UniformBall { dim, .. } => *dim,
            Self::DiagonalGaussian { sigmas } => sigmas.len(),
            Self::FourCorner { .. } => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::IsotropicGaussian { dim } => *dim >= 1,
            Self::DiagonalGaussian { sigmas } => {
                !sigmas.is_empty() && sigmas.iter().all(|s| s.is_finite() && *s > 0.0)
            }
            Self::FourCorner { x } => x.is_finite() && *x > 0.0,
            Self::UniformBall { dim, radius } => *dim >= 1 && radius.is_finite() && *radius > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid distribution parameters: {self:?}")))
        }
    }

    pub fn corners(x: f64) -> [Point; 4] {
        [
            Point::from_vec(vec![-x, -1.0]),
            Point::from_vec(vec![-x, 1.0]),
            Point::from_vec(vec![x, -1.0]),
            Point::from_vec(vec![x, 1.0]),
        ]
    }
}

/// Seed of trial `index` under `base`: first output of stream `index` of the
/// ChaCha generator seeded with `base`.
pub fn trial_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng.next_u64()
}

fn stream_index(v: usize, trial: usize) -> u64 {
    ((v as u64) << 24) | trial as u64
}

/// `V` i.i.d. voters (or `V` copies of each corner).
pub fn sample_profile(dist: &PreferenceDistribution, v: usize, seed: u64) -> Result<VoterProfile> {
    dist.validate()?;
    if v == 0 {
        return Err(Error::InvalidInput("voter count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let voters = match dist {
        PreferenceDistribution::IsotropicGaussian { dim } => (0..v)
            .map(|_| Point::from_fn(*dim, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect(),
        PreferenceDistribution::DiagonalGaussian { sigmas } => (0..v)
            .map(|_| Point::from_fn(sigmas.len(), |i, _| sigmas[i] * rng.sample::<f64, _>(StandardNormal)))
            .collect(),
        PreferenceDistribution::FourCorner { x } => {
            let atoms = PreferenceDistribution::corners(*x);
            (0..v).flat_map(|_| atoms.clone()).collect()
        }
        PreferenceDistribution::UniformBall { dim, radius } => (0..v)
            .map(|_| {
                let dir = loop {
                    let g = Point::from_fn(*dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                    if g.norm() > 1e-12 {
                        break g.normalize();
                    }
                };
                dir * (radius * rng.random::<f64>().powf(1.0 / *dim as f64))
            })
            .collect(),
    };
    VoterProfile::new(voters)
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub distribution: PreferenceDistribution,
    pub v_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.distribution.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        if self.v_grid.is_empty() || self.v_grid.contains(&0) {
            return Err(Error::InvalidInput("v_grid must list positive voter counts".into()));
        }
        if self.v_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("v_grid must be strictly ascending".into()));
        }
        if !(self.epsilon >= 0.0) || !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidInput("need epsilon >= 0 and 0 < delta < 1".into()));
        }
        Ok(())
    }
}

/// The adversarial four-corner profile with the explicit truthful and
/// strategic votes of the non-strategyproofness construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Instance {
    pub x: f64,
    pub v: usize,
    /// Root of `|grad L0(a (X^3, 1))| = 1/V`, `L0` the sum of distances to
    /// the four corners.
    pub alpha_v: f64,
    pub g_v: Point,
    pub theta0: Point,
    pub strategic_vote: Point,
    /// Hessian of `L0` at the origin.
    pub hessian: DMatrix<f64>,
    /// Four corners with multiplicity `V` each.
    pub profile: WeightedProfile,
}

pub fn build_theorem1_instance(x: f64, v: usize) -> Result<Theorem1Instance> {
    if !(x >= 8.0) || !x.is_finite() {
        return Err(Error::InvalidInput(format!("X must be >= 8, got {x}")));
    }
    if v == 0 {
        return Err(Error::InvalidInput("V must be positive".into()));
    }
    let profile = WeightedProfile::from_counts(
        PreferenceDistribution::corners(x).to_vec(),
        &[v as f64; 4],
    )?;
    // L0 is the sum over the four atoms: four times the averaged loss.
    let grad_sum = |z: &Point| -> Result<Point> { Ok(loss_gradient(&profile, z)? * 4.0) };
    let ray = Point::from_vec(vec![x.powi(3), 1.0]);
    let target = 1.0 / v as f64;
    let excess = |c: f64| -> Result<f64> { Ok(grad_sum(&(&ray * c))?.norm() - target) };
    if excess(1.0)? <= 0.0 {
        return Err(Error::BracketFailure(format!(
            "gradient norm at c = 1 does not exceed 1/V for X = {x}, V = {v}"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let alpha_v = if excess(hi)?.abs() < excess(lo)?.abs() { hi } else { lo };
    let g_v = &ray * alpha_v;
    let grad = grad_sum(&g_v)?;
    let sqrt_v = (v as f64).sqrt();
    let theta0 = &g_v + &grad / sqrt_v;
    let hessian = loss_hessian(&profile, &Point::zeros(2))? * 4.0;
    let hg = &hessian * &g_v;
    let hhg = &hessian * &hg;
    let coef = 2.0 / sqrt_v * hg.dot(&hhg) / hhg.norm_squared();
    let strategic_vote = &theta0 - &hhg * coef;
    Ok(Theorem1Instance {
        x,
        v,
        alpha_v,
        g_v,
        theta0,
        strategic_vote,
        hessian,
        profile,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Outcome {
    pub x: f64,
    pub v: usize,
    pub truthful_median: Vec<f64>,
    pub truthful_dist: f64,
    /// `V^{-3/2}`.
    pub predicted_truthful_dist: f64,
    pub strategic_median: Vec<f64>,
    pub strategic_dist: f64,
    /// `truthful_dist / strategic_dist` for the explicit strategic vote.
    pub ratio: f64,
    /// `(1 + X^2) / (4X)`.
    pub limit_ratio: f64,
    /// `(X^2 - 8X + 1) / (8X)`.
    pub guaranteed_gain: f64,
    pub strategic_vote_achievable: bool,
    /// Gain of the numerical best response, when requested.
    pub best_response_gain: Option<f64>,
}

impl Theorem1Instance {
    /// Medians of the truthful and explicit strategic votes.
    pub fn evaluate(&self, tol_grad: f64) -> Result<Theorem1Outcome> {
        let solve = |vote: &Point, start: &Point| {
            MedianSolver::with_tol(tol_grad)
                .starting_at(start.clone())
                .solve(&self.profile.with_extra_voter(vote)?)
        };
        let truthful = solve(&self.theta0, &self.g_v)?;
        let strategic = solve(&self.strategic_vote, &self.strategic_vote)?;
        let truthful_dist = (&truthful.point - &self.theta0).norm();
        let strategic_dist = (&strategic.point - &self.theta0).norm();
        let x = self.x;
        let achievable = min_norm_subgradient(&self.profile, &self.strategic_vote)?.norm() <= 0.25 / self.v as f64;
        Ok(Theorem1Outcome {
            x,
            v: self.v,
            truthful_median: truthful.point.iter().copied().collect(),
            truthful_dist,
            predicted_truthful_dist: (self.v as f64).powf(-1.5),
            strategic_median: strategic.point.iter().copied().collect(),
            strategic_dist,
            ratio: truthful_dist / strategic_dist,
            limit_ratio: (1.0 + x * x) / (4.0 * x),
            guaranteed_gain: (x * x - 8.0 * x + 1.0) / (8.0 * x),
            strategic_vote_achievable: achievable,
            best_response_gain: None,
        })
    }

    /// Numerical best response of the voter at `theta0`.
    pub fn best_response(&self, tol_grad: f64, restarts: usize) -> Result<crate::strategy::StrategyReport> {
        let opts = BestResponseOptions {
            tol_grad,
            restarts,
            ..BestResponseOptions::default()
        };
        best_response_weighted(&self.theta0, &self.profile, &SpdMatrix::identity(2), &opts)
    }
}

/// Solver tolerance used for the four-corner construction, whose distances
/// are of order `V^{-3/2}`.
pub const THEOREM1_TOL_GRAD: f64 = 1e-15;

/// Evaluates the construction over a grid of `X` and `V`.
pub fn theorem1_sweep(xs: &[f64], v_grid: &[usize], with_best_response: bool) -> Vec<Result<Theorem1Outcome>> {
    let cells: Vec<(f64, usize)> = xs.iter().flat_map(|&x| v_grid.iter().map(move |&v| (x, v))).collect();
    cells
        .par_iter()
        .map(|&(x, v)| {
            let inst = build_theorem1_instance(x, v)?;
            let mut out = inst.evaluate(THEOREM1_TOL_GRAD)?;
            if with_best_response {
                out.best_response_gain = Some(inst.best_response(THEOREM1_TOL_GRAD, 5)?.gain_alpha);
            }
            Ok(out)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct AsymptoticOptions {
    /// Offsets of `theta0` beyond the achievable boundary, in units of `1/V`
    /// times the boundary gradient.
    pub gammas: Vec<f64>,
    pub restarts: usize,
    /// Aggregate with the `Sigma`-skewed median instead of the plain one.
    pub aggregator_skew: Option<SpdMatrix>,
    /// Also run the sphere-search skewness for every trial.
    pub numeric_skew: bool,
}

impl Default for AsymptoticOptions {
    fn default() -> Self {
        Self {
            gammas: vec![1.5, 3.0, 10.0],
            restarts: 5,
            aggregator_skew: None,
            numeric_skew: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticTrial {
    pub v: usize,
    pub trial: usize,
    pub seed: u64,
    pub gains: Vec<f64>,
    pub max_gain: f64,
    /// Closed-form `Skew(S^{-1} H S^{-1})` for the estimated Hessian.
    pub skew: f64,
    pub skew_numeric: Option<f64>,
    /// `max_gain <= skew + epsilon`.
    pub within: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticSummary {
    pub v: usize,
    pub completed: usize,
    pub max_gain: f64,
    pub median_gain: f64,
    pub q90_gain: f64,
    pub q95_gain: f64,
    pub mean_skew: f64,
    /// Fraction of all trials with `max_gain <= skew + epsilon`.
    pub fraction_within: f64,
    pub max_skew_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub epsilon: f64,
    pub delta: f64,
    pub trials: Vec<AsymptoticTrial>,
    pub summaries: Vec<AsymptoticSummary>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Point {
    loop {
        let x = Point::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        if x.norm() > 1e-12 {
            return x.normalize();
        }
    }
}

/// Crossing of the achievable boundary along `g + t u`.
fn boundary_on_ray(wp: &WeightedProfile, g: &Point, u: &Point) -> Result<Point> {
    let radius = 1.0 / wp.voter_count() as f64;
    let outside = |t: f64| -> Result<bool> { Ok(min_norm_subgradient(wp, &(g + u * t))?.norm() > radius) };
    let mut hi = 1e-6 * (1.0 + g.norm());
    let mut lo = 0.0;
    let mut doublings = 0;
    while !outside(hi)? {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::BracketFailure("achievable boundary not found along ray".into()));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if outside(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(g + u * lo)
}

/// Hessian of the `Sigma`-skewed averaged loss at the skewed median, in the
/// original coordinates: `Sigma H_y Sigma`.
fn skewed_hessian_estimate(profile: &VoterProfile, sigma: &SpdMatrix) -> Result<SpdMatrix> {
    let wy = WeightedProfile::uniform(profile).transformed(sigma)?;
    let gy = MedianSolver::default().solve(&wy)?.point;
    let hy = SpdMatrix::new(loss_hessian(&wy, &gy)?)?;
    hy.congruence(sigma)
}

fn asymptotic_trial(
    config: &ExperimentConfig,
    pref: &SpdMatrix,
    opts: &AsymptoticOptions,
    v: usize,
    trial: usize,
) -> AsymptoticTrial {
    let seed = trial_seed(config.seed, stream_index(v, trial));
    let mut record = AsymptoticTrial {
        v,
        trial,
        seed,
        gains: Vec::new(),
        max_gain: f64::NAN,
        skew: f64::NAN,
        skew_numeric: None,
        within: false,
        error: None,
    };
    let run = |record: &mut AsymptoticTrial| -> Result<()> {
        let d = config.distribution.dim();
        let profile = sample_profile(&config.distribution, v, seed)?;
        let sigma = opts.aggregator_skew.clone().unwrap_or_else(|| SpdMatrix::identity(d));
        let pref_inv = pref.inverse();
        let h = skewed_hessian_estimate(&profile, &sigma)?;
        let k = h.congruence(&pref_inv)?;
        record.skew = skewness(&k).value;
        if opts.numeric_skew {
            record.skew_numeric = Some(skewness_numeric(&k, 8, seed).value);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let wy = WeightedProfile::uniform(&profile).transformed(&sigma)?;
        let gy = MedianSolver::default().solve(&wy)?.point;
        let u = random_unit(&mut rng, d);
        let yb = boundary_on_ray(&wy, &gy, &u)?;
        let outward = min_norm_subgradient(&wy, &yb)?;
        let sigma_inv = sigma.inverse();
        let br = BestResponseOptions {
            restarts: opts.restarts,
            seed,
            aggregator_skew: opts.aggregator_skew.clone(),
            ..BestResponseOptions::default()
        };
        for &gamma in &opts.gammas {
            let ty = &yb + &outward * (gamma / v as f64);
            let theta0 = sigma_inv.matrix() * ty;
            let report = best_response_with(&theta0, &profile, pref, &br)?;
            record.gains.push(report.gain_alpha);
        }
        record.max_gain = record.gains.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        record.within = record.max_gain <= record.skew + config.epsilon;
        Ok(())
    };
    if let Err(e) = run(&mut record) {
        record.error = Some(e.to_string());
        record.within = false;
    }
    record
}

/// Gains of best responses at boundary-stress preferred vectors, compared
/// with the skewness of the estimated Hessian.
pub fn asymptotic_experiment(
    config: &ExperimentConfig,
    pref: &SpdMatrix,
    opts: &AsymptoticOptions,
) -> Result<AsymptoticReport> {
    config.validate()?;
    if pref.dim() != config.distribution.dim() {
        return Err(Error::DimensionMismatch {
            expected: config.distribution.dim(),
            found: pref.dim(),
        });
    }
    let cells: Vec<(usize, usize)> = config
        .v_grid
        .iter()
        .flat_map(|&v| (0..config.trials).map(move |t| (v, t)))
        .collect();
    let trials: Vec<AsymptoticTrial> = cells
        .par_iter()
        .map(|&(v, t)| asymptotic_trial(config, pref, opts, v, t))
        .collect();
    let summaries = config
        .v_grid
        .iter()
        .map(|&v| {
            let done: Vec<&AsymptoticTrial> = trials.iter().filter(|r| r.v == v && r.error.is_none()).collect();
            let mut gains: Vec<f64> = done.iter().map(|r| r.max_gain).collect();
            gains.sort_by(f64::total_cmp);
            let n = done.len().max(1) as f64;
            AsymptoticSummary {
                v,
                completed: done.len(),
                max_gain: gains.last().copied().unwrap_or(f64::NAN),
                median_gain: quantile(&gains, 0.5),
                q90_gain: quantile(&gains, 0.9),
                q95_gain: quantile(&gains, 0.95),
                mean_skew: done.iter().map(|r| r.skew).sum::<f64>() / n,
                // failed trials count against the fraction
                fraction_within: done.iter().filter(|r| r.within).count() as f64 / config.trials as f64,
                max_skew_gap: done
                    .iter()
                    .filter_map(|r| r.skew_numeric.map(|s| (s - r.skew).abs()))
                    .fold(0.0, f64::max),
            }
        })
        .collect();
    Ok(AsymptoticReport {
        epsilon: config.epsilon,
        delta: config.delta,
        trials,
        summaries,
    })
}

/// Aggregator skew `Sigma` that makes `S^{-1} Sigma H_y Sigma S^{-1}` close
/// to a multiple of the identity for `profile`, by fixed-point iteration.
/// A heuristic: the optimal skew is not known in closed form.
pub fn balancing_skew(profile: &VoterProfile, pref: &SpdMatrix, iterations: usize) -> Result<SpdMatrix> {
    let d = profile.dim();
    let pref_inv = pref.inverse();
    let mut sigma = SpdMatrix::identity(d);
    let mut best = (f64::INFINITY, sigma.clone());
    for _ in 0..=iterations {
        let k = skewed_hessian_estimate(profile, &sigma)?.congruence(&pref_inv)?;
        let s = skewness(&k).value;
        if s < best.0 {
            best = (s, sigma.clone());
        }
        let root = sigma.sqrt();
        let next = k.inverse().congruence(&root)?;
        let trace = next.matrix().trace() / d as f64;
        sigma = next.scaled(1.0 / trace)?;
    }
    Ok(best.1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTrial {
    pub v: usize,
    pub trial: usize,
    pub seed: u64,
    pub median_error: f64,
    pub hessian_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub reference_v: usize,
    pub trials: Vec<ConvergenceTrial>,
    /// Per grid point, the median over trials.
    pub median_errors: Vec<f64>,
    pub hessian_errors: Vec<f64>,
    pub median_slope: f64,
    pub hessian_slope: f64,
    /// `median_slope <= -0.4`.
    pub median_slope_ok: bool,
    pub hessian_monotone: bool,
}

fn loglog_slope(xs: &[usize], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| **y > 0.0)
        .map(|(x, y)| ((*x as f64).ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Decay of the sample median and Hessian towards a reference sample ten
/// times larger than the largest grid point.
pub fn convergence_diagnostics(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let reference_v = 10 * config.v_grid.last().copied().unwrap_or(1);
    let reference = sample_profile(&config.distribution, reference_v, trial_seed(config.seed, u64::MAX))?;
    let wr = WeightedProfile::uniform(&reference);
    let g_ref = MedianSolver::with_tol(1e-12).solve(&wr)?.point;
    let h_ref = loss_hessian(&wr, &g_ref)?;

    let cells: Vec<(usize, usize)> = config
        .v_grid
        .iter()
        .flat_map(|&v| (0..config.trials).map(move |t| (v, t)))
        .collect();
    let trials: Vec<ConvergenceTrial> = cells
        .par_iter()
        .map(|&(v, trial)| -> Result<ConvergenceTrial> {
            let seed = trial_seed(config.seed, stream_index(v, trial));
            let wp = WeightedProfile::uniform(&sample_profile(&config.distribution, v, seed)?);
            let g = MedianSolver::with_tol(DEFAULT_TOL_GRAD).solve(&wp)?.point;
            let h = loss_hessian(&wp, &g_ref)?;
            Ok(ConvergenceTrial {
                v,
                trial,
                seed,
                median_error: (g - &g_ref).norm(),
                hessian_error: (h - &h_ref).amax(),
            })
        })
        .collect::<Result<_>>()?;

    let per_v = |f: fn(&ConvergenceTrial) -> f64| -> Vec<f64> {
        config
            .v_grid
            .iter()
            .map(|&v| {
                let mut xs: Vec<f64> = trials.iter().filter(|t| t.v == v).map(f).collect();
                xs.sort_by(f64::total_cmp);
                quantile(&xs, 0.5)
            })
            .collect()
    };
    let median_errors = per_v(|t| t.median_error);
    let hessian_errors = per_v(|t| t.hessian_error);
    let median_slope = loglog_slope(&config.v_grid, &median_errors);
    let hessian_slope = loglog_slope(&config.v_grid, &hessian_errors);
    Ok(ConvergenceReport {
        reference_v,
        median_slope_ok: median_slope <= -0.4,
        hessian_monotone: hessian_errors.windows(2).all(|w| w[1] <= w[0]),
        trials,
        median_errors,
        hessian_errors,
        median_slope,
        hessian_slope,
    })
}

/// How the strategic minority places its votes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adversary {
    /// All strategic votes far out along one random direction.
    RadialEscape,
    /// A tight cluster around a random far point.
    Cluster,
    /// The farthest truthful votes reflected through the truthful median and
    /// pushed far out.
    Mirror,
}

impl Adversary {
    pub const ALL: [Adversary; 3] = [Adversary::RadialEscape, Adversary::Cluster, Adversary::Mirror];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ByzantineTrial {
    pub trial: usize,
    pub seed: u64,
    pub adversary: Adversary,
    pub delta: f64,
    pub radius: f64,
    pub displacement: f64,
    /// `displacement` does not exceed `radius` plus the two solves' certificates.
    pub within: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ByzantineReport {
    pub truthful: usize,
    pub strategic: usize,
    pub trials: Vec<ByzantineTrial>,
    pub max_displacement: f64,
    /// Largest `displacement / radius`.
    pub max_ratio: f64,
    pub all_within: bool,
}

fn strategic_votes(
    adversary: Adversary,
    truthful: &VoterProfile,
    g: &Point,
    delta: f64,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Point> {
    let d = truthful.dim();
    let scale = delta.max(1e-12);
    match adversary {
        Adversary::RadialEscape => {
            let u = random_unit(rng, d);
            vec![g + u * (1e3 * scale); count]
        }
        Adversary::Cluster => {
            let center = g + random_unit(rng, d) * (scale * 10f64.powf(rng.random_range(1.0..3.0)));
            (0..count)
                .map(|_| &center + random_unit(rng, d) * (1e-3 * scale * rng.random::<f64>()))
                .collect()
        }
        Adversary::Mirror => {
            let mut order: Vec<&Point> = truthful.voters().iter().collect();
            order.sort_by(|a, b| (*b - g).norm().total_cmp(&(*a - g).norm()));
            (0..count)
                .map(|i| {
                    let v = order[i % order.len()];
                    g - (v - g) * 1e3
                })
                .collect()
        }
    }
}

/// Monte Carlo check that `v_s` arbitrary votes cannot move the median of
/// `v_t` truthful ones outside the ball of [`byzantine_bound`].
pub fn byzantine_experiment(
    dist: &PreferenceDistribution,
    v_t: usize,
    v_s: usize,
    trials: usize,
    seed: u64,
) -> Result<ByzantineReport> {
    dist.validate()?;
    let trials: Vec<ByzantineTrial> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let tseed = trial_seed(seed, trial as u64);
            let truthful = sample_profile(dist, v_t, tseed);
            byzantine_trial(truthful, v_s, trial, tseed)
        })
        .collect();
    let t = if matches!(dist, PreferenceDistribution::FourCorner { .. }) { 4 * v_t } else { v_t };
    summarize_byzantine(trials, t, v_s)
}

/// As [`byzantine_experiment`] with a fixed truthful profile.
pub fn byzantine_experiment_fixed(
    truthful: &VoterProfile,
    v_s: usize,
    trials: usize,
    seed: u64,
) -> Result<ByzantineReport> {
    let trials: Vec<ByzantineTrial> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let tseed = trial_seed(seed, trial as u64);
            byzantine_trial(Ok(truthful.clone()), v_s, trial, tseed)
        })
        .collect();
    summarize_byzantine(trials, truthful.len(), v_s)
}

fn byzantine_trial(truthful: Result<VoterProfile>, v_s: usize, trial: usize, seed: u64) -> ByzantineTrial {
    let adversary = Adversary::ALL[trial % 3];
    let mut record = ByzantineTrial {
        trial,
        seed,
        adversary,
        delta: f64::NAN,
        radius: f64::NAN,
        displacement: f64::NAN,
        within: false,
        error: None,
    };
    let run = |record: &mut ByzantineTrial| -> Result<()> {
        let truthful = truthful?;
        if v_s >= truthful.len() {
            return Err(Error::MajorityAttack {
                truthful: truthful.len(),
                strategic: v_s,
            });
        }
        let solver = MedianSolver::with_tol(1e-12);
        let gt = solver.solve(&WeightedProfile::uniform(&truthful))?;
        record.delta = byzantine_bound(&truthful, 0)?;
        record.radius = byzantine_bound(&truthful, v_s)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let votes = strategic_votes(adversary, &truthful, &gt.point, record.delta, v_s, &mut rng);
        let mut all = truthful.voters().to_vec();
        all.extend(votes);
        let ga = solver.clone().starting_at(gt.point.clone()).solve(&WeightedProfile::uniform(&VoterProfile::new(all)?))?;
        record.displacement = (&ga.point - &gt.point).norm();
        let slack = ga.additive_bound.min(1e-6 * record.delta) + gt.additive_bound.min(1e-6 * record.delta);
        record.within = record.displacement <= record.radius + slack;
        Ok(())
    };
    if let Err(e) = run(&mut record) {
        record.error = Some(e.to_string());
    }
    record
}

fn summarize_byzantine(trials: Vec<ByzantineTrial>, truthful: usize, strategic: usize) -> Result<ByzantineReport> {
    let first = trials.first().ok_or_else(|| Error::InvalidInput("trials must be at least 1".into()))?;
    if let Some(e) = &first.error {
        if trials.iter().all(|t| t.error.is_some()) {
            return Err(Error::InvalidInput(e.clone()));
        }
    }
    let ok: Vec<&ByzantineTrial> = trials.iter().filter(|t| t.error.is_none()).collect();
    Ok(ByzantineReport {
        truthful,
        strategic,
        max_displacement: ok.iter().map(|t| t.displacement).fold(0.0, f64::max),
        max_ratio: ok
            .iter()
            .map(|t| if t.radius > 0.0 { t.displacement / t.radius } else { 0.0 })
            .fold(0.0, f64::max),
        all_within: trials.iter().all(|t| t.error.is_none() && t.within),
        trials,
    })
}
