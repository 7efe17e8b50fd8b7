//! Manipulability analysis: the achievable set of a single strategic voter,
//! best responses under Euclidean or skewed preferences, the Byzantine ball,
//! and sampled checks of the local conditions behind asymptotic
//! strategyproofness.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::median::{
    gradient_hessian, loss_gradient, loss_hessian, loss_third_deriv, min_norm_subgradient,
    MedianResult, MedianSolver, DEFAULT_TOL_GRAD,
};
use crate::optim::{bfgs, nelder_mead};
use crate::profile::{VoterProfile, WeightedProfile};
use crate::skewness::skewness;
use crate::vector_core::{Point, SpdMatrix};

/// Points a single extra voter can make the median land on exactly:
/// `{ z : some subgradient h of the averaged honest loss has |h| <= 1/V }`.
#[derive(Debug, Clone)]
pub struct AchievableSet {
    honest: WeightedProfile,
    radius: f64,
}

impl AchievableSet {
    pub fn new(honest: &VoterProfile) -> Self {
        Self::from_weighted(WeightedProfile::uniform(honest))
    }

    /// Radius `1/V` with `V` the profile's voter count.
    pub fn from_weighted(honest: WeightedProfile) -> Self {
        let radius = 1.0 / honest.voter_count() as f64;
        Self { honest, radius }
    }

    pub fn honest(&self) -> &WeightedProfile {
        &self.honest
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Norm of the minimum-norm subgradient of the averaged honest loss.
    pub fn gradient_norm(&self, z: &Point) -> Result<f64> {
        Ok(min_norm_subgradient(&self.honest, z)?.norm())
    }

    pub fn contains(&self, z: &Point) -> bool {
        self.gradient_norm(z).map(|g| g <= self.radius).unwrap_or(false)
    }

    /// `V |grad L(z)| - 1`; nonpositive exactly on the set.
    fn violation(&self, z: &Point) -> f64 {
        self.gradient_norm(z)
            .map(|g| g / self.radius - 1.0)
            .unwrap_or(f64::INFINITY)
    }
}

pub fn achievable_contains(set: &AchievableSet, z: &Point) -> bool {
    set.contains(z)
}

/// Where a best-response candidate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateSource {
    Truthful,
    Projection,
    BlackBox,
}

impl CandidateSource {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Truthful => "truthful",
            Self::Projection => "projection",
            Self::BlackBox => "black-box",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub source: CandidateSource,
    pub vote: Point,
    pub median: Point,
    /// Preference distance from the median to `theta0`.
    pub distance: f64,
}

/// Outcome of a best-response search. `gain_alpha` is an empirical lower
/// bound on the manipulability at this `theta0`: the search is local.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyReport {
    pub theta0: Point,
    pub truthful_median: Point,
    pub strategic_vote: Point,
    pub manipulated_median: Point,
    pub truthful_dist: f64,
    pub strategic_dist: f64,
    pub gain_alpha: f64,
    pub preference_norm: SpdMatrix,
    /// `theta0` is itself achievable, so the truthful vote already lands on it.
    pub exact_capture: bool,
    pub candidates: Vec<Candidate>,
}

impl StrategyReport {
    pub fn best_of(&self, source: CandidateSource) -> Option<&Candidate> {
        self.candidates
            .iter()
            .filter(|c| c.source == source)
            .min_by(|a, b| a.distance.total_cmp(&b.distance))
    }
}

#[derive(Debug, Clone)]
pub struct BestResponseOptions {
    /// Nelder-Mead restarts of the black-box path; 0 disables it.
    pub restarts: usize,
    pub seed: u64,
    pub tol_grad: f64,
    /// Skew `Sigma` of the aggregator; plain geometric median when `None`.
    pub aggregator_skew: Option<SpdMatrix>,
    /// Objective evaluations per restart, per dimension.
    pub evals_per_dim: usize,
}

impl Default for BestResponseOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            seed: 0,
            tol_grad: DEFAULT_TOL_GRAD,
            aggregator_skew: None,
            evals_per_dim: 60,
        }
    }
}

/// Best strategic vote for a voter with preferred vector `theta0` and
/// `pref`-skewed disutility against the honest profile.
pub fn best_response(
    theta0: &Point,
    honest: &VoterProfile,
    pref: &SpdMatrix,
) -> Result<StrategyReport> {
    best_response_with(theta0, honest, pref, &BestResponseOptions::default())
}

/// Geometry shared by both search paths. Everything lives in the aggregator's
/// transformed coordinates `y = Sigma z`, where the skewed median is a plain
/// geometric median and preference distances are `|P (y - t0)|`,
/// `P = S Sigma^{-1}`.
struct Search<'a> {
    honest: &'a WeightedProfile,
    set: AchievableSet,
    p_map: DMatrix<f64>,
    t0: Point,
    solver: MedianSolver,
}

impl Search<'_> {
    fn dist(&self, y: &Point) -> f64 {
        (&self.p_map * (y - &self.t0)).norm()
    }

    fn median_of_vote(&self, vote: &Point) -> Result<MedianResult> {
        let profile = self.honest.with_extra_voter(vote)?;
        self.solver.clone().starting_at(vote.clone()).solve(&profile)
    }

    fn candidate(&self, source: CandidateSource, vote: Point) -> Result<Candidate> {
        let median = self.median_of_vote(&vote)?.point;
        let distance = self.dist(&median);
        Ok(Candidate {
            source,
            vote,
            median,
            distance,
        })
    }

    /// Point where the segment from `inside` to `outside` leaves the set.
    fn boundary_between(&self, inside: &Point, outside: &Point) -> Point {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.set.violation(&(inside + (outside - inside) * mid)) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        inside + (outside - inside) * lo
    }

    /// Exterior-penalty projection of `t0` onto the achievable set.
    fn projection(&self, g: &Point, b: &Point) -> Option<Point> {
        let rho = (b - &self.t0).norm();
        if rho == 0.0 {
            return Some(b.clone());
        }
        let scale = self.dist(b);
        let g0 = self.set.violation(&self.t0);
        let v = 1.0 / self.set.radius();
        let p_t_p = self.p_map.transpose() * &self.p_map;
        let to_u = |y: &Point| (y - &self.t0) / rho;
        let objective = |u: &Point, mu: f64| {
            let y = &self.t0 + u * rho;
            let Some((gl, h)) = gradient_hessian(self.honest, &y) else {
                return (f64::INFINITY, Point::zeros(u.len()));
            };
            let py = &self.p_map * (u * rho);
            let pn = py.norm();
            let mut value = pn / scale;
            let mut grad = if pn > 0.0 {
                &p_t_p * (u * rho) * (rho / (pn * scale))
            } else {
                Point::zeros(u.len())
            };
            let gn = gl.norm();
            let c = v * gn - 1.0;
            if c > 0.0 {
                value += mu * (c / g0).powi(2);
                grad += h * &gl * (2.0 * mu * c / (g0 * g0) * v / gn * rho);
            }
            (value, grad)
        };

        let mut best: Option<(f64, Point)> = None;
        for start in [b, g] {
            let mut u = to_u(start);
            let mut mu = 1.0;
            let mut last = f64::INFINITY;
            while mu <= 1e12 {
                let m = bfgs(|x| objective(x, mu), &u, 100, 1e-12);
                u = m.x;
                // stop once the penalty no longer moves the optimum
                if (m.value - last).abs() <= 1e-9 * m.value.abs() {
                    break;
                }
                last = m.value;
                mu *= 100.0;
            }
            let mut y = &self.t0 + &u * rho;
            if self.set.violation(&y) > 0.0 {
                y = self.boundary_between(g, &y);
            }
            let d = self.dist(&y);
            if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                best = Some((d, y));
            }
        }
        best.map(|(_, y)| y)
    }

    fn black_box(
        &self,
        starts: &[Point],
        restarts: usize,
        rho: f64,
        evals_per_dim: usize,
        seed: u64,
    ) -> Option<Point> {
        let d = self.t0.len();
        let scale = self.dist(&(&self.t0 + Point::from_element(d, rho))).max(f64::MIN_POSITIVE);
        let objective = |u: &Point| {
            let vote = &self.t0 + u * rho;
            match self.median_of_vote(&vote) {
                Ok(r) => self.dist(&r.point) / scale,
                Err(_) => f64::INFINITY,
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: Option<(f64, Point)> = None;
        for k in 0..restarts {
            let (start, step) = match starts.get(k) {
                Some(s) => ((s - &self.t0) / rho, 0.1),
                None => {
                    let base = best.as_ref().map(|(_, u)| u.clone()).unwrap_or_else(|| Point::zeros(d));
                    let jitter = Point::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                    (base + jitter * 0.3, 0.3)
                }
            };
            let m = nelder_mead(objective, &start, step, evals_per_dim * d.max(1), 1e-12);
            if best.as_ref().map_or(true, |(v, _)| m.value < *v) {
                best = Some((m.value, m.x));
            }
        }
        best.map(|(_, u)| &self.t0 + u * rho)
    }
}

pub fn best_response_with(
    theta0: &Point,
    honest: &VoterProfile,
    pref: &SpdMatrix,
    opts: &BestResponseOptions,
) -> Result<StrategyReport> {
    best_response_weighted(theta0, &WeightedProfile::uniform(honest), pref, opts)
}

/// As [`best_response_with`], for an honest profile already in weighted form
/// (useful when it consists of a few points with large multiplicities).
pub fn best_response_weighted(
    theta0: &Point,
    honest: &WeightedProfile,
    pref: &SpdMatrix,
    opts: &BestResponseOptions,
) -> Result<StrategyReport> {
    let d = honest.dim();
    for found in [theta0.len(), pref.dim()] {
        if found != d {
            return Err(Error::DimensionMismatch { expected: d, found });
        }
    }
    let adim = honest.affine_dim();
    if adim < 2 {
        return Err(Error::DegenerateDimension(adim));
    }
    let sigma = opts.aggregator_skew.clone().unwrap_or_else(|| SpdMatrix::identity(d));
    if sigma.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: sigma.dim(),
        });
    }
    let sigma_inv = sigma.inverse();
    let hw = honest.transformed(&sigma)?;
    let search = Search {
        honest: &hw,
        set: AchievableSet::from_weighted(hw.clone()),
        p_map: pref.matrix() * sigma_inv.matrix(),
        t0: sigma.apply(theta0)?,
        solver: MedianSolver::with_tol(opts.tol_grad),
    };

    let truthful = search.candidate(CandidateSource::Truthful, search.t0.clone())?;
    let truthful_dist = truthful.distance;
    let mut candidates = vec![truthful.clone()];
    let exact_capture = search.set.contains(&search.t0);

    if !exact_capture {
        let g = search.solver.solve(&hw)?.point;
        if search.set.violation(&g) <= 0.0 {
            let b = search.boundary_between(&g, &search.t0);
            let projected = search.projection(&g, &b);
            if let Some(y) = &projected {
                if let Ok(c) = search.candidate(CandidateSource::Projection, y.clone()) {
                    candidates.push(c);
                }
            }
            if opts.restarts > 0 {
                let rho = (&b - &search.t0).norm().max(1e-300);
                let mut starts: Vec<Point> = projected.into_iter().collect();
                starts.push(b.clone());
                starts.push(search.t0.clone());
                if let Some(vote) = search.black_box(&starts, opts.restarts, rho, opts.evals_per_dim, opts.seed) {
                    if let Ok(c) = search.candidate(CandidateSource::BlackBox, vote) {
                        candidates.push(c);
                    }
                }
            }
        }
    }

    let best = candidates
        .iter()
        .min_by(|a, b| {
            a.distance.total_cmp(&b.distance).then_with(|| {
                a.vote
                    .iter()
                    .zip(b.vote.iter())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        })
        .cloned()
        .unwrap_or_else(|| truthful.clone());
    let strategic_dist = best.distance;
    let gain_alpha = if strategic_dist > 0.0 {
        truthful_dist / strategic_dist - 1.0
    } else if truthful_dist > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };

    let back = |y: &Point| sigma_inv.matrix() * y;
    let candidates = candidates
        .into_iter()
        .map(|c| Candidate {
            vote: back(&c.vote),
            median: back(&c.median),
            ..c
        })
        .collect();
    Ok(StrategyReport {
        theta0: theta0.clone(),
        truthful_median: back(&truthful.median),
        strategic_vote: back(&best.vote),
        manipulated_median: back(&best.median),
        truthful_dist,
        strategic_dist,
        gain_alpha,
        preference_norm: pref.clone(),
        exact_capture,
        candidates,
    })
}

/// Hessian of the averaged loss at the geometric median of `profile`.
pub fn hessian_at_median(profile: &VoterProfile, tol: f64) -> Result<SpdMatrix> {
    let adim = profile.affine_dim();
    if adim < 2 {
        return Err(Error::DegenerateDimension(adim));
    }
    let wp = WeightedProfile::uniform(profile);
    let g = MedianSolver::with_tol(tol).solve(&wp)?;
    SpdMatrix::new(loss_hessian(&wp, &g.point)?)
}

/// Radius of the ball around the truthful median that `num_strategic`
/// arbitrary voters cannot push the median out of:
/// `Delta / sqrt(1 - (S/T)^2)`, `Delta` the largest truthful distance to the
/// truthful median.
pub fn byzantine_bound(truthful: &VoterProfile, num_strategic: usize) -> Result<f64> {
    let t = truthful.len();
    if num_strategic >= t {
        return Err(Error::MajorityAttack {
            truthful: t,
            strategic: num_strategic,
        });
    }
    let g = MedianSolver::with_tol(1e-12).solve(&WeightedProfile::uniform(truthful))?.point;
    let delta = truthful
        .voters()
        .iter()
        .map(|v| (v - &g).norm())
        .fold(0.0, f64::max);
    if num_strategic == 0 {
        return Ok(delta);
    }
    let rho = num_strategic as f64 / t as f64;
    Ok(delta / (1.0 - rho * rho).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoShoeReport {
    /// `Skew(Sv^{-1} H Sv^{-1})` for the choice `H = Sv^2`; zero up to rounding.
    pub skew_v: f64,
    /// `Skew(Sw^{-1} Sv^2 Sw^{-1})`.
    pub skew_w: f64,
    /// `skew_w > 1e-9`: no single curvature suits both voters.
    pub conflict: bool,
}

/// Checks whether the curvature that makes voter `v` free of incentive to lie
/// (`H = Sv^2`) necessarily leaves voter `w` with positive skewness.
pub fn no_shoe_check(sv: &SpdMatrix, sw: &SpdMatrix) -> Result<NoShoeReport> {
    if sv.dim() != sw.dim() {
        return Err(Error::DimensionMismatch {
            expected: sv.dim(),
            found: sw.dim(),
        });
    }
    let h = sv.squared();
    let skew_v = skewness(&h.congruence(&sv.inverse())?).value;
    let skew_w = skewness(&h.congruence(&sw.inverse())?).value;
    Ok(NoShoeReport {
        skew_v,
        skew_w,
        conflict: skew_w > 1e-9,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionOutcome {
    pub passed: bool,
    /// Extreme sampled value (minimum for conditions 1-3, maximum for 4).
    pub value: f64,
    /// Sample point attaining `value`.
    pub witness: Option<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub beta: f64,
    pub median: Point,
    /// No voter within `2 beta` of the median.
    pub smoothness: ConditionOutcome,
    /// Outward gradient component exceeds `1/V` on the `beta`-sphere, so the
    /// ball contains the achievable set.
    pub contains_achievable: ConditionOutcome,
    /// Smallest eigenvalue of `H H + T[grad L]`, the Hessian of `|grad L|^2 / 2`.
    pub convexity: ConditionOutcome,
    /// Largest skewness of the loss Hessian over the ball.
    pub bounded_skewness: ConditionOutcome,
    /// Strategyproofness level implied when all four conditions hold.
    pub alpha: f64,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.smoothness.passed
            && self.contains_achievable.passed
            && self.convexity.passed
            && self.bounded_skewness.passed
    }
}

#[derive(Debug, Clone)]
pub struct ConditionOptions {
    /// Unit directions sampled on the sphere; `64 d` when `None`.
    pub directions: Option<usize>,
    pub ball_samples: usize,
    pub seed: u64,
    pub tol_grad: f64,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        Self {
            directions: None,
            ball_samples: 256,
            seed: 0,
            tol_grad: DEFAULT_TOL_GRAD,
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Point {
    loop {
        let x = Point::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = x.norm();
        if n > 1e-12 {
            return x / n;
        }
    }
}

/// Samples the four local conditions on the sphere and ball of radius `beta`
/// around the honest median.
pub fn condition_checker(honest: &VoterProfile, beta: f64) -> Result<ConditionReport> {
    condition_checker_with(honest, beta, &ConditionOptions::default())
}

pub fn condition_checker_with(
    honest: &VoterProfile,
    beta: f64,
    opts: &ConditionOptions,
) -> Result<ConditionReport> {
    if !(beta > 0.0) {
        return Err(Error::InvalidInput("beta must be positive".into()));
    }
    let d = honest.dim();
    let wp = WeightedProfile::uniform(honest);
    let radius = 1.0 / wp.voter_count() as f64;
    let g = MedianSolver::with_tol(opts.tol_grad).solve(&wp)?.point;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let (nearest_dist, nearest) = honest
        .voters()
        .iter()
        .map(|v| ((v - &g).norm(), v))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("profile is nonempty");
    let mut smoothness = ConditionOutcome {
        passed: nearest_dist >= 2.0 * beta,
        value: nearest_dist,
        witness: Some(nearest.clone()),
    };

    let mut contains = ConditionOutcome {
        passed: true,
        value: f64::INFINITY,
        witness: None,
    };
    for _ in 0..opts.directions.unwrap_or(64 * d) {
        let u = random_unit(&mut rng, d);
        let z = &g + &u * beta;
        match loss_gradient(&wp, &z) {
            Ok(grad) => {
                let outward = u.dot(&grad);
                if outward < contains.value {
                    contains.value = outward;
                    contains.witness = Some(z);
                }
            }
            Err(_) => {
                smoothness.passed = false;
                smoothness.witness = Some(z);
            }
        }
    }
    contains.passed = contains.value > radius;

    let mut convexity = ConditionOutcome {
        passed: true,
        value: f64::INFINITY,
        witness: None,
    };
    let mut bounded = ConditionOutcome {
        passed: true,
        value: 0.0,
        witness: None,
    };
    for _ in 0..opts.ball_samples {
        let u = random_unit(&mut rng, d);
        let r = beta * rng.random::<f64>().powf(1.0 / d as f64);
        let z = &g + u * r;
        let (grad, h, t) = match (loss_gradient(&wp, &z), loss_hessian(&wp, &z), loss_third_deriv(&wp, &z)) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            _ => {
                smoothness.passed = false;
                smoothness.witness = Some(z);
                continue;
            }
        };
        let m = &h * &h + t.contract(&grad);
        let m = (&m + m.transpose()) * 0.5;
        let lmin = SymmetricEigen::new(m)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if lmin < convexity.value {
            convexity.value = lmin;
            convexity.witness = Some(z.clone());
        }
        match SpdMatrix::from_symmetrized(h) {
            Ok(hs) => {
                let s = skewness(&hs).value;
                if s > bounded.value {
                    bounded.value = s;
                    bounded.witness = Some(z);
                }
            }
            Err(_) => {
                bounded.passed = false;
                bounded.value = f64::INFINITY;
                bounded.witness = Some(z);
            }
        }
    }
    convexity.passed = convexity.value >= 0.0;
    bounded.passed = bounded.passed && bounded.value.is_finite();
    let alpha = bounded.value;
    Ok(ConditionReport {
        beta,
        median: g,
        smoothness,
        contains_achievable: contains,
        convexity,
        bounded_skewness: bounded,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::median::geometric_median;
    use crate::vector_core::point;

    fn square(v: usize) -> VoterProfile {
        let mut rows = Vec::new();
        for _ in 0..v {
            rows.extend([vec![1.0, 1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![-1.0, -1.0]]);
        }
        VoterProfile::from_rows(&rows).unwrap()
    }

    #[test]
    fn achievable_set_examples() {
        let p = square(5);
        let a = AchievableSet::new(&p);
        assert_eq!(a.radius(), 1.0 / 20.0);
        assert!(a.contains(&point(&[0.0, 0.0])));
        assert!(!a.contains(&point(&[1e6, 0.0])));
    }

    #[test]
    fn achievable_points_are_fixed_points() {
        let p = square(5);
        let a = AchievableSet::new(&p);
        let z = point(&[0.02, -0.01]);
        assert!(a.contains(&z));
        let wp = WeightedProfile::uniform(&p).with_extra_voter(&z).unwrap();
        let r = MedianSolver::default().starting_at(point(&[0.0, 0.0])).solve(&wp).unwrap();
        assert!((r.point - z).norm() <= 1e-9);
    }

    #[test]
    fn center_of_symmetry_gives_zero_gain() {
        let p = VoterProfile::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 2.0], vec![0.0, -2.0]]).unwrap();
        let r = best_response(&point(&[0.0, 0.0]), &p, &SpdMatrix::identity(2)).unwrap();
        assert_eq!(r.gain_alpha, 0.0);
        assert!(r.exact_capture);
        assert_eq!(r.strategic_dist, 0.0);
    }

    #[test]
    fn achievable_theta0_is_captured() {
        let p = square(5);
        let theta0 = point(&[0.01, 0.02]);
        let r = best_response(&theta0, &p, &SpdMatrix::identity(2)).unwrap();
        assert!(r.exact_capture);
        assert_eq!(r.strategic_dist, 0.0);
        assert_eq!(r.truthful_median, theta0);
    }

    #[test]
    fn strategic_median_is_achievable_and_not_worse() {
        let p = VoterProfile::from_rows(&[
            vec![0.0, 0.0],
            vec![3.0, 0.5],
            vec![1.0, 2.0],
            vec![-1.0, 1.5],
            vec![0.5, -2.0],
        ])
        .unwrap();
        let theta0 = point(&[4.0, 3.0]);
        let r = best_response(&theta0, &p, &SpdMatrix::identity(2)).unwrap();
        assert!(r.gain_alpha >= 0.0);
        assert!(r.strategic_dist <= r.truthful_dist);
        let a = AchievableSet::new(&p);
        assert!(a.gradient_norm(&r.manipulated_median).unwrap() <= a.radius() * (1.0 + 1e-6));
        let proj = r.best_of(CandidateSource::Projection).unwrap().distance;
        let bb = r.best_of(CandidateSource::BlackBox).unwrap().distance;
        assert!((proj - bb).abs() <= 0.02 * proj.max(bb), "{proj} {bb}");
    }

    #[test]
    fn rejects_collinear_honest_profile() {
        let p = VoterProfile::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(
            best_response(&point(&[5.0, 0.0]), &p, &SpdMatrix::identity(2)).unwrap_err(),
            Error::DegenerateDimension(1)
        );
    }

    #[test]
    fn byzantine_radius_examples() {
        let p = VoterProfile::from_rows(&[vec![1.0, 0.0], vec![-0.5, 0.75f64.sqrt()], vec![-0.5, -0.75f64.sqrt()]]).unwrap();
        let delta = byzantine_bound(&p, 0).unwrap();
        assert!((delta - 1.0).abs() < 1e-10);
        let r = byzantine_bound(&p, 1).unwrap();
        assert!((r / delta - 3.0 / (2.0 * 2f64.sqrt())).abs() < 1e-14);
        assert!(matches!(byzantine_bound(&p, 3), Err(Error::MajorityAttack { .. })));
    }

    #[test]
    fn no_shoe_examples() {
        let sv = SpdMatrix::from_diagonal(&[2.0, 1.0]).unwrap();
        let proportional = no_shoe_check(&sv, &sv.scaled(2.0).unwrap()).unwrap();
        assert!(proportional.skew_w.abs() < 1e-12 && !proportional.conflict);
        let r = no_shoe_check(&sv, &SpdMatrix::from_diagonal(&[1.0, 2.0]).unwrap()).unwrap();
        assert!((r.skew_w - 1.125).abs() < 1e-12);
        assert!(r.conflict);
        assert!(r.skew_v.abs() < 1e-12);
    }

    #[test]
    fn four_corner_hessian_at_median() {
        let x = 8.0;
        let mut rows = Vec::new();
        for _ in 0..3 {
            rows.extend([vec![-x, -1.0], vec![-x, 1.0], vec![x, -1.0], vec![x, 1.0]]);
        }
        let h = hessian_at_median(&VoterProfile::from_rows(&rows).unwrap(), 1e-12).unwrap();
        let c = (1.0f64 + x * x).powf(-1.5);
        assert!((h.matrix() - DMatrix::from_row_slice(2, 2, &[c, 0.0, 0.0, c * x * x])).amax() < 1e-12);
    }

    #[test]
    fn condition_one_fails_with_voter_near_median() {
        let mut rows = square(3).voters().iter().map(|v| v.as_slice().to_vec()).collect::<Vec<_>>();
        rows.push(vec![0.0, 0.0]);
        let p = VoterProfile::from_rows(&rows).unwrap();
        let r = condition_checker(&p, 0.1).unwrap();
        assert!(!r.smoothness.passed);
    }

    #[test]
    fn condition_checker_on_symmetric_profile() {
        let p = square(10);
        let g = geometric_median(&WeightedProfile::uniform(&p), 1e-12).unwrap().point;
        assert!(g.norm() < 1e-12);
        let r = condition_checker(&p, 0.2).unwrap();
        assert!(r.smoothness.passed);
        assert!(r.contains_achievable.passed);
        assert!(r.alpha < 0.1);
    }
}
