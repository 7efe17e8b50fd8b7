//! Aggregation rules over a [`WeightedProfile`]: average, coordinate-wise
//! median, geometric median and its skewed variant, plus the average-distance
//! loss and its first three derivatives.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::profile::WeightedProfile;
use crate::vector_core::{
    euclid_hessian, euclid_third_derivative, skewed_gradient, skewed_hessian_of_norm, Point,
    SpdMatrix, ThirdDerivTensor,
};

/// Default gradient-norm stopping tolerance.
pub const DEFAULT_TOL_GRAD: f64 = 1e-10;

const COINCIDENCE_REL: f64 = 1e-14;

#[inline]
fn coincides(dist: f64, z_norm: f64, x_norm: f64) -> bool {
    dist == 0.0 || dist <= COINCIDENCE_REL * z_norm.max(x_norm)
}

/// As [`coincides`], skipping the norm of `x` when `|x| <= |z| + dist`
/// already rules coincidence out.
fn coincides_with(dist: f64, z_norm: f64, x: &Point) -> bool {
    if dist > COINCIDENCE_REL * (z_norm + dist) {
        return false;
    }
    coincides(dist, z_norm, x.norm())
}

fn check_dim(p: &WeightedProfile, z: &Point) -> Result<()> {
    if z.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: z.len(),
        });
    }
    Ok(())
}

/// Weighted arithmetic mean.
pub fn average(p: &WeightedProfile) -> Point {
    p.iter().fold(Point::zeros(p.dim()), |acc, (x, w)| acc + x * w)
}

/// Per-coordinate weighted lower median: the smallest value whose cumulative
/// weight reaches one half.
pub fn coordinatewise_median(p: &WeightedProfile) -> Point {
    let d = p.dim();
    let mut out = Point::zeros(d);
    let mut column: Vec<(f64, f64)> = Vec::with_capacity(p.len());
    for c in 0..d {
        column.clear();
        column.extend(p.iter().map(|(x, w)| (x[c], w)));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        let mut chosen = column[column.len() - 1].0;
        for &(v, w) in &column {
            acc += w;
            if acc >= 0.5 - 1e-12 {
                chosen = v;
                break;
            }
        }
        out[c] = chosen;
    }
    out
}

/// `L(z) = sum_v w_v |z - x_v|_2`.
pub fn loss_eval(p: &WeightedProfile, z: &Point) -> f64 {
    p.iter().map(|(x, w)| w * (z - x).norm()).sum()
}

fn diffs_away_from_voters<'a>(
    p: &'a WeightedProfile,
    z: &'a Point,
) -> impl Iterator<Item = Result<(Point, f64)>> + 'a {
    let zn = z.norm();
    p.iter().map(move |(x, w)| {
        let diff = z - x;
        if coincides(diff.norm(), zn, x.norm()) {
            Err(Error::AtVoterPoint)
        } else {
            Ok((diff, w))
        }
    })
}

/// `grad L(z) = sum_v w_v (z - x_v)/|z - x_v|`.
pub fn loss_gradient(p: &WeightedProfile, z: &Point) -> Result<Point> {
    check_dim(p, z)?;
    let mut g = Point::zeros(p.dim());
    for item in diffs_away_from_voters(p, z) {
        let (diff, w) = item?;
        let n = diff.norm();
        g += diff * (w / n);
    }
    Ok(g)
}

pub fn loss_hessian(p: &WeightedProfile, z: &Point) -> Result<DMatrix<f64>> {
    check_dim(p, z)?;
    let d = p.dim();
    let mut h = DMatrix::zeros(d, d);
    for item in diffs_away_from_voters(p, z) {
        let (diff, w) = item?;
        h += euclid_hessian(&diff)? * w;
    }
    Ok(h)
}

pub fn loss_third_deriv(p: &WeightedProfile, z: &Point) -> Result<ThirdDerivTensor> {
    check_dim(p, z)?;
    let mut t = ThirdDerivTensor::zeros(p.dim());
    for item in diffs_away_from_voters(p, z) {
        let (diff, w) = item?;
        t.add_scaled(&euclid_third_derivative(&diff)?, w);
    }
    Ok(t)
}

/// Minimum-norm element of the subdifferential of `L` at `z`.
///
/// Voters coinciding with `z` contribute a ball of radius equal to their
/// weight; the smooth part is shrunk towards 0 by that radius.
pub fn min_norm_subgradient(p: &WeightedProfile, z: &Point) -> Result<Point> {
    check_dim(p, z)?;
    let e = Evaluation::at(p, z);
    let smooth = -&e.pull;
    let n = smooth.norm();
    if n <= e.eta {
        return Ok(Point::zeros(p.dim()));
    }
    Ok(smooth * (1.0 - e.eta / n))
}

/// `L^Sigma(z) = sum_v w_v |Sigma (z - x_v)|_2`.
pub fn skewed_loss_eval(p: &WeightedProfile, sigma: &SpdMatrix, z: &Point) -> Result<f64> {
    check_dim(p, z)?;
    Ok(p.iter().map(|(x, w)| w * (sigma.matrix() * (z - x)).norm()).sum())
}

pub fn skewed_loss_gradient(p: &WeightedProfile, sigma: &SpdMatrix, z: &Point) -> Result<Point> {
    check_dim(p, z)?;
    let mut g = Point::zeros(p.dim());
    for item in diffs_away_from_voters(p, z) {
        let (diff, w) = item?;
        g += skewed_gradient(&diff, sigma)? * w;
    }
    Ok(g)
}

pub fn skewed_loss_hessian(
    p: &WeightedProfile,
    sigma: &SpdMatrix,
    z: &Point,
) -> Result<DMatrix<f64>> {
    check_dim(p, z)?;
    let d = p.dim();
    let mut h = DMatrix::zeros(d, d);
    for item in diffs_away_from_voters(p, z) {
        let (diff, w) = item?;
        h += skewed_hessian_of_norm(&diff, sigma)? * w;
    }
    Ok(h)
}

/// Output of a geometric-median solve.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianResult {
    pub point: Point,
    /// Average-of-distances value at `point`.
    pub loss: f64,
    /// Norm of the minimum-norm subgradient at `point`.
    pub grad_norm: f64,
    /// Certified bound on the distance from `point` to the exact minimizer;
    /// `+inf` when no certificate is available.
    pub additive_bound: f64,
    pub iterations: usize,
    /// The profile spans an affine subspace of dimension <= 1, so the
    /// minimizer may not be unique.
    pub degenerate: bool,
}

/// One pass over the profile at `y`.
struct Evaluation {
    /// `sum w (x - y)/|x - y|` over voters away from `y` (the negative gradient).
    pull: Point,
    /// Total weight of voters sitting at `y`.
    eta: f64,
    loss: f64,
    /// Weiszfeld numerator and denominator.
    t_num: Point,
    t_den: f64,
    nearest: usize,
    nearest_dist: f64,
}

impl Evaluation {
    fn at(p: &WeightedProfile, y: &Point) -> Self {
        let d = p.dim();
        let yn = y.norm();
        let ys = y.as_slice();
        let mut pull = Point::zeros(d);
        let mut t_num = Point::zeros(d);
        let mut t_den = 0.0;
        let mut eta = 0.0;
        let mut loss = 0.0;
        let mut nearest = 0;
        let mut nearest_dist = f64::INFINITY;
        for (k, (x, w)) in p.iter().enumerate() {
            let xs = x.as_slice();
            let mut sq = 0.0;
            for i in 0..d {
                let t = xs[i] - ys[i];
                sq += t * t;
            }
            let dist = sq.sqrt();
            loss += w * dist;
            if dist < nearest_dist {
                nearest_dist = dist;
                nearest = k;
            }
            if coincides_with(dist, yn, x) {
                eta += w;
                continue;
            }
            let c = w / dist;
            t_den += c;
            for i in 0..d {
                pull[i] += c * (xs[i] - ys[i]);
                t_num[i] += c * xs[i];
            }
        }
        Self {
            pull,
            eta,
            loss,
            t_num,
            t_den,
            nearest,
            nearest_dist,
        }
    }

    fn grad_norm(&self) -> f64 {
        (self.pull.norm() - self.eta).max(0.0)
    }
}

fn hessian_away(p: &WeightedProfile, y: &Point) -> DMatrix<f64> {
    let d = p.dim();
    let mut h = DMatrix::zeros(d, d);
    let ys = y.as_slice();
    let mut u = vec![0.0; d];
    for (x, w) in p.iter() {
        let xs = x.as_slice();
        let mut sq = 0.0;
        for i in 0..d {
            u[i] = ys[i] - xs[i];
            sq += u[i] * u[i];
        }
        let dist = sq.sqrt();
        if dist == 0.0 {
            continue;
        }
        let c = w / dist;
        for i in 0..d {
            u[i] /= dist;
        }
        for i in 0..d {
            h[(i, i)] += c;
            for j in 0..d {
                h[(i, j)] -= c * u[i] * u[j];
            }
        }
    }
    h
}

/// Gradient and Hessian of `L` in one pass; `None` if `z` sits on a voter.
pub(crate) fn gradient_hessian(p: &WeightedProfile, z: &Point) -> Option<(Point, DMatrix<f64>)> {
    let d = p.dim();
    let zn = z.norm();
    let zs = z.as_slice();
    let mut g = Point::zeros(d);
    let mut upper = vec![0.0; d * (d + 1) / 2];
    let mut trace = 0.0;
    let mut u = vec![0.0; d];
    for (x, w) in p.iter() {
        let xs = x.as_slice();
        let mut sq = 0.0;
        for i in 0..d {
            u[i] = zs[i] - xs[i];
            sq += u[i] * u[i];
        }
        let dist = sq.sqrt();
        if coincides_with(dist, zn, x) {
            return None;
        }
        let c = w / dist;
        for i in 0..d {
            u[i] /= dist;
            g[i] += w * u[i];
        }
        trace += c;
        let mut k = 0;
        for i in 0..d {
            let ci = c * u[i];
            for j in i..d {
                upper[k] -= ci * u[j];
                k += 1;
            }
        }
    }
    let mut h = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            h[(i, j)] = upper[k];
            h[(j, i)] = upper[k];
            k += 1;
        }
        h[(i, i)] += trace;
    }
    Some((g, h))
}

/// Modified Weiszfeld iteration (Vardi-Zhang step at voter points) with a
/// damped Newton tail.
#[derive(Debug, Clone)]
pub struct MedianSolver {
    pub tol_grad: f64,
    pub max_iter: usize,
    /// Newton steps are attempted once the gradient norm drops below this.
    pub newton_switch: f64,
    /// Starting point; the coordinate-wise median when `None`.
    pub start: Option<Point>,
}

impl Default for MedianSolver {
    fn default() -> Self {
        Self {
            tol_grad: DEFAULT_TOL_GRAD,
            max_iter: 20_000,
            newton_switch: 1e-3,
            start: None,
        }
    }
}

impl MedianSolver {
    pub fn with_tol(tol_grad: f64) -> Self {
        Self {
            tol_grad,
            ..Self::default()
        }
    }

    pub fn starting_at(mut self, start: Point) -> Self {
        self.start = Some(start);
        self
    }

    pub fn solve(&self, p: &WeightedProfile) -> Result<MedianResult> {
        if !(self.tol_grad > 0.0) {
            return Err(Error::InvalidInput("tol_grad must be positive".into()));
        }
        let degenerate = p.affine_dim() < 2;
        let mut y = match &self.start {
            Some(s) => {
                check_dim(p, s)?;
                s.clone()
            }
            None => coordinatewise_median(p),
        };
        let mut e = Evaluation::at(p, &y);
        let mut best = (e.grad_norm(), y.clone());
        let mut since_best = 0usize;
        let mut iterations = 0usize;
        let mut anchored: Vec<usize> = Vec::new();

        while e.grad_norm() > self.tol_grad {
            if iterations >= self.max_iter || since_best > 200 {
                break;
            }
            iterations += 1;

            // The minimizer may sit exactly on a voter, which iterates only
            // approach asymptotically; test the nearest one directly.
            if e.eta == 0.0 && e.nearest_dist <= 1e-6 * e.loss {
                let cand = p.points()[e.nearest].clone();
                let ce = Evaluation::at(p, &cand);
                if ce.grad_norm() <= self.tol_grad {
                    y = cand;
                    e = ce;
                    break;
                }
            }

            let g = e.grad_norm();
            // A minimizer just off a voter stalls both the Weiszfeld step and
            // Newton in absolute coordinates; refine relative to that voter.
            if g < self.newton_switch
                && e.nearest_dist <= 1e-3 * e.loss
                && !anchored.contains(&e.nearest)
            {
                anchored.push(e.nearest);
                if let Some(ny) = anchored_newton(p, e.nearest, self.tol_grad) {
                    let ne = Evaluation::at(p, &ny);
                    if ne.grad_norm() < g {
                        y = ny;
                        e = ne;
                        if e.grad_norm() < best.0 {
                            best = (e.grad_norm(), y.clone());
                            since_best = 0;
                        }
                        continue;
                    }
                }
            }
            let mut stepped = false;
            if e.eta == 0.0 && (g < self.newton_switch || iterations > 50) {
                if let Some((ny, ne)) = self.newton_step(p, &y, &e) {
                    y = ny;
                    e = ne;
                    stepped = true;
                }
            }
            if !stepped {
                let ny = vardi_zhang_step(&y, &e);
                if ny == y {
                    break;
                }
                y = ny;
                e = Evaluation::at(p, &y);
            }
            if e.grad_norm() < best.0 {
                best = (e.grad_norm(), y.clone());
                since_best = 0;
            } else {
                since_best += 1;
            }
        }

        if e.grad_norm() > best.0 {
            y = best.1;
            e = Evaluation::at(p, &y);
        }
        let grad_norm = e.grad_norm();
        if grad_norm > self.tol_grad {
            return Err(Error::NotConverged {
                grad_norm,
                iterations,
            });
        }
        let additive_bound = if degenerate {
            f64::INFINITY
        } else if e.eta > 0.0 {
            if e.pull.norm() <= e.eta {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            let h = hessian_away(p, &y);
            let lmin = nalgebra::SymmetricEigen::new(h)
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if lmin > 0.0 {
                self.tol_grad / lmin
            } else {
                f64::INFINITY
            }
        };
        Ok(MedianResult {
            loss: e.loss,
            point: y,
            grad_norm,
            additive_bound,
            iterations,
            degenerate,
        })
    }

    fn newton_step(
        &self,
        p: &WeightedProfile,
        y: &Point,
        e: &Evaluation,
    ) -> Option<(Point, Evaluation)> {
        let h = hessian_away(p, y);
        let dir = h.cholesky()?.solve(&e.pull);
        let slope = e.pull.dot(&dir);
        if !(slope > 0.0) {
            return None;
        }
        let g0 = e.grad_norm();
        let mut t = 1.0;
        for _ in 0..60 {
            let cand = y + &dir * t;
            let ce = Evaluation::at(p, &cand);
            // Near the optimum loss differences drown in rounding (a sum over
            // many voters carries far more than one ulp of error), so the
            // Armijo test only counts when the predicted decrease is resolvable.
            let expected = 1e-4 * t * slope;
            let armijo = expected > 16.0 * f64::EPSILON * e.loss.abs() && ce.loss <= e.loss - expected;
            let flat = ce.grad_norm() < 0.9 * g0 && ce.loss <= e.loss + 1e-12 * e.loss.abs();
            if armijo || flat {
                return Some((cand, ce));
            }
            t *= 0.5;
        }
        None
    }
}

/// Newton iteration for a minimizer close to voter `k`, in coordinates
/// `s = y - x_k` so that the distance to `x_k` keeps full precision.
fn anchored_newton(p: &WeightedProfile, k: usize, tol: f64) -> Option<Point> {
    let d = p.dim();
    let xk = &p.points()[k];
    let wk = p.weights()[k];
    let others: Vec<(Point, f64)> = p
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, (x, w))| (x - xk, w))
        .collect();
    let eye = DMatrix::<f64>::identity(d, d);
    let rest = |s: &Point| -> Option<(Point, DMatrix<f64>)> {
        let mut g = Point::zeros(d);
        let mut h = DMatrix::zeros(d, d);
        for (o, w) in &others {
            let diff = s - o;
            let dist = diff.norm();
            if dist == 0.0 {
                return None;
            }
            let u = diff / dist;
            h += (&eye - &u * u.transpose()) * (w / dist);
            g += u * *w;
        }
        Some((g, h))
    };
    let full = |s: &Point| -> Option<(Point, DMatrix<f64>)> {
        let (g, h) = rest(s)?;
        let t = s.norm();
        let u = s / t;
        Some((g + &u * wk, h + (&eye - &u * u.transpose()) * (wk / t)))
    };

    let (g0, h0) = rest(&Point::zeros(d))?;
    let r0 = g0.norm();
    if r0 <= wk {
        return Some(xk.clone());
    }
    let dir = -&g0 / r0;
    let curvature = dir.dot(&(&h0 * &dir));
    if !(curvature > 0.0) {
        return None;
    }
    let mut s = dir * ((r0 - wk) / curvature);
    let (mut grad, mut hess) = full(&s)?;
    let mut gn = grad.norm();
    for _ in 0..100 {
        if gn <= 0.5 * tol {
            break;
        }
        let step = hess.clone().cholesky()?.solve(&grad);
        let mut a = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let cand = &s - &step * a;
            if cand.norm() > 0.0 {
                if let Some((g2, h2)) = full(&cand) {
                    if g2.norm() < gn * (1.0 - 1e-4 * a) {
                        s = cand;
                        gn = g2.norm();
                        grad = g2;
                        hess = h2;
                        accepted = true;
                        break;
                    }
                }
            }
            a *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some(xk + s)
}

fn vardi_zhang_step(y: &Point, e: &Evaluation) -> Point {
    if e.t_den == 0.0 {
        return y.clone();
    }
    let t = &e.t_num / e.t_den;
    if e.eta == 0.0 {
        return t;
    }
    let r = e.pull.norm();
    if r == 0.0 {
        return y.clone();
    }
    let ratio = e.eta / r;
    t * (1.0 - ratio).max(0.0) + y * ratio.min(1.0)
}

/// Geometric median with the default solver settings and the given tolerance.
pub fn geometric_median(p: &WeightedProfile, tol_grad: f64) -> Result<MedianResult> {
    MedianSolver::with_tol(tol_grad).solve(p)
}

/// `Sigma^{-1} GM(Sigma * profile)`: minimizer of the `Sigma`-skewed loss.
///
/// `loss` is the skewed loss at the returned point; `grad_norm` and
/// `additive_bound` are measured in the transformed coordinates `Sigma z`.
pub fn skewed_geometric_median(
    p: &WeightedProfile,
    sigma: &SpdMatrix,
    tol_grad: f64,
) -> Result<MedianResult> {
    skewed_geometric_median_with(p, sigma, &MedianSolver::with_tol(tol_grad))
}

pub fn skewed_geometric_median_with(
    p: &WeightedProfile,
    sigma: &SpdMatrix,
    solver: &MedianSolver,
) -> Result<MedianResult> {
    let transformed = p.transformed(sigma)?;
    let mut solver = solver.clone();
    if let Some(s) = solver.start.take() {
        solver.start = Some(sigma.apply(&s)?);
    }
    let mut r = solver.solve(&transformed)?;
    r.point = sigma.inverse().matrix() * &r.point;
    Ok(r)
}

/// Euclidean distance from `z` to the convex hull of `points`, by Wolfe's
/// minimum-norm-point algorithm.
pub fn hull_distance(points: &[Point], z: &Point) -> f64 {
    let ys: Vec<Point> = points.iter().map(|p| p - z).collect();
    let scale = ys.iter().map(|y| y.norm_squared()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let start = (0..ys.len())
        .min_by(|&a, &b| ys[a].norm_squared().total_cmp(&ys[b].norm_squared()))
        .unwrap_or(0);
    let mut active = vec![start];
    let mut lam = vec![1.0];
    let mut x = ys[start].clone();
    let combine = |active: &[usize], lam: &[f64]| {
        active
            .iter()
            .zip(lam)
            .fold(Point::zeros(z.len()), |acc, (&i, &l)| acc + &ys[i] * l)
    };
    for _ in 0..10 * (ys.len() + z.len() + 10) {
        let xx = x.norm_squared();
        if xx <= 1e-28 * scale {
            return 0.0;
        }
        let (j, v) = (0..ys.len())
            .map(|i| (i, x.dot(&ys[i])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if xx - v <= 1e-12 * scale || active.contains(&j) {
            break;
        }
        active.push(j);
        lam.push(0.0);
        loop {
            let alpha = affine_minimizer(&ys, &active);
            if alpha.iter().all(|&a| a > 1e-15) {
                lam = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for (i, &a) in alpha.iter().enumerate() {
                if a <= 1e-15 && lam[i] - a > 0.0 {
                    theta = theta.min(lam[i] / (lam[i] - a));
                }
            }
            for i in 0..lam.len() {
                lam[i] += theta * (alpha[i] - lam[i]);
            }
            let mut k = 0;
            while k < lam.len() {
                if lam[k] <= 1e-15 {
                    lam.remove(k);
                    active.remove(k);
                } else {
                    k += 1;
                }
            }
            if active.len() <= 1 {
                if active.is_empty() {
                    active.push(j);
                    lam.push(1.0);
                }
                lam[0] = 1.0;
                break;
            }
        }
        x = combine(&active, &lam);
    }
    x.norm()
}

fn affine_minimizer(ys: &[Point], active: &[usize]) -> Vec<f64> {
    let k = active.len();
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    for a in 0..k {
        for b in 0..k {
            kkt[(a, b)] = ys[active[a]].dot(&ys[active[b]]);
        }
        kkt[(a, k)] = 1.0;
        kkt[(k, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = kkt
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .unwrap_or_else(|_| DVector::from_element(k + 1, 1.0 / k as f64));
    (0..k).map(|i| sol[i]).collect()
}
