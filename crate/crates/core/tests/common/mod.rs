//! Test-side oracles, written without the library's solvers so they can
//! check them.
#![allow(dead_code)]

use medianforge::{Point, VoterProfile};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_point(rng: &mut ChaCha8Rng, d: usize) -> Point {
    Point::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn random_profile(rng: &mut ChaCha8Rng, v: usize, d: usize) -> VoterProfile {
    VoterProfile::new((0..v).map(|_| gaussian_point(rng, d)).collect()).unwrap()
}

/// Random SPD matrix `Q diag(l) Q^T` with eigenvalues in `[lo, hi]`.
pub fn random_spd(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = a.qr().q();
    let l = DMatrix::from_diagonal(&Point::from_fn(d, |_, _| rng.random_range(lo..hi)));
    let m = &q * l * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// Average Euclidean distance from `z` to the voters.
pub fn loss(voters: &[Point], z: &Point) -> f64 {
    voters.iter().map(|x| (z - x).norm()).sum::<f64>() / voters.len() as f64
}

/// `(1/V) sum (I - u u^T) / |z - x|`.
pub fn hessian(voters: &[Point], z: &Point) -> DMatrix<f64> {
    let d = z.len();
    let mut h = DMatrix::zeros(d, d);
    for x in voters {
        let diff = z - x;
        let r = diff.norm();
        let u = &diff / r;
        h += (DMatrix::identity(d, d) - &u * u.transpose()) / r;
    }
    h / voters.len() as f64
}

/// Minimizer of [`loss`] in the plane by a coarse grid followed by
/// refinement stages, each 201 x 201 points over +-10 previous spacings, until
/// the spacing is at most `resolution`. The voters themselves are also
/// candidates, so minimizers sitting on a voter are found exactly.
pub fn grid_median_2d(voters: &[Point], resolution: f64) -> Point {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for x in voters {
        for i in 0..2 {
            lo[i] = lo[i].min(x[i]);
            hi[i] = hi[i].max(x[i]);
        }
    }
    let n = 200;
    let mut spacing = (0..2).map(|i| (hi[i] - lo[i]).max(1e-12) / n as f64).fold(0.0, f64::max);
    let mut center = Point::from_vec(vec![0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])]);
    let mut half = n / 2;
    let mut best = (loss(voters, &center), center.clone());
    loop {
        for a in 0..=2 * half {
            for b in 0..=2 * half {
                let z = Point::from_vec(vec![
                    center[0] + (a as f64 - half as f64) * spacing,
                    center[1] + (b as f64 - half as f64) * spacing,
                ]);
                let l = loss(voters, &z);
                if l < best.0 {
                    best = (l, z);
                }
            }
        }
        if spacing <= resolution {
            break;
        }
        center = best.1.clone();
        spacing /= 10.0;
        half = 100;
    }
    for x in voters {
        let l = loss(voters, x);
        if l <= best.0 {
            best = (l, x.clone());
        }
    }
    best.1
}

/// `|x| |S x| / x^T S x - 1`.
pub fn skew_ratio(s: &DMatrix<f64>, x: &Point) -> f64 {
    let sx = s * x;
    x.norm() * sx.norm() / x.dot(&sx) - 1.0
}

/// Maximum of [`skew_ratio`] over the unit sphere by a random-perturbation
/// hill climb with a shrinking step, from several random starts.
pub fn sphere_skew(s: &DMatrix<f64>, starts: usize, seed: u64) -> f64 {
    let d = s.nrows();
    let mut rng = rng(seed);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..starts {
        let mut x = gaussian_point(&mut rng, d).normalize();
        let mut f = skew_ratio(s, &x);
        let mut step = 0.5;
        let mut stale = 0;
        while step > 1e-13 {
            let cand = (&x + gaussian_point(&mut rng, d) * step).normalize();
            let fc = skew_ratio(s, &cand);
            if fc > f {
                x = cand;
                f = fc;
                stale = 0;
            } else {
                stale += 1;
                if stale > 20 * d {
                    step *= 0.5;
                    stale = 0;
                }
            }
        }
        best = best.max(f);
    }
    best
}

/// Andrew's monotone chain; counter-clockwise hull vertices.
pub fn convex_hull_2d(points: &[Point]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Whether `z` lies in the hull, allowing an outward slack `tol`.
pub fn in_hull_2d(points: &[Point], z: &Point, tol: f64) -> bool {
    let hull = convex_hull_2d(points);
    if hull.len() < 3 {
        return false;
    }
    (0..hull.len()).all(|i| {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let edge = [b[0] - a[0], b[1] - a[1]];
        let len = (edge[0] * edge[0] + edge[1] * edge[1]).sqrt();
        // signed distance, positive inside for a counter-clockwise hull
        let side = (edge[0] * (z[1] - a[1]) - edge[1] * (z[0] - a[0])) / len;
        side >= -tol
    })
}
