//! The skewness functional
//! `Skew(S) = sup_{x != 0} |x| |Sx| / (x^T S x) - 1`.
//!
//! Writing `x` in the eigenbasis of `S` with weights `b_i = x_i^2` on the
//! simplex, the ratio becomes `sqrt(sum b_i l_i^2) / sum b_i l_i`. For a fixed
//! first moment the second moment is largest when all mass sits on the two
//! extreme eigenvalues, so the supremum is attained on the plane spanned by
//! the extreme eigenvectors, giving `(l_min + l_max) / (2 sqrt(l_min l_max)) - 1`
//! in any dimension.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::vector_core::{Point, SpdMatrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkewnessReport {
    pub value: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `(1 + L) / (2 sqrt(L)) - 1` with `L = lambda_max / lambda_min`.
    pub lower_bound: f64,
    /// `L - 1`.
    pub upper_bound: f64,
    /// `true` when `value` comes from the closed form.
    pub certified: bool,
}

/// Skewness from the extreme eigenvalues.
pub fn skewness(s: &SpdMatrix) -> SkewnessReport {
    let (values, _) = s.eigen();
    let lambda_min = values[0];
    let lambda_max = values[values.len() - 1];
    let ratio = lambda_max / lambda_min;
    let root = ratio.sqrt();
    // (1 + L)/(2 sqrt L) - 1 written without cancellation
    let value = (root - 1.0).powi(2) / (2.0 * root);
    SkewnessReport {
        value,
        lambda_min,
        lambda_max,
        lower_bound: value,
        upper_bound: ratio - 1.0,
        certified: true,
    }
}

/// `|x| |Sx| / (x^T S x) - 1` for one direction.
pub fn skew_objective(s: &SpdMatrix, x: &Point) -> f64 {
    let sx = s.matrix() * x;
    x.norm() * sx.norm() / x.dot(&sx) - 1.0
}

/// Result of the numeric sphere search.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericSkewness {
    pub value: f64,
    pub maximizer: Point,
}

/// Multi-start projected gradient ascent of the skewness ratio on the unit
/// sphere. Independent of the eigen-decomposition, so it checks the closed form.
pub fn skewness_numeric(s: &SpdMatrix, starts: usize, seed: u64) -> NumericSkewness {
    let d = s.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut initial: Vec<Point> = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            for sign in [1.0, -1.0] {
                let mut x = Point::zeros(d);
                x[i] = 1.0;
                x[j] = sign;
                initial.push(x);
            }
        }
    }
    for _ in 0..starts {
        let x = Point::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        initial.push(x);
    }
    if initial.is_empty() {
        initial.push(Point::from_element(d, 1.0));
    }

    let mut best = NumericSkewness {
        value: f64::NEG_INFINITY,
        maximizer: initial[0].normalize(),
    };
    for x0 in initial {
        if x0.norm() == 0.0 {
            continue;
        }
        let x = ascend(s, x0.normalize());
        let value = skew_objective(s, &x);
        if value > best.value {
            best = NumericSkewness { value, maximizer: x };
        }
    }
    best
}

fn log_ratio(s: &SpdMatrix, x: &Point) -> f64 {
    let sx = s.matrix() * x;
    0.5 * x.norm_squared().ln() + 0.5 * sx.norm_squared().ln() - x.dot(&sx).ln()
}

fn ascend(s: &SpdMatrix, mut x: Point) -> Point {
    let mut f = log_ratio(s, &x);
    let mut step = 0.1;
    for _ in 0..5000 {
        let sx = s.matrix() * &x;
        let s2x = s.matrix() * &sx;
        let grad = &x / x.norm_squared() + &s2x / sx.norm_squared() - &sx * (2.0 / x.dot(&sx));
        let tangent = &grad - &x * grad.dot(&x);
        if tangent.norm() < 1e-13 {
            break;
        }
        let mut moved = false;
        while step > 1e-16 {
            let cand = (&x + &tangent * step).normalize();
            let fc = log_ratio(s, &cand);
            if fc > f {
                x = cand;
                f = fc;
                step *= 2.0;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    x
}
