//! Small unconstrained minimizers used by the best-response search.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: DVector<f64>,
    pub value: f64,
}

/// Nelder-Mead simplex search with dimension-adapted coefficients
/// (Gao and Han, 2012).
pub(crate) fn nelder_mead(
    mut f: impl FnMut(&DVector<f64>) -> f64,
    x0: &DVector<f64>,
    step: f64,
    max_evals: usize,
    ftol: f64,
) -> Minimum {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };
    let mut evals = 0;
    let mut eval = |x: &DVector<f64>, evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.clone(), eval(x0, &mut evals)));
    for i in 0..n {
        let mut x = x0.clone();
        x[i] += step;
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = (worst - best).abs();
        if spread <= ftol * (best.abs() + ftol) {
            let size = simplex
                .iter()
                .map(|(x, _)| (x - &simplex[0].0).amax())
                .fold(0.0, f64::max);
            if size <= 1e-12 * (1.0 + simplex[0].0.amax()) || spread == 0.0 {
                break;
            }
        }
        let centroid = simplex[..n]
            .iter()
            .fold(DVector::zeros(n), |acc, (x, _)| acc + x)
            / nf;
        let xr = &centroid + (&centroid - &simplex[n].0) * alpha;
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = &centroid + (&xr - &centroid) * gamma;
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = &centroid + (&xr - &centroid) * rho;
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = &centroid + (&simplex[n].0 - &centroid) * rho;
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fr.min(simplex[n].1) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let x = &x_best + (&entry.0 - &x_best) * sigma;
            let v = eval(&x, &mut evals);
            *entry = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value }
}

/// BFGS with a backtracking Armijo line search. `fg` returns the value and
/// gradient.
pub(crate) fn bfgs(
    mut fg: impl FnMut(&DVector<f64>) -> (f64, DVector<f64>),
    x0: &DVector<f64>,
    max_iter: usize,
    gtol: f64,
) -> Minimum {
    let n = x0.len();
    let mut x = x0.clone();
    let (mut fx, mut g) = fg(&x);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    for _ in 0..max_iter {
        if !fx.is_finite() || g.norm() <= gtol {
            break;
        }
        let mut dir = -(&hinv * &g);
        let mut slope = g.dot(&dir);
        if slope >= 0.0 {
            hinv = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = g.dot(&dir);
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn = &x + &dir * t;
            let (fxn, gn) = fg(&xn);
            if fxn.is_finite() && fxn <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fxn, gn));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fxn, gn)) = accepted else {
            break;
        };
        let s = &xn - &x;
        let yv = &gn - &g;
        let sy = s.dot(&yv);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - &s * yv.transpose() * rho;
            let right = &eye - &yv * s.transpose() * rho;
            hinv = &left * &hinv * &right + &s * s.transpose() * rho;
        }
        let stalled = (fx - fxn).abs() <= 1e-16 * fx.abs().max(1e-300) && s.amax() <= 1e-15 * (1.0 + x.amax());
        x = xn;
        fx = fxn;
        g = gn;
        if stalled {
            break;
        }
    }
    Minimum { x, value: fx }
}
