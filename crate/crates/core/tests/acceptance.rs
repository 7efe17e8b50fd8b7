//! Acceptance suite: one PASS/FAIL line per criterion, then a single
//! assertion that all of them passed. Run with `--nocapture` to see the table.

mod common;

use std::time::Instant;

use medianforge::median::{
    average, coordinatewise_median, geometric_median, loss_eval, loss_gradient, loss_hessian,
    loss_third_deriv, skewed_geometric_median, skewed_loss_hessian,
};
use medianforge::simulation::{
    asymptotic_experiment, build_theorem1_instance, byzantine_experiment, byzantine_experiment_fixed,
    AsymptoticOptions, ExperimentConfig, PreferenceDistribution, THEOREM1_TOL_GRAD,
};
use medianforge::skewness::skewness;
use medianforge::strategy::{byzantine_bound, no_shoe_check};
use medianforge::vector_core::{lp_gradient, lp_norm};
use medianforge::{point, Point, SpdMatrix, VoterProfile, WeightedProfile};
use nalgebra::DMatrix;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn theorem1_reproduction() -> Verdict {
    let x = 20.0;
    let v = 2000;
    let inst = build_theorem1_instance(x, v).unwrap();
    let outcome = inst.evaluate(THEOREM1_TOL_GRAD).unwrap();
    let br = inst.best_response(THEOREM1_TOL_GRAD, 5).unwrap();
    let required = (x * x - 8.0 * x + 1.0) / (8.0 * x);
    let predicted = (v as f64).powf(-1.5);
    let err = rel_err(outcome.truthful_dist, predicted);
    verdict(
        br.gain_alpha >= required && err <= 1e-6,
        format!(
            "gain {:.4} >= {required:.5}; truthful distance {:.6e} vs V^-3/2 = {predicted:.6e} (rel err {err:.1e})",
            br.gain_alpha, outcome.truthful_dist
        ),
    )
}

fn gain_ratio_law() -> Verdict {
    let x: f64 = 20.0;
    let limit = (1.0 + x * x) / (4.0 * x);
    let mut ratios = Vec::new();
    for v in [500, 1000, 2000, 4000] {
        let o = build_theorem1_instance(x, v).unwrap().evaluate(THEOREM1_TOL_GRAD).unwrap();
        ratios.push(o.ratio);
    }
    let last = ratios[3];
    let approaching = ratios.windows(2).all(|w| (w[1] - limit).abs() <= (w[0] - limit).abs());
    verdict(
        (last - limit).abs() <= 0.15,
        format!(
            "ratios {:?} -> {limit}; |ratio(4000) - limit| = {:.4}; monotone approach {approaching}",
            ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>(),
            (last - limit).abs()
        ),
    )
}

fn hessian_formula() -> Verdict {
    let mut worst: f64 = 0.0;
    for x in [8.0f64, 20.0] {
        let corners = PreferenceDistribution::corners(x).to_vec();
        let wp = WeightedProfile::uniform(&VoterProfile::new(corners).unwrap());
        let h = loss_hessian(&wp, &Point::zeros(2)).unwrap();
        let c = (1.0 + x * x).powf(-1.5);
        let expected = DMatrix::from_row_slice(2, 2, &[c, 0.0, 0.0, c * x * x]);
        worst = worst.max((h - expected).amax());
    }
    verdict(worst <= 1e-9, format!("max entry error {worst:.2e} over X in {{8, 20}}"))
}

fn skewness_equality() -> Verdict {
    let mut worst_2d: f64 = 0.0;
    for lambda in [1.0f64, 2.0, 4.0, 64.0, 400.0] {
        let s = SpdMatrix::from_diagonal(&[1.0, lambda]).unwrap();
        let expected = (1.0 + lambda) / (2.0 * lambda.sqrt()) - 1.0;
        worst_2d = worst_2d.max((skewness(&s).value - expected).abs());
    }
    let mut rng = common::rng(404);
    let mut worst_nd: f64 = 0.0;
    for d in [3, 5, 8] {
        for k in 0..3 {
            let m = common::random_spd(&mut rng, d, 0.5, 6.0);
            let closed = skewness(&SpdMatrix::new(m.clone()).unwrap()).value;
            let oracle = common::sphere_skew(&m, 12, 1000 + (d * 10 + k) as u64);
            worst_nd = worst_nd.max((closed - oracle).abs());
        }
    }
    verdict(
        worst_2d <= 1e-9 && worst_nd <= 1e-7,
        format!("2-D max error {worst_2d:.1e}; d in {{3,5,8}} closed form vs sphere oracle max gap {worst_nd:.1e}"),
    )
}

fn byzantine_ball() -> Verdict {
    let simplex = VoterProfile::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
    let mut reports = vec![byzantine_experiment_fixed(&simplex, 1, 500, 31).unwrap()];
    let dist = PreferenceDistribution::IsotropicGaussian { dim: 2 };
    for (t, s) in [(11, 5), (101, 49)] {
        reports.push(byzantine_experiment(&dist, t, s, 500, 31).unwrap());
    }
    let all_within = reports.iter().all(|r| r.all_within && r.trials.iter().all(|t| t.error.is_none()));

    // radius at |S| = 0 against a test-side Delta from an independent median
    let grid = common::grid_median_2d(
        &[point(&[0.0, 0.0]), point(&[3.0, 0.0]), point(&[0.0, 4.0]), point(&[1.0, 1.0])],
        1e-9,
    );
    let planar = VoterProfile::from_rows(&[vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 4.0], vec![1.0, 1.0]]).unwrap();
    let delta_oracle = planar.voters().iter().map(|v| (v - &grid).norm()).fold(0.0, f64::max);
    let delta = byzantine_bound(&planar, 0).unwrap();
    let g = geometric_median(&WeightedProfile::uniform(&planar), 1e-12).unwrap().point;
    let delta_exact = planar.voters().iter().map(|v| (v - &g).norm()).fold(0.0, f64::max);
    let ratio_31 = byzantine_bound(&simplex, 1).unwrap() / byzantine_bound(&simplex, 0).unwrap();
    let zero_ok = delta == delta_exact && (delta - delta_oracle).abs() <= 1e-6;
    let formula_ok = (ratio_31 - 3.0 / (2.0 * 2f64.sqrt())).abs() <= 1e-12;
    verdict(
        all_within && zero_ok && formula_ok,
        format!(
            "max displacement/radius {:?}; |S|=0 radius {delta:.12} (grid oracle {delta_oracle:.12}); (3,1) factor {ratio_31:.10}",
            reports.iter().map(|r| format!("{:.4}", r.max_ratio)).collect::<Vec<_>>()
        ),
    )
}

fn asymptotic_strategyproofness() -> Verdict {
    let config = ExperimentConfig {
        distribution: PreferenceDistribution::DiagonalGaussian {
            sigmas: vec![1.0, 1.0, 1.0, 1.0, 4.0],
        },
        v_grid: vec![1000],
        trials: 200,
        seed: 20_240_601,
        epsilon: 0.1,
        delta: 0.05,
    };
    let opts = AsymptoticOptions {
        restarts: 1,
        ..AsymptoticOptions::default()
    };
    let start = Instant::now();
    let report = asymptotic_experiment(&config, &SpdMatrix::identity(5), &opts).unwrap();
    let s = &report.summaries[0];
    verdict(
        s.fraction_within >= 0.95,
        format!(
            "{}/{} completed, fraction within Skew + 0.1 = {:.3}; max gain {:.4}, mean skew {:.4}, closed vs numeric skew gap {:.1e}; {:.0?}",
            s.completed,
            config.trials,
            s.fraction_within,
            s.max_gain,
            s.mean_skew,
            s.max_skew_gap,
            start.elapsed()
        ),
    )
}

fn oracle_equivalence() -> Verdict {
    let mut rng = common::rng(77);
    let mut failures = 0;
    let mut worst_excess: f64 = 0.0;
    for k in 0..50 {
        let v = 3 + k % 5;
        let profile = common::random_profile(&mut rng, v, 2);
        // a looser tolerance so the certificate covers the grid oracle's own error
        let r = geometric_median(&WeightedProfile::uniform(&profile), 1e-6).unwrap();
        let oracle = common::grid_median_2d(profile.voters(), 1e-7);
        let gap = (&r.point - &oracle).norm();
        if gap > r.additive_bound {
            failures += 1;
            worst_excess = worst_excess.max(gap - r.additive_bound);
        }
    }
    verdict(
        failures == 0,
        format!("{failures}/50 outside the additive bound (worst excess {worst_excess:.1e})"),
    )
}

fn derivative_stack() -> Verdict {
    let mut rng = common::rng(8);
    let mut worst: [f64; 3] = [0.0; 3];
    let mut tested = 0;
    while tested < 100 {
        let profile = common::random_profile(&mut rng, 6, 3);
        let wp = WeightedProfile::uniform(&profile);
        let z = common::gaussian_point(&mut rng, 3) * 1.5;
        if profile.voters().iter().any(|x| (x - &z).norm() < 0.2) {
            continue;
        }
        tested += 1;
        let h = 1e-4;
        let e = |i: usize| Point::from_fn(3, |k, _| if k == i { h } else { 0.0 });
        let g = loss_gradient(&wp, &z).unwrap();
        let hess = loss_hessian(&wp, &z).unwrap();
        let t = loss_third_deriv(&wp, &z).unwrap();
        let g_fd = Point::from_fn(3, |i, _| (loss_eval(&wp, &(&z + e(i))) - loss_eval(&wp, &(&z - e(i)))) / (2.0 * h));
        let h_fd = DMatrix::from_fn(3, 3, |i, j| {
            (loss_gradient(&wp, &(&z + e(j))).unwrap()[i] - loss_gradient(&wp, &(&z - e(j))).unwrap()[i]) / (2.0 * h)
        });
        let hp: Vec<DMatrix<f64>> = (0..3).map(|k| loss_hessian(&wp, &(&z + e(k))).unwrap()).collect();
        let hm: Vec<DMatrix<f64>> = (0..3).map(|k| loss_hessian(&wp, &(&z - e(k))).unwrap()).collect();
        let mut t_err: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let fd = (hp[k][(i, j)] - hm[k][(i, j)]) / (2.0 * h);
                    t_err = t_err.max((t.get(i, j, k) - fd).abs());
                }
            }
        }
        worst[0] = worst[0].max((&g - g_fd).amax() / g.amax().max(1e-3));
        worst[1] = worst[1].max((&hess - h_fd).amax() / hess.amax());
        worst[2] = worst[2].max(t_err / t.max_abs());
    }
    verdict(
        worst.iter().all(|w| *w <= 1e-5),
        format!(
            "relative errors: gradient {:.1e}, Hessian {:.1e}, third derivative {:.1e}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn invariance_suite() -> Verdict {
    let mut rng = common::rng(9);
    let mut anonymity = true;
    let mut equivariance: f64 = 0.0;
    let mut hull_ok = true;
    for k in 0..200 {
        let v = 3 + k % 9;
        let profile = common::random_profile(&mut rng, v, 2);
        let wp = WeightedProfile::uniform(&profile);
        let gm = geometric_median(&wp, 1e-12).unwrap();

        let mut shuffled = profile.voters().to_vec();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let gp = geometric_median(&WeightedProfile::uniform(&VoterProfile::new(shuffled).unwrap()), 1e-12).unwrap();
        anonymity &= gp.point == gm.point;

        if k < 50 {
            let scale = rng.random_range(0.2..5.0);
            let shift = common::gaussian_point(&mut rng, 2) * 3.0;
            let moved = profile.affine(scale, &shift).unwrap();
            let gm2 = geometric_median(&WeightedProfile::uniform(&moved), 1e-12).unwrap();
            let expected = &gm.point * scale + &shift;
            equivariance = equivariance.max((gm2.point - expected).norm() / (1.0 + scale));
        }

        let avg = average(&wp);
        hull_ok &= common::in_hull_2d(profile.voters(), &gm.point, 1e-9)
            && common::in_hull_2d(profile.voters(), &avg, 1e-9);
    }

    let theta = VoterProfile::from_rows(&[vec![0.0, 0.0], vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
    let s = 2f64.sqrt() / 2.0;
    let r = DMatrix::from_row_slice(2, 2, &[s, -s, s, s]);
    let rotated = VoterProfile::new(theta.voters().iter().map(|x| &r * x).collect()).unwrap();
    let cw_rot = coordinatewise_median(&WeightedProfile::uniform(&rotated));
    let rot_cw = &r * coordinatewise_median(&WeightedProfile::uniform(&theta));
    let counterexample = cw_rot == point(&[s * 0.0, s * 3.0]) && rot_cw == point(&[s * 0.0, s * 2.0]);

    verdict(
        anonymity && equivariance <= 1e-9 && counterexample && hull_ok,
        format!(
            "anonymity {anonymity}; equivariance error {equivariance:.1e}; Cw(R theta) = {:?}, R Cw(theta) = {:?}; hull {hull_ok}",
            cw_rot.as_slice(),
            rot_cw.as_slice()
        ),
    )
}

fn average_approximation() -> Verdict {
    let mut rng = common::rng(10);
    let mut worst_gm: f64 = 0.0;
    let mut worst_cw: f64 = 0.0;
    for k in 0..200 {
        let d = 2 + k % 4;
        let v = 2 + k % 13;
        let profile = common::random_profile(&mut rng, v, d);
        let voters = profile.voters();
        let n = voters.len() as f64;
        let mean = voters.iter().fold(Point::zeros(d), |a, x| a + x) / n;
        let trace = voters.iter().map(|x| (x - &mean).norm_squared()).sum::<f64>() / n;
        let bound = trace.sqrt();
        let wp = WeightedProfile::uniform(&profile);
        let gm = geometric_median(&wp, 1e-12).unwrap().point;
        let cw = coordinatewise_median(&wp);
        let avg = average(&wp);
        worst_gm = worst_gm.max((&avg - gm).norm() / bound);
        worst_cw = worst_cw.max((&avg - cw).norm() / bound);
    }
    // two-voter profiles attain the bound with equality, up to rounding
    let slack = 1.0 + 1e-12;
    verdict(
        worst_gm <= slack && worst_cw <= slack,
        format!("max |avg - GM| / sqrt(tr cov) = {worst_gm:.15}; max |avg - CW| / sqrt(tr cov) = {worst_cw:.15}"),
    )
}

fn lp_duality() -> Verdict {
    let mut rng = common::rng(11);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let d = 1 + k % 8;
        let z = common::gaussian_point(&mut rng, d) * rng.random_range(0.01..100.0);
        let p: f64 = match k % 10 {
            0 => 1.0,
            1 => f64::INFINITY,
            _ => rng.random_range(1.01..12.0),
        };
        let q = if p == 1.0 {
            f64::INFINITY
        } else if p.is_infinite() {
            1.0
        } else {
            p / (p - 1.0)
        };
        let g = lp_gradient(&z, p).unwrap();
        worst = worst.max((lp_norm(&g, q) - 1.0).abs());
    }
    verdict(worst <= 1e-10, format!("max | |grad|_q - 1 | = {worst:.1e} over 1000 pairs"))
}

fn skewed_median_identity() -> Verdict {
    let mut rng = common::rng(12);
    let mut identity_ok = 0;
    let mut worst_hess: f64 = 0.0;
    let tol = 1e-10;
    for k in 0..100 {
        let d = 2 + k % 4;
        let profile = common::random_profile(&mut rng, 5 + k % 7, d);
        let sigma_m = common::random_spd(&mut rng, d, 0.3, 3.0);
        let sigma = SpdMatrix::new(sigma_m.clone()).unwrap();
        let wp = WeightedProfile::uniform(&profile);
        let skewed = skewed_geometric_median(&wp, &sigma, tol).unwrap();

        // Sigma^{-1} GM(Sigma theta), with the transform done here
        let moved = VoterProfile::new(profile.voters().iter().map(|x| &sigma_m * x).collect()).unwrap();
        let plain = geometric_median(&WeightedProfile::uniform(&moved), tol).unwrap();
        let sigma_inv = sigma_m.clone().try_inverse().unwrap();
        let mapped = &sigma_inv * &plain.point;
        // A bound in Sigma coordinates maps back through |Sigma^{-1}|. At a
        // voter the certificate is exactly 0, but Sigma^{-1} (Sigma x) != x in
        // floating point, so allow the rounding of that round trip.
        let rounding = 64.0 * f64::EPSILON * sigma_inv.norm() * sigma_m.norm() * (1.0 + mapped.norm());
        let bound = sigma_inv.norm() * (skewed.additive_bound + plain.additive_bound) + rounding;
        if (&skewed.point - &mapped).norm() <= bound {
            identity_ok += 1;
        }

        let z = common::gaussian_point(&mut rng, d) * 2.0;
        let hs = skewed_loss_hessian(&wp, &sigma, &z).unwrap();
        let expected = &sigma_m * common::hessian(moved.voters(), &(&sigma_m * &z)) * &sigma_m;
        worst_hess = worst_hess.max((hs - &expected).amax() / expected.amax().max(1.0));
    }
    verdict(
        identity_ok == 100 && worst_hess <= 1e-9,
        format!("{identity_ok}/100 identities within certificate; skewed Hessian max error {worst_hess:.1e}"),
    )
}

fn no_shoe() -> Verdict {
    let mut rng = common::rng(13);
    let mut min_conflict = f64::INFINITY;
    let mut max_proportional: f64 = 0.0;
    for k in 0..100 {
        let d = 2 + k % 5;
        let sv = SpdMatrix::new(common::random_spd(&mut rng, d, 0.5, 4.0)).unwrap();
        let sw = SpdMatrix::new(common::random_spd(&mut rng, d, 0.5, 4.0)).unwrap();
        min_conflict = min_conflict.min(no_shoe_check(&sv, &sw).unwrap().skew_w);
        let c = rng.random_range(0.1..10.0);
        max_proportional = max_proportional.max(no_shoe_check(&sv, &sv.scaled(c).unwrap()).unwrap().skew_w.abs());
    }
    verdict(
        min_conflict > 1e-9 && max_proportional <= 1e-9,
        format!("min skewness over non-proportional pairs {min_conflict:.3e}; max over proportional pairs {max_proportional:.1e}"),
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Verdict); 13] = [
        ("four-corner gain and truthful distance", theorem1_reproduction),
        ("gain-ratio law", gain_ratio_law),
        ("four-corner Hessian formula", hessian_formula),
        ("skewness closed form", skewness_equality),
        ("Byzantine ball", byzantine_ball),
        ("asymptotic strategyproofness", asymptotic_strategyproofness),
        ("grid-oracle equivalence", oracle_equivalence),
        ("derivative stack", derivative_stack),
        ("invariance suite", invariance_suite),
        ("average-approximation bound", average_approximation),
        ("lp/lq duality", lp_duality),
        ("skewed-median identity", skewed_median_identity),
        ("no-shoe check", no_shoe),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        println!(
            "criterion {:>2} {} {name}: {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        if !v.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
