//! Best strategic vote of a voter whose preferred vector lies outside the
//! set of medians it can enforce.

use medianforge::simulation::{sample_profile, PreferenceDistribution};
use medianforge::strategy::{best_response_with, AchievableSet, BestResponseOptions};
use medianforge::{geometric_median, point, SpdMatrix, WeightedProfile};

fn main() -> medianforge::Result<()> {
    let dist = PreferenceDistribution::DiagonalGaussian {
        sigmas: vec![1.0, 3.0],
    };
    let honest = sample_profile(&dist, 200, 11)?;
    let g = geometric_median(&WeightedProfile::uniform(&honest), 1e-10)?.point;
    let theta0 = &g + point(&[0.05, 0.05]);
    println!("theta0 achievable: {}", AchievableSet::new(&honest).contains(&theta0));

    let opts = BestResponseOptions {
        restarts: 3,
        ..BestResponseOptions::default()
    };
    let report = best_response_with(&theta0, &honest, &SpdMatrix::identity(2), &opts)?;
    for c in &report.candidates {
        println!("{:<10} distance {:.6e}", c.source.as_str(), c.distance);
    }
    println!(
        "truthful {:.6e} -> strategic {:.6e}, gain {:.4} (a lower bound on manipulability here)",
        report.truthful_dist, report.strategic_dist, report.gain_alpha
    );
    Ok(())
}
