//! A minority of arbitrary voters cannot push the median outside a ball
//! around the truthful median.

use medianforge::simulation::{byzantine_experiment, byzantine_experiment_fixed, PreferenceDistribution};
use medianforge::VoterProfile;

fn main() -> medianforge::Result<()> {
    let simplex = VoterProfile::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]])?;
    let r = byzantine_experiment_fixed(&simplex, 1, 60, 5)?;
    println!("simplex, 1 attacker: max displacement / radius = {:.4}, all within {}", r.max_ratio, r.all_within);

    let dist = PreferenceDistribution::IsotropicGaussian { dim: 2 };
    for (t, s) in [(11, 5), (101, 49)] {
        let r = byzantine_experiment(&dist, t, s, 60, 5)?;
        println!(
            "{t} truthful vs {s}: max displacement {:.3}, max ratio {:.4}, all within {}",
            r.max_displacement, r.max_ratio, r.all_within
        );
    }
    Ok(())
}
