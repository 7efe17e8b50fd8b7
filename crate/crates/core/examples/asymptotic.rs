//! Empirical gains at stress-placed preferred vectors against the skewness
//! of the estimated Hessian, for an anisotropic population.

use medianforge::simulation::{asymptotic_experiment, AsymptoticOptions, ExperimentConfig, PreferenceDistribution};
use medianforge::SpdMatrix;

fn main() -> medianforge::Result<()> {
    let config = ExperimentConfig {
        distribution: PreferenceDistribution::DiagonalGaussian {
            sigmas: vec![1.0, 1.0, 1.0, 1.0, 4.0],
        },
        v_grid: vec![250, 1000],
        trials: 8,
        seed: 2024,
        epsilon: 0.1,
        delta: 0.05,
    };
    let opts = AsymptoticOptions {
        restarts: 1,
        ..AsymptoticOptions::default()
    };
    let report = asymptotic_experiment(&config, &SpdMatrix::identity(5), &opts)?;
    for s in &report.summaries {
        println!(
            "V = {:>4}: max gain {:.4}, median {:.4}, mean skew {:.4}, within skew + eps: {:.0}%",
            s.v,
            s.max_gain,
            s.median_gain,
            s.mean_skew,
            100.0 * s.fraction_within
        );
    }
    Ok(())
}
