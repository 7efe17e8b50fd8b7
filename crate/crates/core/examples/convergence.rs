//! Finite-sample medians and Hessians approach a large-sample reference.

use medianforge::simulation::{convergence_diagnostics, ExperimentConfig, PreferenceDistribution};

fn main() -> medianforge::Result<()> {
    let config = ExperimentConfig {
        distribution: PreferenceDistribution::IsotropicGaussian { dim: 5 },
        v_grid: vec![250, 500, 1000, 2000, 4000],
        trials: 8,
        seed: 9,
        epsilon: 0.1,
        delta: 0.05,
    };
    let r = convergence_diagnostics(&config)?;
    for ((v, m), h) in config.v_grid.iter().zip(&r.median_errors).zip(&r.hessian_errors) {
        println!("V = {v:>4}: median error {m:.4e}, Hessian error {h:.4e}");
    }
    println!("log-log slope of the median error {:.3}", r.median_slope);
    Ok(())
}
