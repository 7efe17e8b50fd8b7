//! The four-corner profile on which the geometric median is not
//! strategyproof: gain ratios approach (1 + X^2) / (4X) as V grows.

use medianforge::simulation::{build_theorem1_instance, THEOREM1_TOL_GRAD};

fn main() -> medianforge::Result<()> {
    let x = 20.0;
    println!("limit ratio {:.4}", (1.0 + x * x) / (4.0 * x));
    for v in [500, 1000, 2000, 4000] {
        let inst = build_theorem1_instance(x, v)?;
        let o = inst.evaluate(THEOREM1_TOL_GRAD)?;
        println!(
            "V = {v:>4}: truthful {:.6e} (V^-3/2 = {:.6e}), ratio {:.4}, strategic vote achievable {}",
            o.truthful_dist, o.predicted_truthful_dist, o.ratio, o.strategic_vote_achievable
        );
    }
    let br = build_theorem1_instance(x, 2000)?.best_response(THEOREM1_TOL_GRAD, 3)?;
    println!("numerical best response at V = 2000: gain {:.4}", br.gain_alpha);
    Ok(())
}
