//! Geometric median, coordinate-wise median and average of a small profile,
//! with the solver's certificate.

use medianforge::median::{average, coordinatewise_median, geometric_median, hull_distance};
use medianforge::{VoterProfile, WeightedProfile};

fn main() -> medianforge::Result<()> {
    let profile = VoterProfile::from_rows(&[
        vec![0.0, 0.0],
        vec![4.0, 0.0],
        vec![0.0, 3.0],
        vec![1.0, 1.0],
        vec![40.0, 40.0],
    ])?;
    let wp = WeightedProfile::uniform(&profile);
    let gm = geometric_median(&wp, 1e-10)?;
    println!("geometric median   {:?}", gm.point.as_slice());
    println!("  grad_norm {:.2e}, additive_bound {:.2e}, {} iterations", gm.grad_norm, gm.additive_bound, gm.iterations);
    println!("  distance to hull {:.1e}", hull_distance(wp.points(), &gm.point));
    println!("coordinate-wise    {:?}", coordinatewise_median(&wp).as_slice());
    // the outlier drags the mean far more than the median
    println!("average            {:?}", average(&wp).as_slice());
    Ok(())
}
