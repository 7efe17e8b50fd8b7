//! Skewness of SPD matrices: closed form against a sphere search, and the
//! conflict between two voters with different preference norms.

use medianforge::skewness::{skewness, skewness_numeric};
use medianforge::strategy::no_shoe_check;
use medianforge::SpdMatrix;

fn main() -> medianforge::Result<()> {
    for lambda in [1.0, 4.0, 64.0] {
        let s = SpdMatrix::from_diagonal(&[1.0, lambda])?;
        println!("Skew(diag(1, {lambda})) = {:.6}", skewness(&s).value);
    }
    let s = SpdMatrix::from_diagonal(&[0.5, 1.0, 2.0, 3.0, 9.0])?;
    let closed = skewness(&s);
    let numeric = skewness_numeric(&s, 16, 1);
    println!(
        "d = 5: closed form {:.12}, sphere search {:.12}, bracket [{:.4}, {:.4}]",
        closed.value, numeric.value, closed.lower_bound, closed.upper_bound
    );

    let sv = SpdMatrix::from_diagonal(&[2.0, 1.0])?;
    let sw = SpdMatrix::from_diagonal(&[1.0, 2.0])?;
    let r = no_shoe_check(&sv, &sw)?;
    println!("curvature fitted to v leaves w with skewness {:.4} (conflict: {})", r.skew_w, r.conflict);
    Ok(())
}
