//! Group law, dilations and the bracket table of the left-invariant frame on `H^5`.

use hcalc::group::{bracket, dilate_point, group_law, GroupPoint, HeisenbergGroupSpec};

fn main() -> hcalc::Result<()> {
    let spec = HeisenbergGroupSpec::new(2)?;
    let x = GroupPoint::new(vec![0.4, 1.0, -0.5, 0.25, 2.0])?;
    let y = GroupPoint::new(vec![-1.2, 0.3, 0.7, -0.9, 0.1])?;
    let z = GroupPoint::new(vec![0.05, -0.6, 1.1, 0.4, -0.3])?;

    let left = group_law(&group_law(&x, &y)?, &z)?;
    let right = group_law(&x, &group_law(&y, &z)?)?;
    let assoc = left.coords.iter().zip(&right.coords).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("associativity defect {assoc:.2e}");

    let e = group_law(&x, &x.inverse())?;
    println!("x x^-1 = {:?}", e.coords);

    let t = 1.7;
    let lhs = dilate_point(t, &group_law(&x, &y)?)?;
    let rhs = group_law(&dilate_point(t, &x)?, &dilate_point(t, &y)?)?;
    let dil = lhs.coords.iter().zip(&rhs.coords).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("dilation homomorphism defect {dil:.2e}");

    println!("nonzero brackets [X_i, X_j] (index 0 is the central field):");
    for i in 1..spec.dim() {
        for j in (i + 1)..spec.dim() {
            let b = bracket(i, j, spec)?;
            if b.iter().any(|v| *v != 0.0) {
                println!("  [X_{i}, X_{j}] = {b:?}");
            }
        }
    }
    Ok(())
}
