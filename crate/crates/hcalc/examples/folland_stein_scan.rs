//! Smallest fiber singular value of the Folland–Stein operator `FS(λ)` on `H^3`
//! as `λ` crosses the exceptional values `±(n + 2k)`.

use hcalc::geometry::folland_stein_min_singular_value;

fn main() -> hcalc::Result<()> {
    let cutoff = 32;
    println!("{:>8}  {:>12}", "lambda", "min sigma");
    for i in -16..=16 {
        let lambda = 0.25 * i as f64;
        let s = folland_stein_min_singular_value(lambda, 1, cutoff)?;
        let mark = if s < 1e-8 { "  exceptional" } else { "" };
        println!("{lambda:>8.2}  {s:>12.4e}{mark}");
    }
    Ok(())
}
