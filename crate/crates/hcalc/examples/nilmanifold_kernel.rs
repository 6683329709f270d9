//! Kernel of the level-0 Szegő projection realized on the quotient of `H^3`,
//! and the log fit of its singular expansion.

use hcalc::suites::{szego_kernel_fit, SuiteParams};

fn main() -> hcalc::Result<()> {
    let r = szego_kernel_fit(0, &SuiteParams::default())?;
    println!("M = {}, N = {}", r.sectors, r.cutoff);
    for s in &r.fit.shells {
        println!("t = {:.4}  mean kernel {:+.6e}  ({} samples)", s.radius, s.mean_re, s.count);
    }
    println!("log slope {:.4}", r.fit.log_slope);
    println!("log coefficient c = {:+.3e} ± {:.1e}, symbolic residue {:+.3e}", r.fit.c_re, r.fit.band, r.symbolic_residue);
    println!("c + 2β₀ = {:+.3e}", r.fit.c_re + 2.0 * r.fit.beta0_re);
    Ok(())
}
