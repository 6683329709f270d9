//! Residue of `(FS(0) + 0.3 σ((1/i)X_1))^{-2}` on `H^3` by fiber traces and by
//! sphere quadrature of its degree `-4` component.

use hcalc::quadrature::QuadratureSpec;
use hcalc::residue::{residue, residue_density};
use hcalc::suites::perturbed_folland_stein;
use hcalc::symbol::{expansion_mul, inverse_expansion};

fn main() -> hcalc::Result<()> {
    let spec = QuadratureSpec::default();
    println!("{}", spec.measure.note());
    for cutoff in [16, 24, 32] {
        let b = perturbed_folland_stein(0.0, cutoff)?.with_truncation(-4);
        let binv = inverse_expansion(&b, 3)?.with_truncation(-4);
        let sq = expansion_mul(&binv, &binv)?;
        let traced = residue(&sq);
        let density = residue_density(&sq, &spec)?;
        println!(
            "N = {cutoff:>2}: fiber traces {:.8}, quadrature {:.8} (refinement change {:.1e})",
            traced.re,
            density.total().re,
            density.refinement_change.unwrap_or(0.0)
        );
    }
    Ok(())
}
