//! Residues along a path of involutions joining two projections whose leading
//! symbols differ by a rotation of Hermite levels.

use std::f64::consts::FRAC_PI_2;

use hcalc::geometry::szego_symbol;
use hcalc::projection::{projection_from_symbol, rotated_symbol, transport_involution, FromSymbolOptions, IdempotentSymbolPath};
use hcalc::residue::lower_terms_for_seed;

fn main() -> hcalc::Result<()> {
    let cutoff = 16;
    let s0 = szego_symbol(0, 1, cutoff)?;
    let path = IdempotentSymbolPath::from_fn(17, |t| rotated_symbol(&s0, 1, 0, 1, t * FRAC_PI_2))?;
    let opts = FromSymbolOptions::default();
    let a = projection_from_symbol(&path.samples[0].1, Some(&lower_terms_for_seed(s0.shape, 1, 0.2)), opts)?;
    let end = &path.samples.last().expect("nonempty path").1;
    let b = projection_from_symbol(end, Some(&lower_terms_for_seed(s0.shape, 2, 0.2)), opts)?;
    let rep = transport_involution(&path, &a, &b)?;
    for (t, r) in rep.parameters.iter().zip(&rep.residues_re) {
        println!("t = {t:.4}  Res G_t = {r:+.3e}");
    }
    println!(
        "endpoint difference {:.1e}, max drift rate {:.1e}, continuity modulus {:.3}",
        rep.endpoint_difference, rep.max_drift_rate, rep.continuity_modulus
    );
    Ok(())
}
