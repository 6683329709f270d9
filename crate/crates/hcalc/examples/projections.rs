//! Projections with prescribed leading symbol: residues of Szegő projections,
//! their complements and adjoints, and the seed independence of `ρ_R`.

use hcalc::geometry::szego_symbol;
use hcalc::projection::{projection_from_symbol, FromSymbolOptions};
use hcalc::residue::{lower_terms_for_seed, rho_R, IdempotentPair};

fn main() -> hcalc::Result<()> {
    let cutoff = 16;
    for k in 0..3 {
        let s = szego_symbol(k, 1, cutoff)?;
        let lower = lower_terms_for_seed(s.shape, 11, 0.2);
        let p = projection_from_symbol(&s, Some(&lower), FromSymbolOptions::default())?;
        let q = p.complement()?;
        println!(
            "s_{k}: Res Π = {:+.3e}, Res (1 - Π) = {:+.3e}, Res Π* = {:+.3e}, idempotency defect {:.1e}",
            p.residue().re,
            q.residue().re,
            p.adjoint().residue().re,
            p.idempotency_defect
        );
        let pair = IdempotentPair::new(s, "trivial line bundle")?;
        let rho = rho_R(&pair, &[1, 2, 3], 0.2)?;
        println!("      ρ_R = {:+.3e}, spread over seeds {:.1e}", rho.value, rho.spread);
    }
    Ok(())
}
