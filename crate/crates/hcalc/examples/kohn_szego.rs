//! The `Y(q)` table, the Szegő gate and the constructive kernel projections of
//! `∂̄_b` on `H^5`.

use hcalc::geometry::dbar_kernel_projection;
use hcalc::group::{szego_projection_gate, y_condition};

fn main() -> hcalc::Result<()> {
    for n in 1..=4 {
        let row: Vec<&str> = (0..=n).map(|q| if y_condition(q, n, 0, n) { "Y" } else { "-" }).collect();
        println!("n = {n}, strictly pseudoconvex: Y(q) for q = 0..{n}: {}", row.join(" "));
    }
    println!("gate S_b;1 at n = 4, signature (3, 1): {}", szego_projection_gate(1, 3, 1, 4));
    println!("gate S_b;0 at n = 1, signature (1, 0): {}", szego_projection_gate(0, 1, 0, 1));

    let d = dbar_kernel_projection(2, 0, 8, 4)?;
    println!("n = 2, q = 0: Res Π₀(∂̄_b) = {:+.3e}, idempotency defect {:.1e}", d.dbar_kernel.residue().re, d.dbar_kernel.idempotency_defect);
    if let Some(s) = &d.szego {
        println!("              Res S_b;0 = {:+.3e}, relation defect {:.1e}", s.residue().re, d.szego_relation_defect.unwrap_or(f64::NAN));
    }
    match dbar_kernel_projection(1, 0, 8, 4) {
        Err(e) => println!("n = 1, q = 0: {e}"),
        Ok(_) => println!("n = 1, q = 0: unexpectedly constructed"),
    }
    Ok(())
}
