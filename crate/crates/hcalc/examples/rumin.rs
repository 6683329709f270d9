//! The Rumin complex on the quotient of `H^3`: exactness, Laplacian bounds,
//! kernel projections and the residue duality of `d` and `d*`.

use hcalc::nilmanifold::{build_model, NilmanifoldConfig};
use hcalc::suites::rumin_run;

fn main() -> hcalc::Result<()> {
    let model = build_model(&NilmanifoldConfig { sectors: 16, hermite_cutoff: 16, ..NilmanifoldConfig::default() })?;
    let run = rumin_run(&model)?;
    let rep = &run.report;
    println!("D_R1 d_R0 = {:.1e}, d_R1 D_R1 = {:.1e} (relative)", rep.dd_d0, rep.d1_dd);
    println!("min scaled eigenvalues of the Laplacians: {:?}", rep.min_scaled_singular_values);
    for p in run.projections.all() {
        let res = p.fit.as_ref().map_or("no fit".to_string(), |f| format!("{:+.4e} ± {:.1e}", f.c_re, f.band));
        println!("{:<12} idempotency {:.1e}  Res {res}", p.name, p.idempotency_defect);
    }
    for (name, v) in run.projections.duality() {
        if let Some((sum, band)) = v {
            println!("{name}: |Res Π₀(d*) + Res Π₀(d)| = {sum:.2e} (band {band:.1e})");
        }
    }
    Ok(())
}
