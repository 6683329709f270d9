//! Interpolation between two calibrated complex structures on `H^3` and the
//! Szegő symbols of the adapted frames along the way.

use hcalc::geometry::{interpolate_j, szego_symbol_for_j};
use hcalc::group::{standard_dtheta, standard_j};
use hcalc::linalg::RMat;
use hcalc::projection::symbol_idempotency_defect;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> hcalc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let j = standard_j(1);
    let dt = standard_dtheta(1);
    let squeeze = RMat::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]));
    let jp = &squeeze * &j * squeeze.clone().try_inverse().expect("diagonal");
    let path = interpolate_j(&j, &jp, &dt, 33, &mut rng)?;
    println!("{} samples, continuity modulus {:.4}", path.parameters.len(), path.continuity_modulus);
    for (t, jt) in path.parameters.iter().zip(&path.samples).step_by(path.parameters.len() / 8) {
        let s = szego_symbol_for_j(0, jt, &dt, 16)?;
        println!("t = {t:.3}  J_t = [{:+.3} {:+.3}; {:+.3} {:+.3}]  idempotency defect {:.1e}", jt[(0, 0)], jt[(0, 1)], jt[(1, 0)], jt[(1, 1)], symbol_idempotency_defect(&s)?);
    }
    Ok(())
}
