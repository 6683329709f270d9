//! Stores an expansion and a sector operator, reads them back and compares.

use hcalc::nilmanifold::{build_model, lift, NilmanifoldConfig};
use hcalc::serialize::{load_expansion, load_sector_operator, save_expansion, save_model_config, save_sector_operator};
use hcalc::suites::perturbed_folland_stein;

fn main() -> hcalc::Result<()> {
    let dir = std::env::temp_dir().join("hcalc-serialization-example");
    let e = perturbed_folland_stein(0.5, 16)?;
    let manifest = save_expansion(&dir, "fs", &e)?;
    let back = load_expansion(&manifest)?;
    println!("expansion: {} components, identical after reload: {}", back.components.len(), back == e);

    let cfg = NilmanifoldConfig::default();
    save_model_config(&dir.join("model.json"), &cfg)?;
    let op = lift(&e, &build_model(&cfg)?)?;
    let index = save_sector_operator(&dir, "fs_sectors", &op)?;
    let op_back = load_sector_operator(&index)?;
    println!("sector operator: {} blocks, identical after reload: {}", op_back.per_sector.len(), op_back == op);
    println!("files in {}", dir.display());
    Ok(())
}
