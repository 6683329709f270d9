//! On-disk formats of symbols, expansions, sector operators and model configurations.
//!
//! A symbol container is a little-endian binary file:
//!
//! ```text
//! magic "HSYM" | version u32 | n u32 | rank u32 | N u32 | degree i32 | flags u32
//! fiber_plus  (dim × dim complex, row-major, re then im as f64)
//! fiber_minus (same layout)
//! if flags & ABELIAN: count u32 | rows u32 | cols u32 | count blocks, row-major
//! ```
//!
//! An expansion is a JSON manifest naming one container per component.
//! A sector operator is a binary file of row-major blocks with a JSON index
//! giving the sector, size and byte offset of each block.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::CMat;
use crate::nilmanifold::{NilmanifoldConfig, SectorOperator};
use crate::symbol::{AbelianTrace, HomogeneousSymbol, SymbolExpansion, SymbolShape};
use crate::{Error, Result};

const SYMBOL_MAGIC: &[u8; 4] = b"HSYM";
const SECTOR_MAGIC: &[u8; 4] = b"HSEC";
const VERSION: u32 = 1;

pub const FLAG_SELF_ADJOINT: u32 = 1;
pub const FLAG_ABELIAN: u32 = 2;

fn corrupt(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn write_matrix<W: Write>(w: &mut W, m: &CMat) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            w.write_f64::<LittleEndian>(z.re)?;
            w.write_f64::<LittleEndian>(z.im)?;
        }
    }
    Ok(())
}

fn read_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<CMat> {
    let mut m = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re = r.read_f64::<LittleEndian>()?;
            let im = r.read_f64::<LittleEndian>()?;
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(m)
}

fn read_magic<R: Read>(r: &mut R, expected: &[u8; 4]) -> Result<()> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != expected {
        return Err(corrupt(format!("bad magic {magic:?}")));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported container version {version}")));
    }
    Ok(())
}

fn to_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| corrupt(format!("size {v} does not fit the header")))
}

/// Serializes a symbol into a container.
pub fn write_symbol<W: Write>(w: &mut W, p: &HomogeneousSymbol) -> Result<()> {
    let mut flags = 0;
    if p.self_adjoint {
        flags |= FLAG_SELF_ADJOINT;
    }
    if p.abelian.is_some() {
        flags |= FLAG_ABELIAN;
    }
    w.write_all(SYMBOL_MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(to_u32(p.shape.n)?)?;
    w.write_u32::<LittleEndian>(to_u32(p.shape.rank)?)?;
    w.write_u32::<LittleEndian>(to_u32(p.shape.cutoff)?)?;
    w.write_i32::<LittleEndian>(p.degree)?;
    w.write_u32::<LittleEndian>(flags)?;
    write_matrix(w, &p.fiber_plus)?;
    write_matrix(w, &p.fiber_minus)?;
    if let Some(trace) = &p.abelian {
        let (rows, cols) = trace.samples.first().map_or((0, 0), |s| s.shape());
        w.write_u32::<LittleEndian>(to_u32(trace.samples.len())?)?;
        w.write_u32::<LittleEndian>(to_u32(rows)?)?;
        w.write_u32::<LittleEndian>(to_u32(cols)?)?;
        for s in &trace.samples {
            write_matrix(w, s)?;
        }
    }
    Ok(())
}

/// Reads a container written by [`write_symbol`].
pub fn read_symbol<R: Read>(r: &mut R) -> Result<HomogeneousSymbol> {
    read_magic(r, SYMBOL_MAGIC)?;
    let n = r.read_u32::<LittleEndian>()? as usize;
    let rank = r.read_u32::<LittleEndian>()? as usize;
    let cutoff = r.read_u32::<LittleEndian>()? as usize;
    let degree = r.read_i32::<LittleEndian>()?;
    let flags = r.read_u32::<LittleEndian>()?;
    if n == 0 || rank == 0 || cutoff == 0 || n > 8 {
        return Err(corrupt(format!("header n = {n}, rank = {rank}, N = {cutoff}")));
    }
    let shape = SymbolShape::new(n, rank, cutoff);
    let dim = shape.fiber_dim();
    let plus = read_matrix(r, dim, dim)?;
    let minus = read_matrix(r, dim, dim)?;
    let mut p = HomogeneousSymbol::new(degree, shape, plus, minus)?;
    if flags & FLAG_ABELIAN != 0 {
        let count = r.read_u32::<LittleEndian>()? as usize;
        let rows = r.read_u32::<LittleEndian>()? as usize;
        let cols = r.read_u32::<LittleEndian>()? as usize;
        let samples = (0..count).map(|_| read_matrix(r, rows, cols)).collect::<Result<Vec<_>>>()?;
        p = p.with_abelian(AbelianTrace { samples });
    }
    p.self_adjoint = flags & FLAG_SELF_ADJOINT != 0;
    Ok(p)
}

pub fn save_symbol(path: &Path, p: &HomogeneousSymbol) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_symbol(&mut w, p)?;
    w.flush()?;
    Ok(())
}

pub fn load_symbol(path: &Path) -> Result<HomogeneousSymbol> {
    read_symbol(&mut BufReader::new(File::open(path)?))
}

/// One component entry of an expansion manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentEntry {
    pub degree: i32,
    pub file: String,
}

/// JSON manifest of a stored expansion; file names are relative to the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionManifest {
    pub n: usize,
    pub rank: usize,
    #[serde(rename = "N")]
    pub cutoff: usize,
    pub truncation_degree: i32,
    pub components: Vec<ComponentEntry>,
}

/// Writes `<dir>/<name>.json` and one `<name>.deg<k>.hsym` per component.
pub fn save_expansion(dir: &Path, name: &str, p: &SymbolExpansion) -> Result<PathBuf> {
    let shape = p.shape().ok_or_else(|| Error::InvalidArgument("empty expansion has no shape".into()))?;
    std::fs::create_dir_all(dir)?;
    let mut components = Vec::new();
    for q in &p.components {
        let file = format!("{name}.deg{}.hsym", q.degree);
        save_symbol(&dir.join(&file), q)?;
        components.push(ComponentEntry { degree: q.degree, file });
    }
    let manifest = ExpansionManifest {
        n: shape.n,
        rank: shape.rank,
        cutoff: shape.cutoff,
        truncation_degree: p.truncation_degree,
        components,
    };
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(path)
}

/// Reads an expansion from its manifest and checks each component against it.
pub fn load_expansion(manifest_path: &Path) -> Result<SymbolExpansion> {
    let manifest: ExpansionManifest = serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut components = Vec::new();
    for entry in &manifest.components {
        let q = load_symbol(&dir.join(&entry.file))?;
        let expected = SymbolShape::new(manifest.n, manifest.rank, manifest.cutoff);
        if q.degree != entry.degree || q.shape != expected {
            return Err(Error::DimensionMismatch(format!("component {} disagrees with the manifest", entry.file)));
        }
        components.push(q);
    }
    SymbolExpansion::new(components, manifest.truncation_degree)
}

/// Location of one sector block inside the binary file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub sector: i64,
    pub dim: usize,
    pub offset: u64,
}

/// JSON index of a stored sector operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorIndex {
    pub data_file: String,
    pub sector_max: i64,
    pub rank: usize,
    pub symbol_tag: Option<String>,
    pub blocks: Vec<BlockEntry>,
}

/// Writes `<dir>/<name>.hsec` and its index `<dir>/<name>.json`.
pub fn save_sector_operator(dir: &Path, name: &str, op: &SectorOperator) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let data_file = format!("{name}.hsec");
    let mut w = BufWriter::new(File::create(dir.join(&data_file))?);
    w.write_all(SECTOR_MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    let mut offset = 8u64;
    let mut blocks = Vec::new();
    for (m, block) in op.sectors() {
        if block.nrows() != block.ncols() {
            return Err(Error::DimensionMismatch(format!("sector {m} block is not square")));
        }
        write_matrix(&mut w, block)?;
        blocks.push(BlockEntry { sector: m, dim: block.nrows(), offset });
        offset += 16 * (block.nrows() * block.ncols()) as u64;
    }
    w.flush()?;
    let index = SectorIndex { data_file, sector_max: op.sector_max, rank: op.rank, symbol_tag: op.symbol_tag.clone(), blocks };
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&index)? + "\n")?;
    Ok(path)
}

/// Reads a sector operator through its index.
pub fn load_sector_operator(index_path: &Path) -> Result<SectorOperator> {
    let index: SectorIndex = serde_json::from_str(&std::fs::read_to_string(index_path)?)?;
    let dir = index_path.parent().unwrap_or(Path::new("."));
    let mut r = BufReader::new(File::open(dir.join(&index.data_file))?);
    read_magic(&mut r, SECTOR_MAGIC)?;
    let expected = (2 * index.sector_max + 1) as usize;
    if index.blocks.len() != expected {
        return Err(corrupt(format!("index lists {} blocks, expected {expected}", index.blocks.len())));
    }
    let mut offset = 8u64;
    let mut per_sector = Vec::with_capacity(expected);
    for (k, entry) in index.blocks.iter().enumerate() {
        if entry.sector != k as i64 - index.sector_max || entry.offset != offset {
            return Err(corrupt(format!("block {k} is out of order")));
        }
        per_sector.push(read_matrix(&mut r, entry.dim, entry.dim)?);
        offset += 16 * (entry.dim * entry.dim) as u64;
    }
    Ok(SectorOperator { per_sector, sector_max: index.sector_max, rank: index.rank, symbol_tag: index.symbol_tag })
}

/// Model configuration `{period, M, N, K}`.
pub fn save_model_config(path: &Path, cfg: &NilmanifoldConfig) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(cfg)? + "\n")?;
    Ok(())
}

pub fn load_model_config(path: &Path) -> Result<NilmanifoldConfig> {
    let cfg: NilmanifoldConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn sample_symbol() -> HomogeneousSymbol {
        let shape = SymbolShape::new(1, 2, 3);
        let dim = shape.fiber_dim();
        let plus = CMat::from_fn(dim, dim, |i, j| Complex64::new(i as f64 - 0.5 * j as f64, 0.25 * (i * j) as f64));
        let minus = plus.adjoint() * c(2.0);
        HomogeneousSymbol::new(-2, shape, plus, minus).unwrap()
    }

    #[test]
    fn symbol_round_trip_is_exact() {
        let p = sample_symbol();
        let mut bytes = Vec::new();
        write_symbol(&mut bytes, &p).unwrap();
        assert_eq!(bytes.len(), 28 + 2 * 16 * 36);
        assert_eq!(read_symbol(&mut bytes.as_slice()).unwrap(), p);
    }

    #[test]
    fn abelian_samples_and_flags_survive() {
        let mut p = sample_symbol();
        p.self_adjoint = true;
        let p = p.with_abelian(AbelianTrace { samples: vec![CMat::identity(2, 2); 4] });
        let mut bytes = Vec::new();
        write_symbol(&mut bytes, &p).unwrap();
        assert_eq!(read_symbol(&mut bytes.as_slice()).unwrap(), p);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = Vec::new();
        write_symbol(&mut bytes, &sample_symbol()).unwrap();
        bytes[0] = b'X';
        assert!(read_symbol(&mut bytes.as_slice()).is_err());
        assert!(read_symbol(&mut &bytes[4..10]).is_err());
    }

    #[test]
    fn expansion_and_sector_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = sample_symbol();
        let q = HomogeneousSymbol::new(-4, p.shape, p.fiber_minus.clone(), p.fiber_plus.clone()).unwrap();
        let e = SymbolExpansion::new(vec![p, q], -6).unwrap();
        let manifest = save_expansion(dir.path(), "e", &e).unwrap();
        assert_eq!(load_expansion(&manifest).unwrap(), e);

        let op = SectorOperator {
            per_sector: (0..5).map(|k| CMat::identity(k + 1, k + 1) * c(k as f64)).collect(),
            sector_max: 2,
            rank: 1,
            symbol_tag: Some("test".into()),
        };
        let index = save_sector_operator(dir.path(), "op", &op).unwrap();
        assert_eq!(load_sector_operator(&index).unwrap(), op);
    }

    #[test]
    fn model_config_uses_short_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let cfg = NilmanifoldConfig::default();
        save_model_config(&path, &cfg).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for key in ["\"period\"", "\"M\"", "\"N\"", "\"K\""] {
            assert!(text.contains(key));
        }
        assert_eq!(load_model_config(&path).unwrap(), cfg);
    }
}
