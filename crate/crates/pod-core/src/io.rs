//! CSV/JSON exchange formats.
//!
//! A snapshot set is stored as one CSV per block (rows = coefficients,
//! columns = time nodes) plus a JSON sidecar with the weights. A basis is a CSV
//! of its modes plus a CSV of `(i, λ_i, E(i))`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::pod::PodBasis;
use crate::snapshots::SnapshotSet;
use crate::space::{WeightTag, WeightedSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotSidecar {
    pub m: usize,
    pub n: usize,
    pub blocks: Vec<String>,
    pub omega: Vec<f64>,
    pub alpha: Vec<f64>,
    pub weight: WeightTag,
    pub include_dq: bool,
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

pub fn write_matrix_csv(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    for i in 0..a.nrows() {
        w.write_record(a.row(i).iter().map(|v| format!("{v:.16e}"))).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).map_err(io_err)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(io_err)?;
        rows.push(rec.iter().map(|s| s.trim().parse::<f64>().map_err(io_err)).collect::<Result<_>>()?);
    }
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Io(format!("ragged matrix in {}", path.display())));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Writes `<stem>_k<i>.csv` per block and `<stem>.json`.
pub fn write_snapshots(dir: &Path, stem: &str, set: &SnapshotSet) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err)?;
    let mut names = Vec::new();
    for (k, b) in set.blocks().iter().enumerate() {
        let name = format!("{stem}_k{k}.csv");
        write_matrix_csv(&dir.join(&name), b)?;
        names.push(name);
    }
    let side = SnapshotSidecar {
        m: set.m(),
        n: set.n(),
        blocks: names,
        omega: set.omega().to_vec(),
        alpha: set.alpha().to_vec(),
        weight: set.space().tag(),
        include_dq: set.includes_difference_quotients(),
    };
    let json = serde_json::to_string_pretty(&side).map_err(io_err)?;
    fs::write(dir.join(format!("{stem}.json")), json).map_err(io_err)
}

/// Reads a set written by [`write_snapshots`]; the caller supplies the space
/// matching the recorded weight tag.
pub fn read_snapshots(dir: &Path, stem: &str, space: WeightedSpace) -> Result<SnapshotSet> {
    let text = fs::read_to_string(dir.join(format!("{stem}.json"))).map_err(io_err)?;
    let side: SnapshotSidecar = serde_json::from_str(&text).map_err(io_err)?;
    if side.weight != space.tag() {
        return Err(Error::InvalidArgument(format!("sidecar weight {:?} does not match space {:?}", side.weight, space.tag())));
    }
    let blocks = side.blocks.iter().map(|b| read_matrix_csv(&dir.join(b))).collect::<Result<Vec<_>>>()?;
    let set = SnapshotSet::new(space, blocks, side.omega, side.alpha)?;
    // Difference-quotient blocks were stored explicitly, so only the flag is restored.
    Ok(if side.include_dq { set.mark_difference_quotients() } else { set })
}

/// Writes the modes to `<stem>_modes.csv` and `(i, λ_i, E(i))` to `<stem>_eigenvalues.csv`.
pub fn write_basis(dir: &Path, stem: &str, basis: &PodBasis) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err)?;
    write_matrix_csv(&dir.join(format!("{stem}_modes.csv")), basis.all_vectors())?;
    let mut w = csv::Writer::from_path(dir.join(format!("{stem}_eigenvalues.csv"))).map_err(io_err)?;
    w.write_record(["i", "lambda", "energy_ratio"]).map_err(io_err)?;
    for (i, l) in basis.eigenvalues().iter().enumerate() {
        w.write_record([format!("{}", i + 1), format!("{l:.16e}"), format!("{:.16e}", basis.energy_ratio(i + 1))])
            .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
