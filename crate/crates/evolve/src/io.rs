//! Trajectory export: a CSV with one column per time node and a JSON header.

use std::fs;
use std::path::Path;

use fem_core::TimeGrid;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::trajectory::{Kind, Trajectory};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryHeader {
    pub kind: Kind,
    pub nodes: Vec<f64>,
    pub dim: usize,
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// Writes `<stem>.csv` and `<stem>.json`.
pub fn write_trajectory(dir: &Path, stem: &str, traj: &Trajectory) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err)?;
    let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv"))).map_err(io_err)?;
    let v = traj.values();
    for i in 0..v.nrows() {
        w.write_record(v.row(i).iter().map(|x| format!("{x:.16e}"))).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    let header = TrajectoryHeader { kind: traj.kind(), nodes: traj.grid().nodes().to_vec(), dim: traj.dim() };
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&header).map_err(io_err)?).map_err(io_err)
}

pub fn read_trajectory(dir: &Path, stem: &str) -> Result<Trajectory> {
    let header: TrajectoryHeader =
        serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json"))).map_err(io_err)?).map_err(io_err)?;
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(dir.join(format!("{stem}.csv"))).map_err(io_err)?;
    let n = header.nodes.len();
    let mut data = Vec::with_capacity(header.dim * n);
    for rec in r.records() {
        let rec = rec.map_err(io_err)?;
        for s in rec.iter() {
            data.push(s.trim().parse::<f64>().map_err(io_err)?);
        }
    }
    if data.len() != header.dim * n {
        return Err(Error::Io("trajectory file does not match its header".into()));
    }
    let values = DMatrix::from_row_slice(header.dim, n, &data);
    let grid = TimeGrid::from_nodes(header.nodes).map_err(|e| Error::Io(e.to_string()))?;
    Trajectory::new(values, grid, header.kind)
}
