use std::path::Path;

use fem_core::TimeGrid;
use serde_json::json;

use crate::solve::ControlSolution;
use crate::{Error, Result};

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row per time node: `time, u0, u1, ...`.
pub fn write_solution_csv(path: &Path, grid: &TimeGrid, sol: &ControlSolution) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["time".to_string()];
    header.extend((0..sol.u.nrows()).map(|i| format!("u{i}")));
    w.write_record(&header).map_err(io)?;
    for j in 0..sol.u.ncols() {
        let mut row = vec![fmt(grid.t(j))];
        row.extend(sol.u.column(j).iter().map(|v| fmt(*v)));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// Iterations, cost parts, certificate and multiplier summary as JSON, merged
/// with `extra` when it is an object.
pub fn write_metadata(path: &Path, sol: &ControlSolution, extra: serde_json::Value) -> Result<()> {
    let mut meta = json!({
        "iterations": sol.iterations,
        "converged": sol.converged,
        "stationarity": sol.stationarity,
        "cost": {
            "tracking": sol.cost.tracking,
            "terminal": sol.cost.terminal,
            "control": sol.cost.control,
            "total": sol.cost.total(),
        },
        "rank": sol.rank,
        "log": sol.log,
    });
    if let Some(c) = &sol.certificate {
        meta["certificate"] = json!({ "zeta_norm": c.zeta_norm, "bound": c.bound });
    }
    if let Some(m) = &sol.multipliers {
        meta["multipliers"] = json!({
            "control_max": m.control.amax(),
            "state_max": m.state.amax(),
            "virtual_control_max": m.virtual_control.amax(),
            "virtual_cost": m.virtual_cost,
        });
    }
    if let (Some(obj), serde_json::Value::Object(more)) = (meta.as_object_mut(), extra) {
        obj.extend(more);
    }
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::Io(e.to_string()))
}
