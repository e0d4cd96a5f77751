use evolve::{OcpSpec, Target};
use fem_core::presets;
use fem_core::time::{Spacing, TimeGrid};
use nalgebra::{DMatrix, DVector};
use optctl::{projected_gradient_solve, write_metadata, write_solution_csv, FullDynamics, PgOptions};
use serde_json::json;

#[test]
fn control_csv_and_metadata_round_trip() {
    let model = presets::heat_1d(9).unwrap();
    let grid = TimeGrid::new(1.0, 6, Spacing::Uniform).unwrap();
    let ocp = OcpSpec::new(1.0, 0.0, 0.1, Target::Constant(0.5), DVector::zeros(model.dim()), 2, 6);
    let sol = projected_gradient_solve(&FullDynamics::new(&model), &grid, &ocp, &DMatrix::zeros(2, 6), &PgOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let csv_path = dir.path().join("control.csv");
    write_solution_csv(&csv_path, &grid, &sol).unwrap();
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), ["time", "u0", "u1"]);
    for (j, row) in reader.records().enumerate() {
        let row = row.unwrap();
        assert_eq!(row[0].parse::<f64>().unwrap(), grid.t(j));
        assert_eq!(row[1].parse::<f64>().unwrap(), sol.u[(0, j)]);
        assert_eq!(row[2].parse::<f64>().unwrap(), sol.u[(1, j)]);
    }

    let meta_path = dir.path().join("meta.json");
    write_metadata(&meta_path, &sol, json!({ "preset": "heat-1d" })).unwrap();
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&meta_path).unwrap()).unwrap();
    assert_eq!(meta["preset"], "heat-1d");
    assert_eq!(meta["iterations"], sol.iterations);
    assert_eq!(meta["converged"], true);
    assert_eq!(meta["cost"]["total"].as_f64().unwrap(), sol.cost.total());
    assert!(meta.get("certificate").is_none());
}
