use std::sync::OnceLock;

use evolve::{OcpSpec, Target};
use fem_core::presets;
use fem_core::time::{Spacing, TimeGrid};
use fem_core::FeModel;
use nalgebra::DVector;
use optctl::{evaluate, pareto_front, FullDynamics, ParetoFront, ParetoOptions, ParetoPod};

const N: usize = 31;

fn problem() -> &'static (FeModel, TimeGrid, OcpSpec) {
    static CELL: OnceLock<(FeModel, TimeGrid, OcpSpec)> = OnceLock::new();
    CELL.get_or_init(|| {
        let model = presets::guiding(6, presets::GUIDING_VELOCITY).unwrap();
        let m = model.dim();
        let grid = TimeGrid::new(presets::GUIDING_T, N, Spacing::Uniform).unwrap();
        let ocp = OcpSpec::new(1.0, 0.1, 1e-3, Target::Constant(17.0), DVector::from_element(m, 17.0), 2, N)
            .with_box(&[0.0, 0.0], &[30.0, 30.0]);
        (model, grid, ocp)
    })
}

fn full_front() -> &'static ParetoFront {
    static CELL: OnceLock<ParetoFront> = OnceLock::new();
    CELL.get_or_init(|| {
        let (model, grid, ocp) = problem();
        pareto_front(model, grid, ocp, &ParetoOptions::default()).unwrap()
    })
}

/// Exhaustive pairwise dominance check.
fn dominated_pairs(images: &[[f64; 2]]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (a, p) in images.iter().enumerate() {
        for (b, q) in images.iter().enumerate() {
            let weakly = q[0] <= p[0] && q[1] <= p[1];
            let strictly = q[0] < p[0] - 1e-12 || q[1] < p[1] - 1e-12;
            if a != b && weakly && strictly {
                out.push((b, a));
            }
        }
    }
    out
}

#[test]
fn front_images_are_mutually_nondominated() {
    let front = full_front();
    assert!(front.points.len() >= 3, "{} points", front.points.len());
    assert_eq!(dominated_pairs(&front.images()), vec![]);
    assert!(front.is_nondominated(0.0));
}

#[test]
fn consecutive_images_are_at_most_the_target_spacing_apart() {
    let front = full_front();
    for (i, s) in front.spacings().iter().enumerate() {
        assert!(*s <= front.h_par + 1e-9, "gap {i}: {s}");
    }
}

#[test]
fn front_is_ordered_from_tracking_to_control_cost() {
    let img = full_front().images();
    assert!(img.windows(2).all(|w| w[0][0] <= w[1][0] && w[0][1] >= w[1][1]));
}

#[test]
fn last_point_is_the_nominal_control() {
    let (model, grid, ocp) = problem();
    let last = full_front().points.last().unwrap();
    assert_eq!(last.u, ocp.clip(&ocp.u_nominal));
    assert_eq!(last.value[1], 0.0);
    let cost = evaluate(&FullDynamics::new(model), grid, ocp, &last.u).unwrap().cost;
    assert!((cost.state() - last.value[0]).abs() <= 1e-12 * cost.state());
}

#[test]
fn images_are_the_objectives_of_the_returned_controls() {
    let (model, grid, ocp) = problem();
    let full = FullDynamics::new(model);
    for p in &full_front().points {
        let cost = evaluate(&full, grid, ocp, &p.u).unwrap().cost;
        assert!((cost.state() - p.value[0]).abs() <= 1e-12 * cost.state().max(1.0));
        assert!((cost.control - p.value[1]).abs() <= 1e-12 * cost.control.max(1.0));
        assert!(ocp.is_admissible(&p.u, 0.0));
    }
}

#[test]
fn reference_points_lie_below_their_images() {
    for p in &full_front().points {
        if let Some(z) = p.reference {
            assert!(z[0] < p.value[0] && z[1] < p.value[1], "{z:?} vs {:?}", p.value);
        }
    }
}

#[test]
fn surrogate_points_are_certified_to_the_requested_accuracy() {
    let (model, grid, ocp) = problem();
    let eps_max = 1e-2;
    let opts = ParetoOptions { pod: Some(ParetoPod { ell0: 3, ell_incr: 2, ell_max: 20, eps_max }), ..ParetoOptions::default() };
    let front = pareto_front(model, grid, ocp, &opts).unwrap();
    assert!(front.points.len() >= 3);
    for p in &front.points {
        if let Some(e) = p.estimate {
            assert!(e <= eps_max, "estimate {e:.3e}");
            assert!(p.rank.is_some());
        }
    }
    assert!(front.points.iter().any(|p| p.estimate.is_some()));
    assert!(front.is_nondominated(0.0));
}

#[test]
fn csv_lists_every_point() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("front.csv");
    let front = full_front();
    front.write_csv(&path).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["index", "j1", "j2", "z1", "z2", "spacing", "rank", "estimate"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), front.points.len());
    for (row, p) in rows.iter().zip(&front.points) {
        assert_eq!(row[1].parse::<f64>().unwrap(), p.value[0]);
        assert_eq!(row[2].parse::<f64>().unwrap(), p.value[1]);
    }
}

#[test]
fn rejects_a_nonpositive_spacing() {
    let (model, grid, ocp) = problem();
    let opts = ParetoOptions { h_par: 0.0, ..ParetoOptions::default() };
    assert!(pareto_front(model, grid, ocp, &opts).is_err());
}
