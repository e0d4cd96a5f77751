use evolve::ocp::u_norm;
use evolve::{OcpSpec, Target};
use fem_core::presets;
use fem_core::time::{Spacing, TimeGrid};
use nalgebra::{DMatrix, DVector};
use optctl::{
    evaluate, pdass_solve, projected_gradient_solve, Dynamics, FullDynamics, MixedConstraintSpec, PdassOptions,
    PgOptions, StepRule,
};

fn guiding_problem(lo: f64, hi: f64) -> (fem_core::FeModel, TimeGrid, OcpSpec) {
    let model = presets::guiding(8, presets::GUIDING_VELOCITY).unwrap();
    let m = model.dim();
    let grid = TimeGrid::new(presets::GUIDING_T, 31, Spacing::Uniform).unwrap();
    let ocp = OcpSpec::new(1.0, 0.1, 1e-3, Target::Constant(17.0), DVector::from_element(m, 17.0), 2, 31)
        .with_box(&[lo, lo], &[hi, hi]);
    (model, grid, ocp)
}

fn tight_pg() -> PgOptions {
    PgOptions::default().with_tol(1e-12).with_step(StepRule::BarzilaiBorwein).with_max_iter(20_000)
}

#[test]
fn without_active_constraints_it_matches_projected_gradient() {
    let (model, grid, ocp) = guiding_problem(-1e3, 1e3);
    let full = FullDynamics::new(&model);
    let mixed = MixedConstraintSpec::unbounded(model.dim(), grid.len(), 1e-3, 1.0).unwrap();
    let u0 = DMatrix::zeros(2, grid.len());
    let sol = pdass_solve(&full, &grid, &ocp, &mixed, &u0, &PdassOptions::default()).unwrap();
    let pg = projected_gradient_solve(&full, &grid, &ocp, &u0, &tight_pg()).unwrap();
    assert!(sol.converged && sol.iterations <= 2, "{} iterations", sol.iterations);
    let rel = u_norm(&grid, &(&sol.u - &pg.u)) / u_norm(&grid, &pg.u);
    assert!(rel < 1e-7, "{rel:.3e}");
    let mult = sol.multipliers.unwrap();
    assert_eq!(mult.virtual_control.amax(), 0.0);
    assert_eq!(mult.control.amax(), 0.0);
}

#[test]
fn with_active_control_bounds_it_matches_projected_gradient() {
    let (model, grid, ocp) = guiding_problem(0.0, 30.0);
    let full = FullDynamics::new(&model);
    let mixed = MixedConstraintSpec::unbounded(model.dim(), grid.len(), 1e-3, 1.0).unwrap();
    let u0 = DMatrix::zeros(2, grid.len());
    let sol = pdass_solve(&full, &grid, &ocp, &mixed, &u0, &PdassOptions::default()).unwrap();
    let pg = projected_gradient_solve(&full, &grid, &ocp, &u0, &tight_pg()).unwrap();
    assert!(sol.converged);
    assert!(sol.u.iter().any(|&v| v == 0.0 || v == 30.0), "box never active");
    let rel = u_norm(&grid, &(&sol.u - &pg.u)) / u_norm(&grid, &pg.u);
    assert!(rel < 1e-7, "{rel:.3e}");
}

#[test]
fn a_degenerate_box_is_solved_in_one_iteration() {
    let (model, grid, ocp) = guiding_problem(5.0, 5.0);
    let full = FullDynamics::new(&model);
    let mixed = MixedConstraintSpec::unbounded(model.dim(), grid.len(), 1e-3, 1.0).unwrap();
    let sol = pdass_solve(&full, &grid, &ocp, &mixed, &DMatrix::zeros(2, grid.len()), &PdassOptions::default()).unwrap();
    assert_eq!(sol.iterations, 1);
    assert!(sol.converged);
    assert!(sol.u.iter().all(|&v| v == 5.0));
    let mult = sol.multipliers.unwrap();
    assert_eq!(mult.virtual_control.amax(), 0.0);
    assert_eq!(mult.virtual_cost, 0.0);
}

fn penalized_value(full: &FullDynamics<'_>, grid: &TimeGrid, ocp: &OcpSpec, mixed: &MixedConstraintSpec, u: &DMatrix<f64>) -> f64 {
    let e = evaluate(full, grid, ocp, u).unwrap();
    let lumped = full.mass().mul_vec(&DVector::from_element(full.full_dim(), 1.0));
    let mut penalty = 0.0;
    for j in 1..grid.len() {
        for i in 0..full.full_dim() {
            let y = e.state[(i, j)];
            let d = (y - mixed.yb[(i, j)]).max(0.0) + (mixed.ya[(i, j)] - y).max(0.0);
            penalty += grid.weights()[j] * lumped[i] * d * d;
        }
    }
    e.cost.total() + 0.5 * mixed.eta() * penalty
}

#[test]
fn active_state_bounds_give_a_stationary_point_of_the_penalized_problem() {
    let model = presets::heat_1d(19).unwrap();
    let m = model.dim();
    let n = 11;
    let grid = TimeGrid::new(1.0, n, Spacing::Uniform).unwrap();
    let ocp = OcpSpec::new(1.0, 0.5, 0.05, Target::Constant(1.0), DVector::from_element(m, 1.0), 2, n)
        .with_box(&[-5.0, -5.0], &[5.0, 5.0]);
    let mixed = MixedConstraintSpec::from_fn(m, &grid, |_, _| -10.0, |_, _| 0.8, 0.1, 1.0).unwrap();
    let full = FullDynamics::new(&model);
    let sol = pdass_solve(&full, &grid, &ocp, &mixed, &DMatrix::zeros(2, n), &PdassOptions::default()).unwrap();
    assert!(sol.converged);
    let mult = sol.multipliers.clone().unwrap();
    assert!(mult.virtual_control.amax() > 0.0, "state bound never active");

    // Central differences of the penalized value, independent of the adjoint.
    let h = 1e-5;
    let fd = DMatrix::from_fn(2, n, |i, j| {
        let mut plus = sol.u.clone();
        let mut minus = sol.u.clone();
        plus[(i, j)] += h;
        minus[(i, j)] -= h;
        let d = penalized_value(&full, &grid, &ocp, &mixed, &plus) - penalized_value(&full, &grid, &ocp, &mixed, &minus);
        d / (2.0 * h) / grid.weights()[j]
    });
    let projected = &sol.u - (&sol.u - &fd).zip_zip_map(&ocp.ua, &ocp.ub, |v, a, b| v.max(a).min(b));
    let scale = fd.amax().max(1.0);
    assert!(projected.amax() < 1e-5 * scale, "projected residual {:.3e}", projected.amax());
}

#[test]
fn active_state_bounds_terminate_with_relaxed_feasibility_and_complementarity() {
    let t_final = 5.5;
    let model = presets::mpc(8, presets::GUIDING_VELOCITY, t_final + 1.0).unwrap();
    let m = model.dim();
    let n = 111;
    let grid = TimeGrid::new(t_final, n, Spacing::Uniform).unwrap();
    let ocp = OcpSpec::new(0.0, 0.0, 1.0, Target::Constant(0.0), DVector::zeros(m), 1, n).with_box(&[0.0], &[1e7]);
    let epsilon = 1e-3;
    let mixed = MixedConstraintSpec::from_fn(m, &grid, |t, _| (16.0 + t / 4.0).min(18.0), |_, _| 32.0, epsilon, 1.0).unwrap();
    let full = FullDynamics::new(&model);
    let sol = pdass_solve(&full, &grid, &ocp, &mixed, &DMatrix::zeros(1, n), &PdassOptions::default()).unwrap();
    assert!(sol.converged && sol.iterations <= 50, "{} iterations", sol.iterations);
    let mult = sol.multipliers.clone().unwrap();
    assert!(mult.virtual_control.amax() > 0.0);
    for j in 1..n {
        let slack = epsilon * mult.virtual_control.column(j).amax() + 1e-8;
        for i in 0..m {
            let y = sol.state[(i, j)];
            assert!(y >= mixed.ya[(i, j)] - slack && y <= mixed.yb[(i, j)] + slack, "node {i} time {j}: {y}");
        }
    }
    for ((mu, u), (a, b)) in mult.control.iter().zip(sol.u.iter()).zip(ocp.ua.iter().zip(ocp.ub.iter())) {
        if *mu < 0.0 {
            assert_eq!(u, a);
        } else if *mu > 0.0 {
            assert_eq!(u, b);
        }
    }
    assert!(sol.stationarity <= 1e-8 * (1.0 + u_norm(&grid, &sol.u)), "{:.3e}", sol.stationarity);
}

#[test]
fn rejects_nonlinear_dynamics() {
    let model = presets::semilinear_1d(9).unwrap();
    let grid = TimeGrid::new(1.0, 5, Spacing::Uniform).unwrap();
    let ocp = OcpSpec::new(1.0, 0.0, 0.1, Target::Constant(0.0), DVector::zeros(model.dim()), 2, 5);
    let mixed = MixedConstraintSpec::unbounded(model.dim(), 5, 1e-3, 1.0).unwrap();
    let full = FullDynamics::new(&model);
    assert!(pdass_solve(&full, &grid, &ocp, &mixed, &DMatrix::zeros(2, 5), &PdassOptions::default()).is_err());
}
