use evolve::ocp::{u_inner, u_norm};
use evolve::{io, solve_adjoint, solve_semilinear, solve_theta, ControlTrajectory, FullSolver, OcpSpec, Target};
use fem_core::mesh::{Mesh, Rect};
use fem_core::model::{assemble_model, ControlShape, InitialState, LoadTerm, ModelData, TimeProfile};
use fem_core::time::{Spacing, TimeGrid};
use fem_core::{presets, BandedCholesky, CsrMatrix, FeModel};
use nalgebra::{dmatrix, dvector, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scalar_model(a: f64) -> FeModel {
    FeModel::from_matrices(
        CsrMatrix::identity(1),
        CsrMatrix::from_dense(&dmatrix![a]),
        dmatrix![1.0],
        dvector![1.0],
    )
    .unwrap()
}

#[test]
fn scalar_implicit_explicit_and_midpoint_steps() {
    let model = scalar_model(1.0);
    let grid = TimeGrid::new(0.1, 2, Spacing::Uniform).unwrap();
    let u = ControlTrajectory::zeros(1, 2);
    let y = solve_theta(&model, &grid, &u, 1.0).unwrap();
    assert!((y.at(1)[0] - 1.0 / 1.1).abs() < 1e-15);
    let y = solve_theta(&model, &grid, &u, 0.0).unwrap();
    assert!((y.at(1)[0] - 0.9).abs() < 1e-15);
    let y = solve_theta(&model, &grid, &u, 0.5).unwrap();
    assert!((y.at(1)[0] - 0.95 / 1.05).abs() < 1e-15);
}

#[test]
fn heat_eigenmode_decays_geometrically() {
    let mesh = Mesh::structured(1, 21, Rect::interval(0.0, 1.0)).unwrap();
    let data = ModelData {
        kappa: 1.0,
        controls: vec![ControlShape::Indicator { regions: vec![Rect::interval(0.0, 0.5)], value: 1.0 }],
        ..Default::default()
    };
    let base = assemble_model(&mesh, &data).unwrap();
    // Oracle: dense generalized eigenpairs of (K, M) through M = LLᵀ.
    let m = base.mass().to_dense();
    let k = base.stiffness().to_dense();
    let l = m.clone().cholesky().unwrap().l();
    let linv = l.clone().try_inverse().unwrap();
    let eig = SymmetricEigen::new(&linv * &k * linv.transpose());
    let idx = 3;
    let lambda = eig.eigenvalues[idx];
    let mode = linv.transpose() * eig.eigenvectors.column(idx);
    let model = base.with_initial(mode.clone());
    let grid = TimeGrid::new(0.2, 11, Spacing::Uniform).unwrap();
    let y = solve_theta(&model, &grid, &ControlTrajectory::zeros(1, 11), 1.0).unwrap();
    for j in 0..11 {
        let expected = &mode * (1.0 + grid.dt(1) * lambda).powi(-(j as i32));
        assert!((y.at(j) - expected).amax() <= 1e-10 * mode.amax());
    }
}

#[test]
fn cubic_scalar_step_finds_the_real_root() {
    let model = FeModel::from_matrices(CsrMatrix::identity(1), CsrMatrix::zeros(1, 1), dmatrix![1.0], dvector![0.0])
        .unwrap()
        .with_cubic(true);
    let grid = TimeGrid::new(1.0, 2, Spacing::Uniform).unwrap();
    let u = ControlTrajectory::new(dmatrix![0.0, 2.0]).unwrap();
    let y = solve_semilinear(&model, &grid, &u).unwrap();
    assert!((y.at(1)[0] - 1.0).abs() < 1e-12);
}

#[test]
fn cubic_model_at_rest_stays_at_rest() {
    let model = presets::semilinear(7).unwrap().with_initial(DVector::zeros(49));
    let grid = TimeGrid::new(1.0, 6, Spacing::Uniform).unwrap();
    let y = solve_semilinear(&model, &grid, &ControlTrajectory::zeros(2, 6)).unwrap();
    assert_eq!(y.values().amax(), 0.0);
}

#[test]
fn cubic_model_converges_at_first_order_in_time() {
    let model = presets::semilinear_1d(41).unwrap();
    let end = |n: usize| {
        let grid = TimeGrid::new(1.0, n + 1, Spacing::Uniform).unwrap();
        let u = ControlTrajectory::from_fn(2, &grid, |i, t| if i == 0 { 1.0 + t } else { (3.0 * t).sin() });
        solve_semilinear(&model, &grid, &u).unwrap().last()
    };
    let (a, b, c) = (end(20), end(40), end(80));
    let order = ((&a - &b).norm() / (&b - &c).norm()).log2();
    assert!(order >= 0.95, "measured order {order}");
}

fn heat_problem() -> (FeModel, TimeGrid, OcpSpec) {
    let model = presets::heat_1d(20).unwrap();
    let grid = TimeGrid::new(1.0, 11, Spacing::Uniform).unwrap();
    let yd = DMatrix::from_fn(20, 11, |i, j| 0.5 + 0.02 * i as f64 - 0.03 * j as f64);
    let yd2 = DVector::from_fn(20, |i, _| 1.0 - 0.01 * i as f64);
    let ocp = OcpSpec::new(1.0, 0.5, 0.01, Target::Nodal(yd), yd2, 2, 11)
        .with_nominal(DMatrix::from_fn(2, 11, |i, j| 0.1 * i as f64 - 0.05 * j as f64));
    (model, grid, ocp)
}

fn cost(model: &FeModel, grid: &TimeGrid, ocp: &OcpSpec, u: &DMatrix<f64>) -> f64 {
    let y = FullSolver::new(model).forward(grid, model.y0(), u, 1.0).unwrap();
    ocp.cost(model.mass(), grid, y.values(), u).total()
}

fn gradient(model: &FeModel, grid: &TimeGrid, ocp: &OcpSpec, u: &DMatrix<f64>) -> DMatrix<f64> {
    let solver = FullSolver::new(model);
    let y = solver.forward(grid, model.y0(), u, 1.0).unwrap();
    let p = solver.adjoint(grid, y.values(), ocp).unwrap();
    ocp.gradient(grid, u, &solver.bt(p.values()))
}

/// Central differences of the discrete cost, converted to the U-gradient by
/// dividing by the quadrature weight of each node.
fn fd_gradient(model: &FeModel, grid: &TimeGrid, ocp: &OcpSpec, u: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(u.nrows(), u.ncols());
    for i in 0..u.nrows() {
        for j in 0..u.ncols() {
            let mut up = u.clone();
            up[(i, j)] += h;
            let mut dn = u.clone();
            dn[(i, j)] -= h;
            g[(i, j)] = (cost(model, grid, ocp, &up) - cost(model, grid, ocp, &dn)) / (2.0 * h) / grid.weights()[j];
        }
    }
    g
}

#[test]
fn adjoint_gradient_matches_finite_differences() {
    let (model, grid, ocp) = heat_problem();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = DMatrix::from_fn(2, 11, |_, _| rng.gen_range(-1.0..1.0));
    let g = gradient(&model, &grid, &ocp, &u);
    let fd = fd_gradient(&model, &grid, &ocp, &u, 1e-4);
    for (a, b) in g.iter().zip(fd.iter()) {
        assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-3 * fd.amax()), "{a} vs {b}");
    }
}

#[test]
fn cubic_adjoint_gradient_matches_finite_differences() {
    let model = presets::semilinear_1d(20).unwrap();
    let grid = TimeGrid::new(1.0, 11, Spacing::Uniform).unwrap();
    let ocp = OcpSpec::new(1.0, 1.0, 0.1, Target::Constant(0.2), DVector::from_element(20, 0.1), 2, 11);
    let u = DMatrix::from_fn(2, 11, |i, j| 0.3 * i as f64 - 0.1 * (j as f64).sin());
    let g = gradient(&model, &grid, &ocp, &u);
    let fd = fd_gradient(&model, &grid, &ocp, &u, 1e-5);
    for (a, b) in g.iter().zip(fd.iter()) {
        assert!((a - b).abs() <= 1e-5 * b.abs().max(1e-3 * fd.amax()), "{a} vs {b}");
    }
}

#[test]
fn adjoint_vanishes_without_tracking_or_at_the_target() {
    let (model, grid, ocp) = heat_problem();
    let u = ControlTrajectory::zeros(2, 11);
    let y = solve_theta(&model, &grid, &u, 1.0).unwrap();
    let silent = OcpSpec { sigma1: 0.0, sigma2: 0.0, ..ocp.clone() };
    assert_eq!(solve_adjoint(&model, &grid, &y, &silent).unwrap().values().amax(), 0.0);
    let hit = OcpSpec { yd1: Target::Nodal(y.values().clone()), yd2: y.last(), ..ocp };
    assert_eq!(solve_adjoint(&model, &grid, &y, &hit).unwrap().values().amax(), 0.0);
}

#[test]
fn reduced_hessian_is_self_adjoint_in_u() {
    let (model, grid, ocp) = heat_problem();
    let u = DMatrix::from_fn(2, 11, |i, j| (i + j) as f64 * 0.1);
    let g0 = gradient(&model, &grid, &ocp, &u);
    let dirs: Vec<(usize, usize)> = vec![(0, 2), (1, 5), (0, 9), (1, 10), (0, 0)];
    let cols: Vec<DMatrix<f64>> = dirs
        .iter()
        .map(|&(i, j)| {
            let mut up = u.clone();
            up[(i, j)] += 1.0;
            gradient(&model, &grid, &ocp, &up) - &g0
        })
        .collect();
    for (a, &(ia, ja)) in dirs.iter().enumerate() {
        for (b, &(ib, jb)) in dirs.iter().enumerate() {
            let lhs = grid.weights()[jb] * cols[a][(ib, jb)];
            let rhs = grid.weights()[ja] * cols[b][(ia, ja)];
            assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }
}

#[test]
fn unforced_coercive_model_dissipates_mass_norm() {
    let model = presets::guiding(13, presets::GUIDING_VELOCITY).unwrap().with_loads(Vec::new());
    assert_eq!(model.coercivity().unwrap().gamma2, 0.0);
    let grid = TimeGrid::new(5.0, 41, Spacing::Uniform).unwrap();
    let y = solve_theta(&model, &grid, &ControlTrajectory::zeros(2, 41), 1.0).unwrap();
    let norms: Vec<f64> = (0..41).map(|j| model.mass().quad_form(&y.at(j), &y.at(j)).sqrt()).collect();
    assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-14)));
}

#[test]
fn discrete_energy_estimate_holds() {
    let model = presets::guiding(13, presets::GUIDING_VELOCITY).unwrap();
    let gamma1 = model.coercivity().unwrap().gamma1;
    let grid = TimeGrid::new(5.0, 51, Spacing::Uniform).unwrap();
    let u = ControlTrajectory::from_fn(2, &grid, |i, t| if i == 0 { 1.8 * (1.0 - t.cos()) } else { 4.5 });
    let y = solve_theta(&model, &grid, &u, 1.0).unwrap();
    let wv = BandedCholesky::factor(model.weight_v()).unwrap();
    let mut lhs = model.mass().quad_form(&y.last(), &y.last());
    let mut rhs = model.mass().quad_form(&y.at(0), &y.at(0));
    for j in 1..grid.len() {
        let dt = grid.dt(j);
        lhs += gamma1 * dt * model.weight_v().quad_form(&y.at(j), &y.at(j));
        let f = model.load(grid.t(j)) + model.apply_control(&u.at(j));
        rhs += dt / gamma1 * f.dot(&wv.solve(&f));
    }
    assert!(lhs <= 1.05 * rhs, "{lhs} > {rhs}");
}

#[test]
fn trajectory_file_round_trip() {
    let model = presets::heat_1d(8).unwrap();
    let grid = TimeGrid::new(1.0, 5, Spacing::Uniform).unwrap();
    let y = solve_theta(&model, &grid, &ControlTrajectory::constant(&[1.0, -0.5], 5), 1.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    io::write_trajectory(dir.path(), "y", &y).unwrap();
    assert_eq!(io::read_trajectory(dir.path(), "y").unwrap(), y);
}

#[test]
fn control_helpers() {
    let grid = TimeGrid::new(1.0, 3, Spacing::Uniform).unwrap();
    let a = dmatrix![1.0, 2.0, 3.0];
    assert!((u_inner(&grid, &a, &a) - (0.25 + 2.0 + 2.25)).abs() < 1e-15);
    assert!((u_norm(&grid, &a) - 4.5f64.sqrt()).abs() < 1e-15);
    let u = ControlTrajectory::new(a.clone()).unwrap();
    assert!(u.clone().with_bounds(dmatrix![0.0, 0.0, 0.0], dmatrix![2.0, 2.0, 2.0]).is_err());
    assert!(u.with_bounds(dmatrix![0.0, 0.0, 0.0], dmatrix![3.0, 3.0, 3.0]).is_ok());
}

#[test]
fn source_loads_enter_the_right_hand_side() {
    let mesh = Mesh::structured(1, 5, Rect::interval(0.0, 1.0)).unwrap();
    let data = ModelData {
        controls: vec![ControlShape::Indicator { regions: vec![Rect::interval(0.0, 1.0)], value: 1.0 }],
        sources: vec![(ControlShape::Indicator { regions: vec![Rect::interval(0.0, 1.0)], value: 1.0 }, TimeProfile::Constant(2.0))],
        initial: InitialState::Constant(0.0),
        ..Default::default()
    };
    let model = assemble_model(&mesh, &data).unwrap();
    let spatial = model.loads()[0].spatial.clone();
    let grid = TimeGrid::new(1.0, 4, Spacing::Uniform).unwrap();
    // A load f equals the control input u = f with the same shape.
    let with_load = solve_theta(&model, &grid, &ControlTrajectory::zeros(1, 4), 1.0).unwrap();
    let as_control = solve_theta(
        &model.clone().with_loads(vec![LoadTerm { profile: TimeProfile::Constant(0.0), spatial }]),
        &grid,
        &ControlTrajectory::constant(&[2.0], 4),
        1.0,
    )
    .unwrap();
    assert!((with_load.values() - as_control.values()).amax() < 1e-14);
}
