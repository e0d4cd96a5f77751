use evolve::{solve_semilinear, solve_theta, ControlTrajectory};
use fem_core::presets;
use fem_core::time::{Spacing, TimeGrid};
use fem_core::{CsrMatrix, FeModel};
use nalgebra::{DMatrix, DVector};
use pod_core::{compute_pod, PodBasis, ProjectionMode, Rank, SnapshotSet, Strategy, WeightTag, WeightedSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rom::{galerkin_project, solve_rom, InitialProjection, RomModel};

fn h_space(model: &FeModel) -> WeightedSpace {
    WeightedSpace::new(model.mass().clone(), WeightTag::H).unwrap()
}

fn guiding_controls(grid: &TimeGrid) -> ControlTrajectory {
    ControlTrajectory::from_fn(2, grid, |i, t| if i == 0 { 3.0 + t } else { 2.0 * (1.0 - t / 5.0) })
}

fn max_h_error(model: &FeModel, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).column_iter().map(|c| model.mass().quad_form(&c.into_owned(), &c.into_owned()).sqrt()).fold(0.0, f64::max)
}

fn max_h_norm(model: &FeModel, a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| model.mass().quad_form(&c.into_owned(), &c.into_owned()).sqrt()).fold(0.0, f64::max)
}

#[test]
fn identity_basis_reproduces_the_full_model() {
    let model = presets::heat_1d(15).unwrap();
    let m = model.dim();
    let basis = PodBasis::from_parts(WeightedSpace::identity(m), DMatrix::identity(m, m), vec![1.0; m], m as f64);
    let rom = galerkin_project(&model, &basis, ProjectionMode::Orthogonal).unwrap();
    assert_eq!(rom.projection(), InitialProjection::Orthogonal);
    assert_eq!(rom.mass(), &model.mass().to_dense());
    for t in [0.0, 0.3] {
        assert!((rom.stiffness(t) - model.system_matrix(t).to_dense()).amax() < 1e-15);
        assert!((rom.load(t) - model.load(t)).amax() < 1e-15);
    }
    assert_eq!(rom.control(), model.control());
    assert_eq!(rom.y0(), model.y0());

    let grid = TimeGrid::new(1.0, 21, Spacing::Uniform).unwrap();
    let u = ControlTrajectory::from_fn(2, &grid, |i, t| (i as f64 + 1.0) * (3.0 * t).sin());
    let full = solve_theta(&model, &grid, &u, 1.0).unwrap();
    let red = solve_rom(&rom, &grid, &u).unwrap();
    assert!((full.values() - red.values()).amax() <= 1e-12 * full.values().amax());
}

#[test]
fn mass_weighted_basis_gives_identity_reduced_mass() {
    let model = presets::guiding(9, presets::GUIDING_VELOCITY).unwrap();
    let grid = TimeGrid::new(presets::GUIDING_T, 31, Spacing::Uniform).unwrap();
    let y = solve_theta(&model, &grid, &guiding_controls(&grid), 1.0).unwrap();
    let set = SnapshotSet::from_trajectories(h_space(&model), vec![y.values().clone()], &grid).unwrap();
    let basis = compute_pod(&set, Rank::Fixed(6), Strategy::Auto).unwrap();
    let rom = galerkin_project(&model, &basis, ProjectionMode::Orthogonal).unwrap();
    assert_eq!(rom.ell(), 6);
    assert!((rom.mass() - DMatrix::identity(6, 6)).amax() < 1e-9);
}

#[test]
fn trajectory_inside_the_subspace_is_reproduced() {
    // Oracle: the full trajectory itself. The basis is an M-orthonormalized
    // copy of every snapshot, so the subspace holds the exact solution.
    let model = presets::guiding(11, presets::GUIDING_VELOCITY).unwrap();
    let grid = TimeGrid::new(presets::GUIDING_T, 21, Spacing::Uniform).unwrap();
    let u = guiding_controls(&grid);
    let full = solve_theta(&model, &grid, &u, 1.0).unwrap();
    let y = full.values();
    let mut psi: Vec<DVector<f64>> = Vec::new();
    for col in y.column_iter() {
        let mut v = col.into_owned();
        for _ in 0..2 {
            for p in &psi {
                let c = model.mass().quad_form(p, &v);
                v.axpy(-c, p, 1.0);
            }
        }
        let nrm = model.mass().quad_form(&v, &v).sqrt();
        if nrm > 1e-10 * y.amax() {
            psi.push(v / nrm);
        }
    }
    let psi = DMatrix::from_columns(&psi);
    let c0 = psi.tr_mul(&model.mass().mul_vec(model.y0()));
    let rom = RomModel::from_matrix(&model, psi, c0, InitialProjection::Orthogonal).unwrap();
    let red = solve_rom(&rom, &grid, &u).unwrap();
    let err = max_h_error(&model, y, &rom.lift_all(red.values()));
    assert!(err <= 1e-8 * max_h_norm(&model, y), "error {err:e}");
}

#[test]
fn zero_data_stays_zero() {
    let mass = CsrMatrix::identity(4);
    let stiff = CsrMatrix::from_dense(&DMatrix::from_fn(4, 4, |i, j| if i == j { 2.0 } else if i.abs_diff(j) == 1 { -1.0 } else { 0.0 }));
    let model = FeModel::from_matrices(mass, stiff, DMatrix::from_element(4, 1, 1.0), DVector::zeros(4)).unwrap();
    let basis = PodBasis::from_parts(
        WeightedSpace::identity(4),
        DMatrix::identity(4, 4).columns(0, 2).into_owned(),
        vec![2.0, 1.0],
        3.0,
    );
    let rom = galerkin_project(&model, &basis, ProjectionMode::Orthogonal).unwrap();
    let grid = TimeGrid::new(1.0, 6, Spacing::Uniform).unwrap();
    let red = solve_rom(&rom, &grid, &ControlTrajectory::zeros(1, 6)).unwrap();
    assert!(red.values().iter().all(|v| *v == 0.0));
}

#[test]
fn rom_error_decays_with_rank() {
    let model = presets::guiding(13, presets::GUIDING_VELOCITY).unwrap();
    let grid = TimeGrid::new(presets::GUIDING_T, 51, Spacing::Uniform).unwrap();
    let u = guiding_controls(&grid);
    let full = solve_theta(&model, &grid, &u, 1.0).unwrap();
    let set = SnapshotSet::from_trajectories(h_space(&model), vec![full.values().clone()], &grid).unwrap();
    let basis = compute_pod(&set, Rank::Fixed(20), Strategy::Auto).unwrap();
    assert!(basis.rank() >= 6);
    let mut prev = f64::INFINITY;
    for ell in (2..=20).step_by(2) {
        // Ranks past the numerical rank reuse the complete basis.
        let rom = galerkin_project(&model, &basis.with_rank(ell), ProjectionMode::Orthogonal).unwrap();
        let red = solve_rom(&rom, &grid, &u).unwrap();
        let err = max_h_error(&model, full.values(), &rom.lift_all(red.values()));
        if ell <= basis.rank() {
            assert!(err < prev, "ℓ = {ell}: {err:e} ≥ {prev:e}");
        } else {
            assert!(err <= prev);
        }
        prev = err;
    }
}

#[test]
fn cross_projection_of_the_initial_state() {
    let model = presets::guiding(9, presets::GUIDING_VELOCITY).unwrap();
    let grid = TimeGrid::new(presets::GUIDING_T, 21, Spacing::Uniform).unwrap();
    let y = solve_theta(&model, &grid, &guiding_controls(&grid), 1.0).unwrap();
    let v = WeightedSpace::new(model.weight_v().clone(), WeightTag::V).unwrap();
    let set = SnapshotSet::from_trajectories(v, vec![y.values().clone()], &grid).unwrap();
    let basis = compute_pod(&set, Rank::Fixed(4), Strategy::Auto).unwrap();
    let h = h_space(&model);
    let rom = galerkin_project(&model, &basis, ProjectionMode::Cross(&h)).unwrap();
    assert_eq!(rom.projection(), InitialProjection::Cross);
    // Normal-equations oracle for the H-best approximation.
    let psi = basis.basis();
    let m = model.mass().to_dense();
    let c = (psi.transpose() * &m * &psi).lu().solve(&(psi.transpose() * &m * model.y0())).unwrap();
    assert!((rom.y0() - &c).amax() < 1e-9 * c.amax());
}

#[test]
fn semilinear_rom_with_full_lift_converges_to_the_full_solution() {
    let model = presets::semilinear(9).unwrap();
    let grid = TimeGrid::new(presets::SEMILINEAR_T, 21, Spacing::Uniform).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vals = DMatrix::from_fn(2, 21, |_, _| rng.gen_range(-1.0..1.0));
    let u = ControlTrajectory::new(vals).unwrap();
    let full = solve_semilinear(&model, &grid, &u).unwrap();
    let set = SnapshotSet::from_trajectories(h_space(&model), vec![full.values().clone()], &grid).unwrap();
    let basis = compute_pod(&set, Rank::Fixed(21), Strategy::Auto).unwrap();
    let mut errs = Vec::new();
    for ell in [2, 6, basis.rank()] {
        let rom = galerkin_project(&model, &basis.with_rank(ell), ProjectionMode::Orthogonal).unwrap();
        let red = solve_rom(&rom, &grid, &u).unwrap();
        errs.push(max_h_error(&model, full.values(), &rom.lift_all(red.values())));
    }
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    assert!(errs[2] < 1e-6 * max_h_norm(&model, full.values()), "{errs:?}");
}

#[test]
fn reduced_adjoint_is_the_transpose_of_the_reduced_forward_map() {
    // Oracle: ⟨src, L u⟩ = ⟨Lᵀ src, u⟩ for the linear reduced control-to-state map.
    let model = presets::heat_1d(12).unwrap().with_loads(Vec::new()).with_initial(DVector::zeros(12));
    let grid = TimeGrid::new(1.0, 9, Spacing::Uniform).unwrap();
    let m = model.dim();
    let basis = PodBasis::from_parts(
        WeightedSpace::identity(m),
        DMatrix::identity(m, m).columns(0, 5).into_owned(),
        vec![1.0; 5],
        5.0,
    );
    let rom = galerkin_project(&model, &basis, ProjectionMode::Orthogonal).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let u = DMatrix::from_fn(2, 9, |_, _| rng.gen_range(-1.0..1.0));
    let src = DMatrix::from_fn(5, 9, |_, _| rng.gen_range(-1.0..1.0));
    let c = rom.solve(&grid, &DVector::zeros(5), &u).unwrap();
    let q = rom.backward(&grid, &c, &src).unwrap();
    let bt = rom.bt(&q);
    let lhs: f64 = (1..9).map(|j| src.column(j).dot(&c.column(j))).sum();
    let rhs: f64 = (1..9).map(|j| grid.dt(j) * bt.column(j).dot(&u.column(j))).sum();
    assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
}
