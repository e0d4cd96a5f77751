use evolve::{ControlTrajectory, FullSolver, OcpSpec, Target};
use fem_core::presets;
use fem_core::time::TimeGrid;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_forward_map_is_affine(seed in proptest::collection::vec(-2.0f64..2.0, 22), gaps in proptest::collection::vec(0.01f64..0.3, 10)) {
        let model = presets::heat_1d(12).unwrap();
        let mut nodes = vec![0.0];
        for g in &gaps {
            nodes.push(nodes.last().unwrap() + g);
        }
        let grid = TimeGrid::from_nodes(nodes).unwrap();
        let u = DMatrix::from_fn(2, 11, |i, j| seed[i * 11 + j]);
        let v = DMatrix::from_fn(2, 11, |i, j| seed[21 - (i * 11 + j)]);
        let solver = FullSolver::new(&model);
        let run = |c: &DMatrix<f64>| solver.forward(&grid, model.y0(), c, 1.0).unwrap().into_values();
        let zero = run(&DMatrix::zeros(2, 11));
        let lhs = run(&(&u + &v)) - run(&u);
        let rhs = run(&v) - &zero;
        prop_assert!((lhs - rhs).amax() <= 1e-12 * (1.0 + zero.amax()));
    }

    #[test]
    fn adjoint_is_linear_in_the_tracking_residual(s1 in 0.0f64..3.0, s2 in 0.0f64..3.0, shift in -1.0f64..1.0) {
        let model = presets::heat_1d(10).unwrap();
        let grid = TimeGrid::new(0.5, 6, fem_core::time::Spacing::Uniform).unwrap();
        let solver = FullSolver::new(&model);
        let y = solver.forward(&grid, model.y0(), ControlTrajectory::zeros(2, 6).values(), 1.0).unwrap();
        let yd2 = DVector::from_element(10, shift);
        let a = OcpSpec::new(s1, s2, 1.0, Target::Constant(shift), yd2.clone(), 2, 6);
        let b = OcpSpec::new(2.0 * s1, 2.0 * s2, 1.0, Target::Constant(shift), yd2, 2, 6);
        let pa = solver.adjoint(&grid, y.values(), &a).unwrap().into_values();
        let pb = solver.adjoint(&grid, y.values(), &b).unwrap().into_values();
        prop_assert!((pb - pa * 2.0).amax() <= 1e-12 * (1.0 + s1 + s2));
    }
}
