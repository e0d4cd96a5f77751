use std::fs;
use std::path::Path;
use std::process::Command as Process;

use cli::{cmd_control, cmd_mpc, cmd_pareto, cmd_pod, cmd_rom, cmd_simulate, run, CliError, Command, ControlChoice, Preset, RunConfig};
use evolve::FullSolver;
use fem_core::presets;
use fem_core::time::{Spacing, TimeGrid};
use proptest::prelude::*;

fn config(dir: &Path) -> RunConfig {
    RunConfig { resolution: 8, time_nodes: 31, out_dir: dir.to_path_buf(), ..RunConfig::default() }
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|row| row.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn empty_object_is_the_default_configuration() {
    assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    let cfg = RunConfig::default();
    assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
}

#[test]
fn invalid_configurations_are_rejected() {
    for text in [
        r#"{"unknown": 1}"#,
        r#"{"pod": {"rank": 3, "energy_tol": 0.01}}"#,
        r#"{"pod": {"rank": null}}"#,
        r#"{"pod": {"rank": null, "energy_tol": 1.5}}"#,
        r#"{"control": {"lower": 2, "upper": 1}}"#,
        r#"{"pareto": {"ell0": 30, "ell_max": 20}}"#,
        r#"{"time_nodes": 1}"#,
        r#"{"preset": "square"}"#,
    ] {
        let err = RunConfig::from_json(text).unwrap_err();
        assert!(matches!(err, CliError::Config(_)), "{text}: {err}");
        assert_eq!(err.exit_code(), 2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn configurations_survive_a_json_round_trip(
        resolution in 2usize..60,
        time_nodes in 2usize..400,
        tol in proptest::option::of(1e-6f64..0.5),
        weight in 1e-4f64..10.0,
        seed in any::<u64>(),
        dq in any::<bool>(),
    ) {
        let mut cfg = RunConfig { resolution, time_nodes, seed, ..RunConfig::default() };
        if tol.is_some() {
            cfg.pod.rank = None;
            cfg.pod.energy_tol = tol;
        }
        cfg.pod.include_dq = dq;
        cfg.control.regularization = weight;
        cfg.mpc.regularization = weight;
        prop_assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}

#[test]
fn without_loads_inputs_or_initial_state_the_room_stays_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.simulate.controls = ControlChoice::Zero;
    cfg.simulate.initial_scale = 0.0;
    cfg.simulate.loads = false;
    cmd_simulate(&cfg).unwrap();
    let traj = evolve::io::read_trajectory(dir.path(), "trajectory_zero").unwrap();
    assert_eq!(traj.values().amax(), 0.0);
    let (_, rows) = read_csv(&dir.path().join("averages.csv"));
    assert!(rows.iter().all(|r| r[1] == 0.0));
}

#[test]
fn written_trajectories_match_an_independent_solve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    cmd_simulate(&cfg).unwrap();
    let model = presets::guiding(8, presets::GUIDING_VELOCITY).unwrap();
    let grid = TimeGrid::new(presets::GUIDING_T, 31, Spacing::Uniform).unwrap();
    let inputs = cli::commands::reference_controls(Preset::Guiding, 2, &grid);
    for (name, u) in inputs {
        let expected = FullSolver::new(&model).forward(&grid, model.y0(), &u, 1.0).unwrap();
        let read = evolve::io::read_trajectory(dir.path(), &format!("trajectory_{name}")).unwrap();
        assert_eq!(read.values(), expected.values(), "{name}");
    }
}

#[test]
fn an_unheated_room_cools_and_heating_keeps_it_warmer() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_simulate(&config(dir.path())).unwrap();
    let (header, rows) = read_csv(&dir.path().join("averages.csv"));
    assert_eq!(header, ["time", "average_u1", "average_u2", "average_u3"]);
    let last = rows.last().unwrap();
    assert!(last[1] < rows[0][1], "unheated average {} → {}", rows[0][1], last[1]);
    assert!(last[2] > last[1]);
    assert_eq!(out.summary["final_average"]["u1"].as_f64().unwrap(), last[1]);
}

#[test]
fn cosine_examples_have_the_expected_decay() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.preset = Some(Preset::CosExamples);
    cfg.time_nodes = 50;
    cmd_pod(&cfg).unwrap();
    let relative = |name: &str| read_csv(&dir.path().join(format!("eigenvalues_{name}.csv"))).1.iter().map(|r| r[3]).collect::<Vec<_>>();
    assert_eq!(relative("cos_t_cos_x").len(), 1);
    let shifted = relative("cos_t_plus_x");
    assert_eq!(shifted.len(), 2);
    assert!((shifted[1] - 1.0).abs() < 1e-10);
    // Regression values for the 50 × 50 sampling of cos(t·x).
    let product = relative("cos_t_times_x");
    assert!(product.len() >= 15, "rank {}", product.len());
    assert!(product[9] > 0.9 && product[14] < 1e-2, "{product:?}");
}

#[test]
fn guiding_pod_reports_energy_and_modes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.preset = Some(Preset::Guiding);
    cfg.pod.rank = None;
    cfg.pod.energy_tol = Some(1e-6);
    let out = cmd_pod(&cfg).unwrap();
    let g = &out.summary["guiding"];
    let ell = g["selected_rank"].as_u64().unwrap() as usize;
    assert!(g["energy_ratio"].as_f64().unwrap() >= 1.0 - 1e-6);
    let (_, rows) = read_csv(&dir.path().join("eigenvalues_guiding.csv"));
    assert!(rows[ell - 1][2] >= 1.0 - 1e-6 && (ell == 1 || rows[ell - 2][2] < 1.0 - 1e-6));
    let modes = pod_core::io::read_matrix_csv(&dir.path().join("modes_guiding.csv")).unwrap();
    assert_eq!(modes.shape(), (64, ell));
}

#[test]
fn reduced_model_errors_fall_to_roundoff_at_full_rank() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.preset = Some(Preset::Heat1d);
    cfg.resolution = 30;
    cfg.pod.ranks = vec![1, 2, 4];
    let out = cmd_rom(&cfg).unwrap();
    let d = out.summary["numerical_rank"].as_u64().unwrap() as f64;
    let (header, rows) = read_csv(&dir.path().join("rom_errors.csv"));
    assert_eq!(header, ["ell", "max_error", "relative_error", "max_bound", "max_efficiency", "tail"]);
    let last = rows.last().unwrap();
    assert_eq!(last[0], d);
    assert!(last[2] < 1e-5, "relative error at full rank {:e}", last[2]);
    for r in &rows {
        assert!(r[3] >= r[1], "rank {}: bound {:e} < error {:e}", r[0], r[3], r[1]);
    }
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]));
}

#[test]
fn control_certificates_dominate_true_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.control.ranks = vec![2, 4, 8];
    cfg.control.ell_max = 12;
    cfg.control.eps_apo = 1e-2;
    let out = cmd_control(&cfg).unwrap();
    let (_, rows) = read_csv(&dir.path().join("certificates.csv"));
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!(r[4] <= r[3], "rank {}: error {:e} above certificate {:e}", r[0], r[4], r[3]);
    }
    assert_eq!(out.summary["certified"], true);
    let (header, _) = read_csv(&dir.path().join("control_pod.csv"));
    assert_eq!(header, ["time", "u0", "u1"]);
}

#[test]
fn pareto_points_are_evenly_spaced() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.resolution = 6;
    cfg.time_nodes = 21;
    cfg.pareto.h_par = 0.4;
    let out = cmd_pareto(&cfg).unwrap();
    assert!(out.summary["max_spacing"].as_f64().unwrap() <= 0.4 + 1e-9);
    assert!(out.summary["points"].as_u64().unwrap() >= 2);
}

#[test]
fn receding_horizon_writes_all_three_controllers() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.mpc.steps = 12;
    cfg.mpc.horizon = 4;
    cfg.mpc.ell = 4;
    let out = cmd_mpc(&cfg).unwrap();
    for name in ["full", "pod_fixed", "pod_update"] {
        let (_, rows) = read_csv(&dir.path().join(format!("mpc_{name}.csv")));
        assert_eq!(rows.len(), 13, "{name}");
    }
    assert!(out.summary["relative_error_pod_update"].as_f64().unwrap().is_finite());
}

#[test]
fn presets_without_dynamics_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.preset = Some(Preset::CosExamples);
    for command in [Command::Simulate, Command::Rom, Command::Control, Command::Pareto] {
        assert!(matches!(run(command, &cfg), Err(CliError::Config(_))));
    }
    cfg.preset = Some(Preset::Guiding);
    assert!(matches!(run(Command::Mpc, &cfg), Err(CliError::Config(_))));
}

#[test]
fn repeated_runs_write_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for command in [Command::Simulate, Command::Rom, Command::Control] {
        let mut cfg = config(a.path());
        cfg.control.ranks = vec![3];
        cfg.control.ell_max = 6;
        cfg.control.eps_apo = 1e-1;
        let first = run(command, &cfg).unwrap();
        cfg.out_dir = b.path().to_path_buf();
        run(command, &cfg).unwrap();
        for f in first.files {
            let name = f.file_name().unwrap();
            assert_eq!(fs::read(&f).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name:?}");
        }
    }
}

fn podctl(args: &[&str]) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_podctl")).args(args).output().unwrap()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    fs::write(&good, r#"{"resolution": 6, "time_nodes": 11}"#).unwrap();
    let out = dir.path().join("out");
    let ok = podctl(&["simulate", "--config", good.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(out.join("averages.csv").exists());

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"resolution": 0}"#).unwrap();
    assert_eq!(podctl(&["pod", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(podctl(&["pod", "--config", dir.path().join("missing.json").to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(podctl(&["frobnicate"]).status.code(), Some(2));

    let loose = dir.path().join("loose.json");
    fs::write(&loose, r#"{"resolution": 6, "time_nodes": 11, "control": {"max_iter": 1, "ranks": [2], "ell_max": 4}}"#).unwrap();
    let code = podctl(&["control", "--config", loose.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code();
    assert_eq!(code, Some(4));
}
