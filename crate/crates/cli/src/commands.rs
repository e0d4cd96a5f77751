use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use evolve::ocp::u_norm;
use evolve::{FullSolver, OcpSpec, Target, Trajectory};
use fem_core::mesh::{Mesh, Rect};
use fem_core::model::{assemble_model, ControlShape, ModelData};
use fem_core::{presets, FeModel, Spacing, TimeGrid};
use nalgebra::{DMatrix, DVector};
use optctl::{
    aposteriori_control, certified_pod_optimize, mpc_run, pareto_front, projected_gradient_solve, write_metadata,
    write_solution_csv, CertifiedOptions, ControllerMode, FullDynamics, MixedConstraintSpec, MpcOptions, MpcRun,
    ParetoOptions, ParetoPod, PdassOptions, PgOptions, StepRule, Threshold,
};
use pod_core::{compute_pod, PodBasis, ProjectionMode, Rank, SnapshotSet, Strategy, WeightTag, WeightedSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ControlChoice, Preset, RunConfig, StepName, StrategyName, Weight};
use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Pod,
    Rom,
    Control,
    Mpc,
    Pareto,
}

/// Files written by a command and a JSON summary of its results.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    match command {
        Command::Simulate => cmd_simulate(cfg),
        Command::Pod => cmd_pod(cfg),
        Command::Rom => cmd_rom(cfg),
        Command::Control => cmd_control(cfg),
        Command::Mpc => cmd_mpc(cfg),
        Command::Pareto => cmd_pareto(cfg),
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(self.path(name), text)?;
        Ok(())
    }

    fn finish(self, summary: Value) -> Outcome {
        Outcome { files: self.files, summary }
    }
}

fn preset_or(cfg: &RunConfig, default: Preset, allowed: &[Preset], command: &str) -> Result<Preset> {
    let p = cfg.preset.unwrap_or(default);
    if allowed.contains(&p) {
        Ok(p)
    } else {
        Err(CliError::Config(format!("preset {} is not available for {command}", p.name())))
    }
}

const MODEL_PRESETS: [Preset; 4] = [Preset::Guiding, Preset::Semilinear, Preset::Mpc, Preset::Heat1d];

/// Model and time grid of a model preset.
pub fn build_model(preset: Preset, cfg: &RunConfig) -> Result<(FeModel, TimeGrid)> {
    let (model, t_final) = match preset {
        Preset::Guiding => (presets::guiding(cfg.resolution, presets::GUIDING_VELOCITY)?, presets::GUIDING_T),
        Preset::Semilinear => (presets::semilinear(cfg.resolution)?, presets::SEMILINEAR_T),
        Preset::Mpc => (presets::mpc(cfg.resolution, presets::GUIDING_VELOCITY, presets::GUIDING_T + 1.0)?, presets::GUIDING_T),
        Preset::Heat1d => (presets::heat_1d(cfg.resolution)?, 1.0),
        Preset::CosExamples => return Err(CliError::Config("cos-examples has no dynamical model".into())),
    };
    Ok((model, TimeGrid::new(t_final, cfg.time_nodes, Spacing::Uniform)?))
}

/// Off, constant and periodic inputs; the guiding preset uses its heater and
/// wall amplitudes.
pub fn reference_controls(preset: Preset, n_controls: usize, grid: &TimeGrid) -> Vec<(String, DMatrix<f64>)> {
    let amp: Vec<f64> = match preset {
        Preset::Guiding => vec![1.8, 4.5],
        _ => vec![1.0; n_controls],
    };
    let t_final = grid.t_final();
    let periodic = DMatrix::from_fn(n_controls, grid.len(), |i, j| (1.0 - (2.0 * PI * grid.t(j) / t_final).cos()) * amp[i]);
    let constant = DMatrix::from_fn(n_controls, grid.len(), |i, _| amp[i]);
    vec![
        ("u1".to_string(), DMatrix::zeros(n_controls, grid.len())),
        ("u2".to_string(), constant),
        ("u3".to_string(), periodic),
    ]
}

fn h_weighted(model: &FeModel, weight: Weight) -> Result<WeightedSpace> {
    Ok(match weight {
        Weight::H => WeightedSpace::new(model.mass().clone(), WeightTag::H)?,
        Weight::V => WeightedSpace::new(model.weight_v().clone(), WeightTag::V)?,
    })
}

fn strategy(s: StrategyName) -> Strategy {
    match s {
        StrategyName::Auto => Strategy::Auto,
        StrategyName::Svd => Strategy::Svd,
        StrategyName::GramM => Strategy::GramM,
        StrategyName::GramSnapshots => Strategy::GramSnapshots,
    }
}

fn selected_rank(cfg: &RunConfig) -> Rank {
    match (cfg.pod.rank, cfg.pod.energy_tol) {
        (_, Some(e)) => Rank::Tolerance(e),
        (Some(r), None) => Rank::Fixed(r),
        (None, None) => unreachable!("validated configuration"),
    }
}

fn forward(model: &FeModel, grid: &TimeGrid, u: &DMatrix<f64>) -> Result<Trajectory> {
    Ok(FullSolver::new(model).forward(grid, model.y0(), u, 1.0)?)
}

fn max_h_norm(model: &FeModel, a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| model.mass().quad_form(&c.into_owned(), &c.into_owned()).max(0.0).sqrt()).fold(0.0, f64::max)
}

/// `(i, λ_i, E(i), λ_i/λ₁)` rows over every retained eigenvalue.
fn eigen_rows(basis: &PodBasis) -> Vec<Vec<String>> {
    let l = basis.eigenvalues();
    (0..l.len())
        .map(|i| vec![(i + 1).to_string(), fmt(l[i]), fmt(basis.energy_ratio(i + 1)), fmt(l[i] / l[0])])
        .collect()
}

const EIGEN_HEADER: [&str; 4] = ["i", "lambda", "energy_ratio", "relative"];

/// Writes one trajectory per input and the spatial averages of all of them.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let preset = preset_or(cfg, Preset::Guiding, &MODEL_PRESETS, "simulate")?;
    let (base, grid) = build_model(preset, cfg)?;
    let mut model = base.clone().with_initial(base.y0() * cfg.simulate.initial_scale);
    if !cfg.simulate.loads {
        model = model.with_loads(Vec::new());
    }
    let controls = match cfg.simulate.controls {
        ControlChoice::Reference => reference_controls(preset, model.n_controls(), &grid),
        ControlChoice::Zero => vec![("zero".to_string(), DMatrix::zeros(model.n_controls(), grid.len()))],
    };
    let mut out = Writer::new(&cfg.out_dir)?;
    let lumped = model.lumped_mass();
    let area = lumped.sum();
    let mut averages = Vec::new();
    for (name, u) in &controls {
        let traj = forward(&model, &grid, u)?;
        let stem = format!("trajectory_{name}");
        evolve::io::write_trajectory(&cfg.out_dir, &stem, &traj)?;
        out.files.push(cfg.out_dir.join(format!("{stem}.csv")));
        out.files.push(cfg.out_dir.join(format!("{stem}.json")));
        averages.push(traj.values().column_iter().map(|c| lumped.dot(&c) / area).collect::<Vec<f64>>());
    }
    let mut header = vec!["time".to_string()];
    header.extend(controls.iter().map(|(n, _)| format!("average_{n}")));
    let rows: Vec<Vec<String>> = (0..grid.len())
        .map(|j| std::iter::once(fmt(grid.t(j))).chain(averages.iter().map(|a| fmt(a[j]))).collect())
        .collect();
    out.csv("averages.csv", &header.iter().map(String::as_str).collect::<Vec<_>>(), &rows)?;
    let summary = json!({
        "preset": preset.name(),
        "dim": model.dim(),
        "time_nodes": grid.len(),
        "final_average": controls.iter().zip(&averages).map(|((n, _), a)| (n.clone(), json!(a[a.len() - 1]))).collect::<serde_json::Map<_, _>>(),
    });
    out.json("simulate.json", &summary)?;
    Ok(out.finish(summary))
}

/// Snapshot set of `f(t, x)` on `[0, 2π]` in time and space with `n` nodes each.
pub fn cos_snapshots(f: Field, n: usize) -> Result<SnapshotSet> {
    let mesh = Mesh::structured(1, n, Rect::interval(0.0, 2.0 * PI))?;
    let data = ModelData {
        controls: vec![ControlShape::Indicator { regions: vec![Rect::interval(0.0, 7.0)], value: 1.0 }],
        ..Default::default()
    };
    let model = assemble_model(&mesh, &data)?;
    let xs: Vec<f64> = mesh.vertices().iter().map(|p| p[0]).collect();
    let grid = TimeGrid::new(2.0 * PI, n, Spacing::Uniform)?;
    let y = DMatrix::from_fn(xs.len(), n, |i, j| f(grid.t(j), xs[i]));
    let space = WeightedSpace::new(model.mass().clone(), WeightTag::H)?;
    Ok(SnapshotSet::from_trajectories(space, vec![y], &grid)?)
}

pub type Field = fn(f64, f64) -> f64;

/// The analytic examples: a separable product, a travelling wave and a
/// non-separable product.
pub const COS_EXAMPLES: [(&str, Field); 3] = [
    ("cos_t_cos_x", |t, x| t.cos() * x.cos()),
    ("cos_t_plus_x", |t, x| (t + x).cos()),
    ("cos_t_times_x", |t, x| (t * x).cos()),
];

struct Snapshots {
    model: FeModel,
    grid: TimeGrid,
    u: DMatrix<f64>,
    y: DMatrix<f64>,
    set: SnapshotSet,
}

/// Snapshots of the periodic reference input for a model preset.
fn model_snapshots(preset: Preset, cfg: &RunConfig) -> Result<Snapshots> {
    let (model, grid) = build_model(preset, cfg)?;
    let (_, u) = reference_controls(preset, model.n_controls(), &grid).pop().expect("three reference inputs");
    let y = forward(&model, &grid, &u)?.into_values();
    let mut set = SnapshotSet::from_trajectories(h_weighted(&model, cfg.pod.weight)?, vec![y.clone()], &grid)?;
    if cfg.pod.include_dq {
        set = set.with_difference_quotients(&grid)?;
    }
    Ok(Snapshots { model, grid, u, y, set })
}

/// Eigenvalue decay and energy ratios for the analytic examples and model
/// snapshots.
pub fn cmd_pod(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Writer::new(&cfg.out_dir)?;
    let presets: Vec<Preset> = match cfg.preset {
        None => vec![Preset::CosExamples, Preset::Guiding],
        Some(p) => vec![p],
    };
    let mut summary = serde_json::Map::new();
    for preset in presets {
        if preset == Preset::CosExamples {
            for (name, f) in COS_EXAMPLES {
                let set = cos_snapshots(f, cfg.time_nodes)?;
                let basis = compute_pod(&set, Rank::Fixed(set.num_columns()), strategy(cfg.pod.strategy))?;
                out.csv(&format!("eigenvalues_{name}.csv"), &EIGEN_HEADER, &eigen_rows(&basis))?;
                summary.insert(name.to_string(), json!({ "rank": basis.rank(), "eigenvalues": basis.eigenvalues() }));
            }
            continue;
        }
        let set = model_snapshots(preset, cfg)?.set;
        let all = compute_pod(&set, Rank::Fixed(set.num_columns()), strategy(cfg.pod.strategy))?;
        let chosen = compute_pod(&set, selected_rank(cfg), strategy(cfg.pod.strategy))?;
        let name = preset.name().replace('-', "_");
        out.csv(&format!("eigenvalues_{name}.csv"), &EIGEN_HEADER, &eigen_rows(&all))?;
        pod_core::io::write_matrix_csv(&out.path(&format!("modes_{name}.csv")), &chosen.basis())?;
        summary.insert(
            name,
            json!({
                "numerical_rank": all.rank(),
                "selected_rank": chosen.ell(),
                "energy_ratio": chosen.energy_ratio(chosen.ell()),
                "truncated": chosen.truncated(),
            }),
        );
    }
    let summary = Value::Object(summary);
    out.json("pod.json", &summary)?;
    Ok(out.finish(summary))
}

/// Reduced-model error, a-posteriori bound and tail energy against the rank,
/// evaluated at the snapshot input.
pub fn cmd_rom(cfg: &RunConfig) -> Result<Outcome> {
    let preset = preset_or(cfg, Preset::Guiding, &MODEL_PRESETS, "rom")?;
    let Snapshots { model, grid, u, y, set } = model_snapshots(preset, cfg)?;
    let basis = compute_pod(&set, selected_rank(cfg), strategy(cfg.pod.strategy))?;
    let d = compute_pod(&set, Rank::Fixed(set.num_columns()), strategy(cfg.pod.strategy))?.rank();
    let mut ranks: Vec<usize> = cfg.pod.ranks.iter().map(|&r| r.min(basis.ell())).collect();
    if basis.ell() == d {
        ranks.push(d);
    }
    ranks.sort_unstable();
    ranks.dedup();
    let scale = max_h_norm(&model, &y);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &ell in &ranks {
        let rom = rom::galerkin_project(&model, &basis.with_rank(ell), ProjectionMode::Orthogonal)?;
        let lifted = rom.lift_all(&rom.solve(&grid, rom.y0(), &u)?);
        let report = rom::aposteriori_state(&model, &grid, &lifted, &u, model.y0())?.with_reference(&model, &grid, &y, &lifted);
        let err = report.true_error.as_ref().map_or(f64::NAN, |e| e.iter().copied().fold(0.0, f64::max));
        let bound = report.bound.iter().copied().fold(0.0, f64::max);
        if report.rigorous && report.dominates(1e-6, 0.0) != Some(true) {
            failures.push(format!("bound below the true error at rank {ell}"));
        }
        rows.push(vec![
            ell.to_string(),
            fmt(err),
            fmt(err / scale),
            fmt(bound),
            fmt(report.max_efficiency(1e-12 * scale).unwrap_or(f64::NAN)),
            fmt(basis.tail(ell)),
        ]);
    }
    let mut out = Writer::new(&cfg.out_dir)?;
    out.csv("rom_errors.csv", &["ell", "max_error", "relative_error", "max_bound", "max_efficiency", "tail"], &rows)?;
    let summary = json!({ "preset": preset.name(), "numerical_rank": d, "basis_rank": basis.ell(), "ranks": ranks, "failures": failures });
    out.json("rom.json", &summary)?;
    if !failures.is_empty() {
        return Err(CliError::Rigor(failures.join("; ")));
    }
    Ok(out.finish(summary))
}

fn control_problem(cfg: &RunConfig, model: &FeModel, grid: &TimeGrid) -> OcpSpec {
    let c = &cfg.control;
    let m = model.dim();
    let nc = model.n_controls();
    OcpSpec::new(c.tracking_weight, c.terminal_weight, c.regularization, Target::Constant(c.target), DVector::from_element(m, c.target), nc, grid.len())
        .with_box(&vec![c.lower; nc], &vec![c.upper; nc])
}

fn pg_options(cfg: &RunConfig, tol: f64) -> PgOptions {
    let step = match cfg.control.step {
        StepName::Armijo => StepRule::Armijo,
        StepName::BarzilaiBorwein => StepRule::BarzilaiBorwein,
    };
    PgOptions::default().with_tol(tol).with_step(step).with_max_iter(cfg.control.max_iter)
}

/// Seeded admissible input that excites the snapshot space.
pub fn seeded_control(seed: u64, nc: usize, n: usize, lower: f64, upper: f64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hi = if upper.is_finite() { lower + (upper - lower) / 3.0 } else { lower + 10.0 };
    DMatrix::from_fn(nc, n, |_, _| rng.gen_range(lower..=hi))
}

/// Full-order optimum, certified surrogate optima at fixed ranks and the
/// adaptive certified loop.
pub fn cmd_control(cfg: &RunConfig) -> Result<Outcome> {
    let preset = preset_or(cfg, Preset::Guiding, &MODEL_PRESETS, "control")?;
    let (model, grid) = build_model(preset, cfg)?;
    let ocp = control_problem(cfg, &model, &grid);
    let nc = model.n_controls();
    let full = FullDynamics::new(&model);
    let reference_tol = cfg.control.tol.min(1e-10);
    let exact = projected_gradient_solve(&full, &grid, &ocp, &DMatrix::zeros(nc, grid.len()), &pg_options(cfg, reference_tol))?;
    let exact_bound = aposteriori_control(&full, &grid, &ocp, &exact.u)?.bound;
    let u_init = seeded_control(cfg.seed, nc, grid.len(), cfg.control.lower, cfg.control.upper);
    let pg = pg_options(cfg, cfg.control.tol);

    let mut out = Writer::new(&cfg.out_dir)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut unconverged = Vec::new();
    if !exact.converged {
        unconverged.push(format!("full-order solve stopped at stationarity {:.3e}", exact.stationarity));
    }
    for &ell in &cfg.control.ranks {
        let opts = CertifiedOptions { ell0: ell, ell_max: ell, ell_step: 1, eps: 0.0, pg };
        let run = certified_pod_optimize(&model, &grid, &ocp, &u_init, &opts)?;
        let sol = &run.solution;
        let cert = sol.certificate.as_ref().expect("certified runs carry a certificate");
        let err = u_norm(&grid, &(&sol.u - &exact.u));
        if err > cert.bound + exact_bound {
            failures.push(format!("rank {ell}: error {err:.3e} above certificate {:.3e}", cert.bound));
        }
        if !sol.converged {
            unconverged.push(format!("surrogate solve at rank {ell}"));
        }
        rows.push(vec![
            ell.to_string(),
            sol.rank.unwrap_or(0).to_string(),
            fmt(cert.zeta_norm),
            fmt(cert.bound),
            fmt(err),
            sol.iterations.to_string(),
        ]);
    }
    out.csv("certificates.csv", &["ell", "rank", "zeta_norm", "certificate", "true_error", "iterations"], &rows)?;

    let ell0 = cfg.control.ranks.iter().copied().min().unwrap_or(4).min(cfg.control.ell_max);
    let adaptive = CertifiedOptions { ell0, ell_max: cfg.control.ell_max, ell_step: 2, eps: cfg.control.eps_apo, pg };
    let run = certified_pod_optimize(&model, &grid, &ocp, &u_init, &adaptive)?;
    let history: Vec<Vec<String>> = run
        .history
        .iter()
        .map(|r| vec![r.ell.to_string(), fmt(r.zeta_norm), fmt(r.bound), r.iterations.to_string()])
        .collect();
    out.csv("certified_history.csv", &["ell", "zeta_norm", "bound", "iterations"], &history)?;
    write_solution_csv(&out.path("control_full.csv"), &grid, &exact)?;
    write_metadata(&out.path("control_full.json"), &exact, json!({ "preset": preset.name() }))?;
    write_solution_csv(&out.path("control_pod.csv"), &grid, &run.solution)?;
    let adaptive_err = u_norm(&grid, &(&run.solution.u - &exact.u));
    write_metadata(
        &out.path("control_pod.json"),
        &run.solution,
        json!({ "certified": run.certified, "basis_rank": run.basis_rank, "true_error": adaptive_err }),
    )?;
    let summary = json!({
        "preset": preset.name(),
        "full_cost": exact.cost.total(),
        "full_iterations": exact.iterations,
        "certified": run.certified,
        "final_rank": run.solution.rank,
        "final_bound": run.history.last().map(|r| r.bound),
        "failures": failures,
        "unconverged": unconverged,
    });
    out.json("control.json", &summary)?;
    if !failures.is_empty() {
        return Err(CliError::Rigor(failures.join("; ")));
    }
    if !unconverged.is_empty() {
        return Err(CliError::NonConvergence(unconverged.join("; ")));
    }
    Ok(out.finish(summary))
}

/// Lower comfort bound of the receding-horizon problem.
pub fn mpc_lower_bound(t: f64) -> f64 {
    (16.0 + t / 4.0).min(18.0)
}

pub const MPC_UPPER_STATE: f64 = 32.0;

/// Receding-horizon runs with the full controller, a fixed surrogate and an
/// updated surrogate.
pub fn cmd_mpc(cfg: &RunConfig) -> Result<Outcome> {
    preset_or(cfg, Preset::Mpc, &[Preset::Mpc], "mpc")?;
    let mc = &cfg.mpc;
    let n = mc.steps + mc.horizon + 1;
    let t_final = mc.dt * (n - 1) as f64;
    let model = presets::mpc(cfg.resolution, presets::GUIDING_VELOCITY, t_final + 1.0)?;
    let m = model.dim();
    let grid = TimeGrid::new(t_final, n, Spacing::Uniform)?;
    let ocp = OcpSpec::new(0.0, 0.0, mc.regularization, Target::Constant(0.0), DVector::zeros(m), 1, n).with_box(&[0.0], &[mc.upper]);
    let mixed = MixedConstraintSpec::from_fn(m, &grid, |t, _| mpc_lower_bound(t), |_, _| MPC_UPPER_STATE, mc.epsilon, mc.sigma_w)?;
    let modes = [
        ("full", ControllerMode::Full),
        ("pod_fixed", ControllerMode::PodFixed),
        ("pod_update", ControllerMode::PodUpdate(Threshold::Relative(mc.tau))),
    ];
    let mut out = Writer::new(&cfg.out_dir)?;
    let mut runs: Vec<MpcRun> = Vec::new();
    let lumped = model.lumped_mass();
    let area = lumped.sum();
    for (name, mode) in modes {
        let opts = MpcOptions { horizon: mc.horizon, steps: mc.steps, mode, ell: mc.ell, pg: PgOptions::default(), pdass: PdassOptions::default() };
        let run = mpc_run(&model, &grid, &ocp, Some(&mixed), &opts)?;
        let rows: Vec<Vec<String>> = (0..run.grid.len())
            .map(|k| {
                let y = run.state.column(k);
                vec![fmt(run.grid.t(k)), fmt(run.control[(0, k)]), fmt(lumped.dot(&y) / area), fmt(y.min()), fmt(y.max())]
            })
            .collect();
        out.csv(&format!("mpc_{name}.csv"), &["time", "control", "average", "min", "max"], &rows)?;
        runs.push(run);
    }
    let records: Vec<Vec<String>> = runs[2]
        .records
        .iter()
        .map(|r| vec![r.step.to_string(), fmt(r.time), fmt(r.estimate), fmt(r.threshold), r.rebuilt.to_string()])
        .collect();
    out.csv("mpc_updates.csv", &["step", "time", "estimate", "threshold", "rebuilt"], &records)?;
    let err_fixed = runs[1].relative_control_error(&runs[0]);
    let err_update = runs[2].relative_control_error(&runs[0]);
    let violation = mixed.window(0, mc.steps + 1).violation(&runs[0].state);
    let mut failures = Vec::new();
    if violation > runs[0].max_relaxation + 1e-8 {
        failures.push(format!("closed-loop violation {violation:.3e} exceeds the relaxation {:.3e}", runs[0].max_relaxation));
    }
    let unconverged: Vec<&str> = modes.iter().zip(&runs).filter(|(_, r)| !r.converged).map(|((n, _), _)| *n).collect();
    let summary = json!({
        "relative_error_pod_fixed": err_fixed,
        "relative_error_pod_update": err_update,
        "updates": runs[2].updates,
        "max_relaxation": runs[0].max_relaxation,
        "violation": violation,
        "open_loop_iterations": modes.iter().zip(&runs).map(|((n, _), r)| (n.to_string(), json!(r.open_loop_iterations))).collect::<serde_json::Map<_, _>>(),
        "failures": failures,
        "unconverged": unconverged,
    });
    out.json("mpc.json", &summary)?;
    if !failures.is_empty() {
        return Err(CliError::Rigor(failures.join("; ")));
    }
    if !unconverged.is_empty() {
        return Err(CliError::NonConvergence(format!("open-loop solves failed in {}", unconverged.join(", "))));
    }
    Ok(out.finish(summary))
}

/// Pareto front of tracking against control cost by the reference point method.
pub fn cmd_pareto(cfg: &RunConfig) -> Result<Outcome> {
    let preset = preset_or(cfg, Preset::Guiding, &MODEL_PRESETS, "pareto")?;
    let (model, grid) = build_model(preset, cfg)?;
    let ocp = control_problem(cfg, &model, &grid);
    let p = &cfg.pareto;
    let opts = ParetoOptions {
        h_par: p.h_par,
        h_perp: p.h_perp,
        alpha_ws: p.alpha_ws,
        max_points: p.max_points,
        pod: p.pod.then_some(ParetoPod { ell0: p.ell0, ell_incr: p.ell_incr, ell_max: p.ell_max, eps_max: p.eps_max }),
        ..ParetoOptions::default()
    };
    let front = pareto_front(&model, &grid, &ocp, &opts)?;
    let mut out = Writer::new(&cfg.out_dir)?;
    front.write_csv(&out.path("pareto_front.csv"))?;
    let mut failures = Vec::new();
    if let Some((i, s)) = front.spacings().iter().enumerate().find(|(_, s)| **s > p.h_par + 1e-9) {
        failures.push(format!("spacing {s:.6e} after point {i} exceeds {}", p.h_par));
    }
    if !front.is_nondominated(0.0) {
        failures.push("front contains dominated images".into());
    }
    if let Some(e) = front.points.iter().filter_map(|pt| pt.estimate).find(|e| *e > p.eps_max) {
        failures.push(format!("certified error {e:.3e} exceeds {}", p.eps_max));
    }
    let summary = json!({
        "preset": preset.name(),
        "points": front.points.len(),
        "max_spacing": front.spacings().iter().copied().fold(0.0, f64::max),
        "log": front.log,
        "failures": failures,
    });
    out.json("pareto.json", &summary)?;
    if !failures.is_empty() {
        return Err(CliError::Rigor(failures.join("; ")));
    }
    Ok(out.finish(summary))
}
