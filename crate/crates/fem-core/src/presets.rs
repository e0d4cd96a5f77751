//! Named model configurations.

use crate::mesh::{BoundaryLabel, Mesh, Rect};
use crate::model::{assemble_model, ControlShape, FeModel, InitialState, ModelData, TimeProfile, Velocity};
use crate::Result;

/// Final time of the room-temperature model.
pub const GUIDING_T: f64 = 5.0;
/// Default rotation magnitude of the room-temperature advection field. Chosen
/// so the symmetric part of the operator stays positive definite.
pub const GUIDING_VELOCITY: f64 = 1.0;

/// Room-temperature model on the unit square: diffusion 0.5, rotating air flow,
/// Robin exchange with a periodic outside temperature, a heater on the floor
/// and an inflow window on the upper left wall as controls.
pub fn guiding_data(velocity: f64) -> ModelData {
    ModelData {
        kappa: 0.5,
        velocity: Velocity::Rotation { magnitude: velocity, center: [0.5, 0.5] },
        velocity_profile: TimeProfile::Constant(1.0),
        robin: vec![
            (BoundaryLabel::Gamma1, 0.1),
            (BoundaryLabel::Gamma2, 0.1),
            (BoundaryLabel::Bottom, 0.0),
            (BoundaryLabel::Top, 0.0),
            (BoundaryLabel::Wall, 0.01),
        ],
        outside_temperature: Some(TimeProfile::Cosine { offset: 13.0, amplitude: 5.0, period: 5.0 }),
        sources: Vec::new(),
        controls: vec![
            ControlShape::Indicator {
                regions: vec![Rect::new([0.2, 0.0], [0.4, 0.1]), Rect::new([0.6, 0.0], [0.8, 0.1])],
                value: 0.1,
            },
            ControlShape::Boundary { labels: vec![BoundaryLabel::Gamma1], value: 0.1 },
        ],
        initial: InitialState::Constant(17.0),
        cubic: false,
        horizon: (0.0, GUIDING_T),
    }
}

pub fn guiding(resolution: usize, velocity: f64) -> Result<FeModel> {
    let mesh = Mesh::structured(2, resolution, Rect::UNIT)?;
    assemble_model(&mesh, &guiding_data(velocity))
}

/// Receding-horizon variant: boundary control only, growing air flow
/// `(0.1 + 0.1t)·v` and a different outside temperature. `t_max` bounds the
/// times the model will be evaluated at, including horizons past the end.
pub fn mpc_data(velocity: f64, t_max: f64) -> ModelData {
    let mut data = guiding_data(velocity);
    data.velocity_profile = TimeProfile::Affine { offset: 0.1, slope: 0.1 };
    data.outside_temperature = Some(TimeProfile::MpcOutside);
    data.controls = vec![ControlShape::Boundary { labels: vec![BoundaryLabel::Gamma1], value: 0.1 }];
    data.horizon = (0.0, t_max);
    data
}

pub fn mpc(resolution: usize, velocity: f64, t_max: f64) -> Result<FeModel> {
    let mesh = Mesh::structured(2, resolution, Rect::UNIT)?;
    assemble_model(&mesh, &mpc_data(velocity, t_max))
}

pub const SEMILINEAR_T: f64 = 1.0;

fn semilinear_initial(p: [f64; 2]) -> f64 {
    use std::f64::consts::PI;
    0.5 + (PI * p[0]).cos() * (PI * p[1]).cos()
}

/// Cubic reaction-diffusion `y_t − 0.1Δy + y³ = Σ uᵢχᵢ` with homogeneous
/// Neumann data and two square actuators.
pub fn semilinear_data() -> ModelData {
    ModelData {
        kappa: 0.1,
        velocity: Velocity::Zero,
        velocity_profile: TimeProfile::Constant(0.0),
        robin: Vec::new(),
        outside_temperature: None,
        sources: Vec::new(),
        controls: vec![
            ControlShape::Indicator { regions: vec![Rect::new([0.1, 0.1], [0.4, 0.4])], value: 1.0 },
            ControlShape::Indicator { regions: vec![Rect::new([0.6, 0.6], [0.9, 0.9])], value: 1.0 },
        ],
        initial: InitialState::Function(semilinear_initial),
        cubic: true,
        horizon: (0.0, SEMILINEAR_T),
    }
}

pub fn semilinear(resolution: usize) -> Result<FeModel> {
    let mesh = Mesh::structured(2, resolution, Rect::UNIT)?;
    assemble_model(&mesh, &semilinear_data())
}

fn semilinear_initial_1d(p: [f64; 2]) -> f64 {
    use std::f64::consts::PI;
    0.5 + (PI * p[0]).cos()
}

/// One-dimensional counterpart of [`semilinear`] on `[0, 1]`.
pub fn semilinear_1d(resolution: usize) -> Result<FeModel> {
    let mesh = Mesh::structured(1, resolution, Rect::interval(0.0, 1.0))?;
    let mut data = semilinear_data();
    data.controls = vec![
        ControlShape::Indicator { regions: vec![Rect::interval(0.1, 0.4)], value: 1.0 },
        ControlShape::Indicator { regions: vec![Rect::interval(0.6, 0.9)], value: 1.0 },
    ];
    data.initial = InitialState::Function(semilinear_initial_1d);
    assemble_model(&mesh, &data)
}

/// One-dimensional heat equation on `[0, 1]` with a Robin end, one distributed
/// actuator and one boundary actuator. Used for small gradient checks.
pub fn heat_1d(resolution: usize) -> Result<FeModel> {
    let mesh = Mesh::structured(1, resolution, Rect::interval(0.0, 1.0))?;
    let data = ModelData {
        kappa: 0.2,
        velocity: Velocity::Uniform([0.3, 0.0]),
        velocity_profile: TimeProfile::Constant(1.0),
        robin: vec![(BoundaryLabel::Right, 0.5)],
        outside_temperature: Some(TimeProfile::Cosine { offset: 1.0, amplitude: 0.5, period: 1.0 }),
        sources: Vec::new(),
        controls: vec![
            ControlShape::Indicator { regions: vec![Rect::interval(0.2, 0.5)], value: 1.0 },
            ControlShape::Boundary { labels: vec![BoundaryLabel::Right], value: 1.0 },
        ],
        initial: InitialState::Function(|p| (std::f64::consts::PI * p[0]).sin()),
        cubic: false,
        horizon: (0.0, 1.0),
    };
    assemble_model(&mesh, &data)
}
