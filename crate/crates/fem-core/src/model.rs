//! P1 assembly of linear advection-diffusion-Robin models with control inputs.
//!
//! The system operator is `A(t) = κK + s(t)C + Q`, where `K` is the Laplacian
//! stiffness, `C` the advection matrix for a fixed spatial velocity field scaled
//! by the scalar profile `s(t)`, and `Q` the Robin boundary mass. All matrices
//! share the P1 sparsity pattern, so combinations never reallocate structure.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::mesh::{BoundaryLabel, Mesh, Rect};
use crate::sparse::{BandedCholesky, CsrMatrix};
use crate::{Error, Result};

/// Scalar function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeProfile {
    Constant(f64),
    /// `offset + amplitude·cos(2πt/period)`.
    Cosine { offset: f64, amplitude: f64, period: f64 },
    /// `offset + slope·t`.
    Affine { offset: f64, slope: f64 },
    /// `15 + (1/2 + cos πt)(1/2 + sin(πt)/2)`, the outside temperature of the
    /// receding-horizon example.
    MpcOutside,
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        use std::f64::consts::PI;
        match *self {
            TimeProfile::Constant(c) => c,
            TimeProfile::Cosine { offset, amplitude, period } => offset + amplitude * (2.0 * PI * t / period).cos(),
            TimeProfile::Affine { offset, slope } => offset + slope * t,
            TimeProfile::MpcOutside => 15.0 + (0.5 + (PI * t).cos()) * (0.5 + (PI * t).sin() / 2.0),
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            TimeProfile::Constant(_) => true,
            TimeProfile::Cosine { amplitude, .. } => amplitude == 0.0,
            TimeProfile::Affine { slope, .. } => slope == 0.0,
            TimeProfile::MpcOutside => false,
        }
    }

    /// Enclosing range of values on `[t0, t1]`. Exact for affine profiles,
    /// conservative for the others.
    pub fn range(&self, t0: f64, t1: f64) -> (f64, f64) {
        match *self {
            TimeProfile::Constant(c) => (c, c),
            TimeProfile::Cosine { offset, amplitude, .. } => (offset - amplitude.abs(), offset + amplitude.abs()),
            TimeProfile::Affine { .. } => {
                let (a, b) = (self.eval(t0), self.eval(t1));
                (a.min(b), a.max(b))
            }
            TimeProfile::MpcOutside => (14.0, 17.25),
        }
    }
}

/// Spatial part of the advection field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Velocity {
    Zero,
    /// Rigid rotation `magnitude·(x₂ − c₂, c₁ − x₁)` about `center`.
    Rotation { magnitude: f64, center: [f64; 2] },
    Uniform([f64; 2]),
}

impl Velocity {
    pub fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        match *self {
            Velocity::Zero => [0.0, 0.0],
            Velocity::Rotation { magnitude, center } => [magnitude * (p[1] - center[1]), magnitude * (center[0] - p[0])],
            Velocity::Uniform(v) => v,
        }
    }
}

/// Spatial shape function of a control input or source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlShape {
    /// `value` on the union of `regions`, zero elsewhere.
    Indicator { regions: Vec<Rect>, value: f64 },
    /// `value` on the boundary segments carrying one of `labels`.
    Boundary { labels: Vec<BoundaryLabel>, value: f64 },
}

#[derive(Debug, Clone)]
pub enum InitialState {
    Constant(f64),
    Function(fn([f64; 2]) -> f64),
    Nodal(DVector<f64>),
}

/// `profile(t) · spatial` contribution to the load vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadTerm {
    pub profile: TimeProfile,
    pub spatial: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coercivity {
    /// `a(t; φ, φ) ≥ γ₁‖φ‖²_V − γ₂‖φ‖²_H` for all discrete φ and t in range.
    pub gamma1: f64,
    pub gamma2: f64,
    /// Embedding constant `‖φ‖_H ≤ c_V‖φ‖_V`.
    pub c_v: f64,
}

/// Problem data consumed by [`assemble_model`].
#[derive(Debug, Clone)]
pub struct ModelData {
    pub kappa: f64,
    pub velocity: Velocity,
    pub velocity_profile: TimeProfile,
    /// Robin coefficient per boundary label; unlisted labels get zero.
    pub robin: Vec<(BoundaryLabel, f64)>,
    /// Outside temperature feeding the Robin load `∫_Γ q·y_out·φ`.
    pub outside_temperature: Option<TimeProfile>,
    pub sources: Vec<(ControlShape, TimeProfile)>,
    pub controls: Vec<ControlShape>,
    pub initial: InitialState,
    pub cubic: bool,
    /// Time span used to bound the advection profile when estimating coercivity.
    pub horizon: (f64, f64),
}

impl Default for ModelData {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            velocity: Velocity::Zero,
            velocity_profile: TimeProfile::Constant(1.0),
            robin: Vec::new(),
            outside_temperature: None,
            sources: Vec::new(),
            controls: Vec::new(),
            initial: InitialState::Constant(0.0),
            cubic: false,
            horizon: (0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeModel {
    mesh: Option<Mesh>,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    kappa: f64,
    advection: CsrMatrix,
    advection_profile: TimeProfile,
    robin: CsrMatrix,
    // κK + Q, cached.
    steady: CsrMatrix,
    control: DMatrix<f64>,
    loads: Vec<LoadTerm>,
    y0: DVector<f64>,
    weight_v: CsrMatrix,
    coercivity: Option<Coercivity>,
    cubic: bool,
}

impl FeModel {
    /// Model with constant operator `a`, no mesh, and `W_V = mass + stiffness`.
    /// Coercivity is left unset.
    pub fn from_matrices(mass: CsrMatrix, stiffness: CsrMatrix, control: DMatrix<f64>, y0: DVector<f64>) -> Result<Self> {
        let m = mass.nrows();
        if mass.ncols() != m || stiffness.nrows() != m || stiffness.ncols() != m || control.nrows() != m || y0.len() != m {
            return Err(Error::InvalidArgument("inconsistent model dimensions".into()));
        }
        let weight_v = mass.add_scaled(1.0, &stiffness.symmetric_part(), 1.0);
        let zero = CsrMatrix::zeros(m, m);
        let model = Self {
            mesh: None,
            steady: stiffness.clone(),
            mass,
            stiffness,
            kappa: 1.0,
            advection: zero.clone(),
            advection_profile: TimeProfile::Constant(0.0),
            robin: zero,
            control,
            loads: Vec::new(),
            y0,
            weight_v,
            coercivity: None,
            cubic: false,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_weight_v(mut self, w: CsrMatrix) -> Result<Self> {
        if w.nrows() != self.dim() {
            return Err(Error::InvalidArgument("V-weight has wrong size".into()));
        }
        self.weight_v = w;
        self.validate()?;
        Ok(self)
    }

    pub fn with_loads(mut self, loads: Vec<LoadTerm>) -> Self {
        self.loads = loads;
        self
    }

    pub fn with_initial(mut self, y0: DVector<f64>) -> Self {
        self.y0 = y0;
        self
    }

    pub fn with_coercivity(mut self, c: Coercivity) -> Self {
        self.coercivity = Some(c);
        self
    }

    pub fn with_cubic(mut self, cubic: bool) -> Self {
        self.cubic = cubic;
        self
    }

    /// Replaces the advection matrix and its time profile.
    pub fn with_advection(mut self, c: CsrMatrix, profile: TimeProfile) -> Self {
        self.advection = c;
        self.advection_profile = profile;
        self
    }

    pub fn with_control(mut self, b: DMatrix<f64>) -> Self {
        self.control = b;
        self
    }

    fn validate(&self) -> Result<()> {
        BandedCholesky::factor(&self.mass).map_err(|_| Error::Consistency("mass matrix is not positive definite".into()))?;
        BandedCholesky::factor(&self.weight_v)
            .map_err(|_| Error::Consistency("V-weight matrix is not positive definite".into()))?;
        for (c, col) in self.control.column_iter().enumerate() {
            if col.amax() == 0.0 {
                return Err(Error::Consistency(format!("control column {c} vanishes")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    pub fn n_controls(&self) -> usize {
        self.control.ncols()
    }

    pub fn mesh(&self) -> Option<&Mesh> {
        self.mesh.as_ref()
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// Diagonal of the row-sum lumped mass matrix.
    pub fn lumped_mass(&self) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| self.mass.row(i).map(|(_, v)| v).sum())
    }

    /// Laplacian stiffness without the diffusion coefficient.
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn advection(&self) -> &CsrMatrix {
        &self.advection
    }

    pub fn advection_profile(&self) -> &TimeProfile {
        &self.advection_profile
    }

    pub fn robin(&self) -> &CsrMatrix {
        &self.robin
    }

    pub fn control(&self) -> &DMatrix<f64> {
        &self.control
    }

    pub fn loads(&self) -> &[LoadTerm] {
        &self.loads
    }

    pub fn y0(&self) -> &DVector<f64> {
        &self.y0
    }

    pub fn weight_v(&self) -> &CsrMatrix {
        &self.weight_v
    }

    pub fn coercivity(&self) -> Option<Coercivity> {
        self.coercivity
    }

    pub fn is_cubic(&self) -> bool {
        self.cubic
    }

    pub fn has_advection(&self) -> bool {
        self.advection.max_abs() > 0.0
    }

    /// Whether `A(t)` actually varies with `t`.
    pub fn is_time_dependent(&self) -> bool {
        self.has_advection() && !self.advection_profile.is_constant()
    }

    pub fn advection_scale(&self, t: f64) -> f64 {
        if self.has_advection() {
            self.advection_profile.eval(t)
        } else {
            0.0
        }
    }

    /// `A(t) = κK + s(t)C + Q`.
    pub fn system_matrix(&self, t: f64) -> CsrMatrix {
        self.system_matrix_scaled(self.advection_scale(t))
    }

    /// `κK + sC + Q` for an explicit advection scale `s`.
    pub fn system_matrix_scaled(&self, s: f64) -> CsrMatrix {
        if s == 0.0 {
            self.steady.clone()
        } else {
            self.steady.add_scaled(1.0, &self.advection, s)
        }
    }

    pub fn load(&self, t: f64) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        for term in &self.loads {
            g.axpy(term.profile.eval(t), &term.spatial, 1.0);
        }
        g
    }

    pub fn has_loads(&self) -> bool {
        !self.loads.is_empty()
    }

    /// `B·u` for a single time node.
    pub fn apply_control(&self, u: &[f64]) -> DVector<f64> {
        assert_eq!(u.len(), self.n_controls());
        let mut out = DVector::zeros(self.dim());
        for (c, &uc) in u.iter().enumerate() {
            if uc != 0.0 {
                out.axpy(uc, &self.control.column(c), 1.0);
            }
        }
        out
    }

    /// Smallest value of `xᵀ sym(κK + sC + Q) x / xᵀ W_V x` for every advection
    /// scale `s` in `[s_min, s_max]`, by shifted inverse iteration.
    /// Returns `None` when the symmetric part is not positive definite.
    pub fn rayleigh_floor(&self, s_min: f64, s_max: f64, shift: f64) -> Option<f64> {
        // The minimum eigenvalue is concave in s, so the endpoints suffice.
        let mut best = f64::INFINITY;
        for s in [s_min, s_max] {
            let a = self.system_matrix_scaled(s).symmetric_part().add_scaled(1.0, &self.mass, shift);
            best = best.min(min_generalized_eigenvalue(&a, &self.weight_v)?);
        }
        Some(best)
    }

    /// Estimates coercivity constants over the advection range reached on
    /// `[t0, t1]`. When the operator is not coercive on its own, a mass shift
    /// `γ₂ = 1` is used.
    pub fn estimate_coercivity(&self, t0: f64, t1: f64) -> Option<Coercivity> {
        let (s_min, s_max) =
            if self.has_advection() { self.advection_profile.range(t0, t1) } else { (0.0, 0.0) };
        let c_v = self.embedding_constant();
        match self.rayleigh_floor(s_min, s_max, 0.0) {
            Some(l) if l > 1e-10 => Some(Coercivity { gamma1: 0.99 * l, gamma2: 0.0, c_v }),
            _ => self
                .rayleigh_floor(s_min, s_max, 1.0)
                .filter(|&l| l > 0.0)
                .map(|l| Coercivity { gamma1: 0.99 * l, gamma2: 1.0, c_v }),
        }
    }

    /// `sup ‖x‖_M / ‖x‖_{W_V}`; exactly 1 when `W_V = M + K`.
    pub fn embedding_constant(&self) -> f64 {
        // M ≤ W_V holds by construction for assembled models.
        if self.mesh.is_some() {
            return 1.0;
        }
        // sup of xᵀMx / xᵀWx is 1/min(xᵀWx / xᵀMx).
        match min_generalized_eigenvalue(&self.weight_v, &self.mass) {
            Some(l) => 1.0 / l.sqrt(),
            None => f64::INFINITY,
        }
    }
}

/// Smallest eigenvalue of `A x = λ W x` for symmetric positive-definite `A`, `W`.
pub fn min_generalized_eigenvalue(a: &CsrMatrix, w: &CsrMatrix) -> Option<f64> {
    let chol = BandedCholesky::factor(a).ok()?;
    let n = a.nrows();
    // Deterministic start with components in every mode.
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64) * 0.7531).sin());
    let mut lambda = f64::INFINITY;
    for _ in 0..1000 {
        let wx = w.mul_vec(&x);
        let mut y = wx.clone();
        chol.solve_in_place(y.as_mut_slice());
        let norm = w.quad_form(&y, &y).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return None;
        }
        y /= norm;
        let next = a.quad_form(&y, &y);
        x = y;
        if (next - lambda).abs() <= 1e-13 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    Some(lambda)
}

/// Assembles the model on `mesh` and estimates its coercivity constants.
pub fn assemble_model(mesh: &Mesh, data: &ModelData) -> Result<FeModel> {
    if !(data.kappa > 0.0) {
        return Err(Error::InvalidArgument(format!("diffusion coefficient must be positive, got {}", data.kappa)));
    }
    if data.robin.iter().any(|&(_, q)| !(q >= 0.0)) {
        return Err(Error::InvalidArgument("Robin coefficients must be non-negative".into()));
    }
    let m = mesh.num_vertices();
    let dim = mesh.dimension();
    let pts = mesh.vertices();

    let mut pattern = Vec::new();
    for el in mesh.elements() {
        for &a in el {
            for &b in el {
                pattern.push((a, b, 0.0));
            }
        }
    }
    let (mut tm, mut tk, mut tc, mut tq) = (pattern.clone(), pattern.clone(), pattern.clone(), pattern);

    for (e, el) in mesh.elements().iter().enumerate() {
        let meas = mesh.element_measure(e);
        let nv = el.len();
        let grads = element_gradients(mesh, e);
        let centroid = centroid(mesh, el);
        let v = data.velocity.eval(centroid);
        for a in 0..nv {
            for b in 0..nv {
                let mass = if dim == 1 {
                    meas / 6.0 * if a == b { 2.0 } else { 1.0 }
                } else {
                    meas / 12.0 * if a == b { 2.0 } else { 1.0 }
                };
                tm.push((el[a], el[b], mass));
                let k = meas * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                tk.push((el[a], el[b], k));
                let vg = v[0] * grads[b][0] + v[1] * grads[b][1];
                if vg != 0.0 {
                    tc.push((el[a], el[b], meas * vg / nv as f64));
                }
            }
        }
    }

    let q_of = |label: BoundaryLabel| data.robin.iter().filter(|r| r.0 == label).map(|r| r.1).sum::<f64>();
    let mut robin_load = DVector::zeros(m);
    for f in mesh.boundary() {
        let q = q_of(f.label);
        if q == 0.0 {
            continue;
        }
        if dim == 1 {
            tq.push((f.a, f.a, q));
            robin_load[f.a] += q;
        } else {
            let len = mesh.facet_measure(f);
            for (i, j, w) in [(f.a, f.a, 2.0), (f.b, f.b, 2.0), (f.a, f.b, 1.0), (f.b, f.a, 1.0)] {
                tq.push((i, j, q * len / 6.0 * w));
            }
            robin_load[f.a] += q * len / 2.0;
            robin_load[f.b] += q * len / 2.0;
        }
    }

    let mass = CsrMatrix::from_triplets(m, m, &tm);
    let stiffness = CsrMatrix::from_triplets(m, m, &tk);
    let advection = CsrMatrix::from_triplets(m, m, &tc);
    let robin = CsrMatrix::from_triplets(m, m, &tq);
    let steady = stiffness.add_scaled(data.kappa, &robin, 1.0);
    let weight_v = mass.add_scaled(1.0, &stiffness, 1.0);

    let mut control = DMatrix::zeros(m, data.controls.len());
    for (c, shape) in data.controls.iter().enumerate() {
        control.set_column(c, &integrate_shape(mesh, shape));
    }

    let mut loads = Vec::new();
    if let Some(profile) = &data.outside_temperature {
        if robin_load.amax() > 0.0 {
            loads.push(LoadTerm { profile: profile.clone(), spatial: robin_load });
        }
    }
    for (shape, profile) in &data.sources {
        loads.push(LoadTerm { profile: profile.clone(), spatial: integrate_shape(mesh, shape) });
    }

    let y0 = match &data.initial {
        InitialState::Constant(c) => DVector::from_element(m, *c),
        InitialState::Function(f) => DVector::from_fn(m, |i, _| f(pts[i])),
        InitialState::Nodal(v) => {
            if v.len() != m {
                return Err(Error::InvalidArgument("nodal initial state has wrong length".into()));
            }
            v.clone()
        }
    };

    let mut model = FeModel {
        mesh: Some(mesh.clone()),
        mass,
        stiffness,
        kappa: data.kappa,
        advection,
        advection_profile: data.velocity_profile.clone(),
        robin,
        steady,
        control,
        loads,
        y0,
        weight_v,
        coercivity: None,
        cubic: data.cubic,
    };
    model.validate()?;
    model.coercivity = model.estimate_coercivity(data.horizon.0, data.horizon.1);
    Ok(model)
}

fn centroid(mesh: &Mesh, el: &[usize]) -> [f64; 2] {
    let p = mesh.vertices();
    let k = el.len() as f64;
    let sx: f64 = el.iter().map(|&v| p[v][0]).sum();
    let sy: f64 = el.iter().map(|&v| p[v][1]).sum();
    [sx / k, sy / k]
}

/// Gradients of the element's hat functions.
fn element_gradients(mesh: &Mesh, e: usize) -> Vec<[f64; 2]> {
    let el = &mesh.elements()[e];
    let p = mesh.vertices();
    if mesh.dimension() == 1 {
        let l = p[el[1]][0] - p[el[0]][0];
        return vec![[-1.0 / l, 0.0], [1.0 / l, 0.0]];
    }
    let two_area =
        (p[el[1]][0] - p[el[0]][0]) * (p[el[2]][1] - p[el[0]][1]) - (p[el[2]][0] - p[el[0]][0]) * (p[el[1]][1] - p[el[0]][1]);
    (0..3)
        .map(|k| {
            let (i, j) = (el[(k + 1) % 3], el[(k + 2) % 3]);
            [(p[i][1] - p[j][1]) / two_area, (p[j][0] - p[i][0]) / two_area]
        })
        .collect()
}

const SUBDIVISIONS: usize = 4;

/// Load vector `(∫ shape·φ_k)_k`. Indicators use a composite centroid rule on
/// a uniform refinement of each element, exact whenever region edges align with
/// the refined cells.
pub fn integrate_shape(mesh: &Mesh, shape: &ControlShape) -> DVector<f64> {
    let m = mesh.num_vertices();
    let mut out = DVector::zeros(m);
    let p = mesh.vertices();
    match shape {
        ControlShape::Indicator { regions, value } => {
            let inside = |q: [f64; 2]| regions.iter().any(|r| r.contains(q, mesh.dimension()));
            for (e, el) in mesh.elements().iter().enumerate() {
                let meas = mesh.element_measure(e);
                if mesh.dimension() == 1 {
                    let n = 2 * SUBDIVISIONS;
                    let (a, b) = (p[el[0]][0], p[el[1]][0]);
                    for s in 0..n {
                        let lam = (s as f64 + 0.5) / n as f64;
                        if inside([a + lam * (b - a), 0.0]) {
                            out[el[0]] += value * (1.0 - lam) * meas / n as f64;
                            out[el[1]] += value * lam * meas / n as f64;
                        }
                    }
                } else {
                    let n = SUBDIVISIONS;
                    let w = meas / (n * n) as f64;
                    let (p0, p1, p2) = (p[el[0]], p[el[1]], p[el[2]]);
                    let mut add = |s: f64, r: f64| {
                        let q = [
                            p0[0] + s * (p1[0] - p0[0]) + r * (p2[0] - p0[0]),
                            p0[1] + s * (p1[1] - p0[1]) + r * (p2[1] - p0[1]),
                        ];
                        if inside(q) {
                            out[el[0]] += value * (1.0 - s - r) * w;
                            out[el[1]] += value * s * w;
                            out[el[2]] += value * r * w;
                        }
                    };
                    let nf = n as f64;
                    for i in 0..n {
                        for j in 0..n - i {
                            let (fi, fj) = (i as f64, j as f64);
                            add((fi + 1.0 / 3.0) / nf, (fj + 1.0 / 3.0) / nf);
                            if i + j + 1 < n {
                                add((fi + 2.0 / 3.0) / nf, (fj + 2.0 / 3.0) / nf);
                            }
                        }
                    }
                }
            }
        }
        ControlShape::Boundary { labels, value } => {
            for f in mesh.boundary().iter().filter(|f| labels.contains(&f.label)) {
                if mesh.dimension() == 1 {
                    out[f.a] += value;
                } else {
                    let len = mesh.facet_measure(f);
                    out[f.a] += value * len / 2.0;
                    out[f.b] += value * len / 2.0;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval(n: usize) -> Mesh {
        Mesh::structured(1, n, Rect::interval(0.0, 1.0)).unwrap()
    }

    #[test]
    fn one_dimensional_matrices_match_hat_function_integrals() {
        let mesh = unit_interval(3);
        let model = assemble_model(
            &mesh,
            &ModelData {
                controls: vec![ControlShape::Indicator { regions: vec![Rect::interval(0.0, 1.0)], value: 1.0 }],
                ..Default::default()
            },
        )
        .unwrap();
        let h = 0.5;
        let m = model.mass().to_dense();
        let k = model.stiffness().to_dense();
        let m_exp = nalgebra::dmatrix![2.0, 1.0, 0.0; 1.0, 4.0, 1.0; 0.0, 1.0, 2.0] * (h / 6.0);
        let k_exp = nalgebra::dmatrix![1.0, -1.0, 0.0; -1.0, 2.0, -1.0; 0.0, -1.0, 1.0] / h;
        assert!((m - m_exp).amax() < 1e-15);
        assert!((k - k_exp).amax() < 1e-14);
        // ∫ φ_k = h/2 at the ends, h in the middle.
        let b = model.control().column(0).clone_owned();
        assert!((b - nalgebra::dvector![0.25, 0.5, 0.25]).amax() < 1e-15);
    }

    #[test]
    fn pure_diffusion_operator_is_time_independent() {
        let mesh = Mesh::structured(2, 4, Rect::UNIT).unwrap();
        let data = ModelData {
            kappa: 0.3,
            controls: vec![ControlShape::Indicator { regions: vec![Rect::UNIT], value: 1.0 }],
            ..Default::default()
        };
        let model = assemble_model(&mesh, &data).unwrap();
        let expected = model.stiffness().scale(0.3);
        for t in [0.0, 0.7, 3.0] {
            assert!(model.system_matrix(t).add_scaled(1.0, &expected, -1.0).max_abs() < 1e-15);
        }
        assert!(!model.is_time_dependent());
    }

    #[test]
    fn vanishing_control_column_is_rejected() {
        let mesh = Mesh::structured(2, 3, Rect::UNIT).unwrap();
        let data = ModelData {
            controls: vec![ControlShape::Boundary { labels: vec![BoundaryLabel::Left], value: 1.0 }],
            ..Default::default()
        };
        assert!(matches!(assemble_model(&mesh, &data), Err(Error::Consistency(_))));
    }

    #[test]
    fn rotation_field_is_tangent_to_circles() {
        let v = Velocity::Rotation { magnitude: 2.0, center: [0.5, 0.5] };
        let p = [0.9, 0.2];
        let w = v.eval(p);
        assert!((w[0] * (p[0] - 0.5) + w[1] * (p[1] - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn generalized_eigenvalue_of_diagonal_pencil() {
        let a = CsrMatrix::from_diagonal(&nalgebra::dvector![3.0, 1.0, 5.0]);
        let w = CsrMatrix::from_diagonal(&nalgebra::dvector![1.0, 4.0, 1.0]);
        let l = min_generalized_eigenvalue(&a, &w).unwrap();
        assert!((l - 0.25).abs() < 1e-12);
    }
}
