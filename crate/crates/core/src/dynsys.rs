//! Plants, hidden uncertainty subsystems and fixed-step closed-loop simulation.
//!
//! The simulated interconnection is
//!
//! ```text
//! ẇ = Δ_w(w, x)
//! ẋ = f(x) + g(x)·(a + Δ(w, x))        a = u, or a = z with a z-channel
//! ż = f₁(x, z) + u + Δ₁(w, x, z)        only with a z-channel
//! ```
//!
//! Learners only ever see [`Trajectory`]; the hidden state `w` is kept in
//! [`SimulationRecord`] for post-hoc audits.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::robust::ClassKFunction;
use crate::sampling::BoxRegion;

pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type CascadeField = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type HiddenField = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
pub type HiddenScalar = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type HiddenCascade = Arc<dyn Fn(&[f64], &[f64], f64) -> f64 + Send + Sync>;

/// Default blow-up bound on the full state norm.
pub const DEFAULT_BLOW_UP: f64 = 1e6;

/// Learner-visible plant `ẋ = f(x) + g(x)·a` with an optional integrator
/// `ż = f₁(x, z) + u` upstream of the x-subsystem.
#[derive(Clone)]
pub struct SystemModel {
    n: usize,
    drift: VectorField,
    input_gain: VectorField,
    f1: Option<CascadeField>,
}

impl SystemModel {
    pub fn new(n: usize, drift: VectorField, input_gain: VectorField) -> Result<Self> {
        let origin = vec![0.0; n];
        let f0 = drift(&origin);
        if f0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: f0.len(),
            });
        }
        if input_gain(&origin).len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: input_gain(&origin).len(),
            });
        }
        let norm = f0.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm <= 1e-10) {
            return Err(Error::InvalidArgument(format!(
                "drift does not vanish at the origin (|f(0)| = {norm:e})"
            )));
        }
        Ok(SystemModel {
            n,
            drift,
            input_gain,
            f1: None,
        })
    }

    /// Add the `ż = f₁(x, z) + u` channel.
    pub fn with_z_channel(mut self, f1: CascadeField) -> Result<Self> {
        let v = f1(&vec![0.0; self.n], 0.0);
        if !(v.abs() <= 1e-10) {
            return Err(Error::InvalidArgument(format!(
                "f1 does not vanish at the origin ({v:e})"
            )));
        }
        self.f1 = Some(f1);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_z_channel(&self) -> bool {
        self.f1.is_some()
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        (self.drift)(x)
    }

    pub fn input_gain(&self, x: &[f64]) -> Vec<f64> {
        (self.input_gain)(x)
    }

    pub fn f1(&self, x: &[f64], z: f64) -> Option<f64> {
        self.f1.as_ref().map(|f| f(x, z))
    }

    /// The x-subsystem alone, without the z-channel.
    pub fn x_subsystem(&self) -> SystemModel {
        SystemModel {
            n: self.n,
            drift: self.drift.clone(),
            input_gain: self.input_gain.clone(),
            f1: None,
        }
    }

    /// Maximum difference quotient of the drift and input gain on `region`.
    pub fn lipschitz_estimate(&self, region: &BoxRegion, samples: usize) -> Result<(f64, f64)> {
        let f = lipschitz_probe(&|x: &[f64]| self.drift(x), region, samples)?;
        let g = lipschitz_probe(&|x: &[f64]| self.input_gain(x), region, samples)?;
        Ok((f, g))
    }
}

/// Gain bounds declared for a dynamic uncertainty.
#[derive(Clone)]
pub struct IssBounds {
    /// `|Δ| ≤ max{κ₁(|w|), κ₂(|x|)}`
    pub kappa1: ClassKFunction,
    pub kappa2: ClassKFunction,
    /// `W(w) ≥ κ₃(|x|) ⇒ ∇W·Δ_w ≤ −κ₄(|w|)`
    pub kappa3: ClassKFunction,
    pub kappa4: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `λ̲(|w|) ≤ W(w) ≤ λ̄(|w|)`
    pub lambda_lo: ClassKFunction,
    pub lambda_hi: ClassKFunction,
    pub lyapunov: ScalarField,
    pub lyapunov_grad: VectorField,
    /// `|Δ₁| ≤ max{κ₅(|w|), κ₆(|x|), κ₇(|z|)}` for unmatched uncertainty.
    pub kappa5: Option<ClassKFunction>,
    pub kappa6: Option<ClassKFunction>,
    pub kappa7: Option<ClassKFunction>,
}

/// Hidden subsystem `ẇ = Δ_w(w, x)` with its disturbance outputs.
#[derive(Clone)]
pub struct UncertaintyModel {
    p: usize,
    w_dynamics: HiddenField,
    matched: HiddenScalar,
    unmatched: Option<HiddenCascade>,
    bounds: IssBounds,
}

/// Outcome of checking the declared gain bounds on samples.
#[derive(Debug, Clone, Default)]
pub struct IssAudit {
    pub samples: usize,
    /// Worst `|Δ| − max{κ₁, κ₂}` (must be ≤ 0).
    pub disturbance_excess: f64,
    /// Worst `∇W·Δ_w + κ₄` over samples where `W ≥ κ₃(|x|)` (must be ≤ 0).
    pub dissipation_excess: f64,
    /// Worst violation of the `λ̲ ≤ W ≤ λ̄` sandwich (must be ≤ 0).
    pub sandwich_excess: f64,
    /// Worst `|Δ₁| − max{κ₅, κ₆, κ₇}` when unmatched bounds are declared.
    pub unmatched_excess: f64,
}

impl IssAudit {
    pub fn holds(&self) -> bool {
        self.disturbance_excess <= 1e-12
            && self.dissipation_excess <= 1e-12
            && self.sandwich_excess <= 1e-12
            && self.unmatched_excess <= 1e-12
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl UncertaintyModel {
    pub fn new(
        p: usize,
        w_dynamics: HiddenField,
        matched: HiddenScalar,
        bounds: IssBounds,
    ) -> Self {
        UncertaintyModel {
            p,
            w_dynamics,
            matched,
            unmatched: None,
            bounds,
        }
    }

    pub fn with_unmatched(mut self, delta1: HiddenCascade) -> Self {
        self.unmatched = Some(delta1);
        self
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn bounds(&self) -> &IssBounds {
        &self.bounds
    }

    pub fn w_dynamics(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        (self.w_dynamics)(w, x)
    }

    pub fn matched(&self, w: &[f64], x: &[f64]) -> f64 {
        (self.matched)(w, x)
    }

    pub fn unmatched(&self, w: &[f64], x: &[f64], z: f64) -> f64 {
        self.unmatched.as_ref().map_or(0.0, |d| d(w, x, z))
    }

    /// Check the declared bounds on every pair of the given samples.
    pub fn audit(&self, w_samples: &[Vec<f64>], x_samples: &[Vec<f64>], z_samples: &[f64]) -> IssAudit {
        let b = &self.bounds;
        let mut audit = IssAudit {
            disturbance_excess: f64::NEG_INFINITY,
            dissipation_excess: f64::NEG_INFINITY,
            sandwich_excess: f64::NEG_INFINITY,
            unmatched_excess: f64::NEG_INFINITY,
            samples: 0,
        };
        for w in w_samples {
            let nw = norm(w);
            let wv = (b.lyapunov)(w);
            audit.sandwich_excess = audit
                .sandwich_excess
                .max(b.lambda_lo.eval(nw) - wv)
                .max(wv - b.lambda_hi.eval(nw));
            let grad = (b.lyapunov_grad)(w);
            for x in x_samples {
                audit.samples += 1;
                let nx = norm(x);
                let d = self.matched(w, x).abs();
                let bound = b.kappa1.eval(nw).max(b.kappa2.eval(nx));
                audit.disturbance_excess = audit.disturbance_excess.max(d - bound);
                if wv >= b.kappa3.eval(nx) && nw > 0.0 {
                    let dw = self.w_dynamics(w, x);
                    let rate: f64 = grad.iter().zip(&dw).map(|(a, c)| a * c).sum();
                    audit.dissipation_excess =
                        audit.dissipation_excess.max(rate + (b.kappa4)(nw));
                }
                if let (Some(k5), Some(k6), Some(k7)) = (&b.kappa5, &b.kappa6, &b.kappa7) {
                    for &z in z_samples {
                        let d1 = self.unmatched(w, x, z).abs();
                        let bound = k5.eval(nw).max(k6.eval(nx)).max(k7.eval(z.abs()));
                        audit.unmatched_excess = audit.unmatched_excess.max(d1 - bound);
                    }
                }
            }
        }
        for v in [
            &mut audit.disturbance_excess,
            &mut audit.dissipation_excess,
            &mut audit.sandwich_excess,
            &mut audit.unmatched_excess,
        ] {
            if *v == f64::NEG_INFINITY {
                *v = 0.0;
            }
        }
        audit
    }
}

/// Running cost `Q(x) + r·u²` and the robustness margin `ε`.
#[derive(Clone)]
pub struct CostSpec {
    pub state_cost: ScalarField,
    pub control_weight: f64,
    pub margin: f64,
}

impl CostSpec {
    pub fn new(state_cost: ScalarField, control_weight: f64, margin: f64) -> Result<Self> {
        if !(control_weight > 0.0) || !(margin > 0.0) {
            return Err(Error::InvalidArgument(
                "control weight and margin must be positive".into(),
            ));
        }
        Ok(CostSpec {
            state_cost,
            control_weight,
            margin,
        })
    }

    /// Quadratic `Q(x) = Σ q_i x_i²`.
    pub fn diagonal(q: Vec<f64>, control_weight: f64, margin: f64) -> Result<Self> {
        Self::new(
            Arc::new(move |x: &[f64]| x.iter().zip(&q).map(|(a, w)| w * a * a).sum()),
            control_weight,
            margin,
        )
    }

    pub fn q(&self, x: &[f64]) -> f64 {
        (self.state_cost)(x)
    }

    /// `Q₀(x) = Q(x) − ε²|x|²`.
    pub fn q0(&self, x: &[f64]) -> f64 {
        self.q(x) - self.margin * self.margin * x.iter().map(|a| a * a).sum::<f64>()
    }

    /// Check `Q(0) = 0`, `Q > 0` and `Q₀ > 0` away from the origin.
    pub fn check(&self, samples: &[Vec<f64>]) -> Result<()> {
        let n = samples.first().map_or(0, Vec::len);
        let q0 = self.q(&vec![0.0; n]);
        if q0.abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("Q(0) = {q0}")));
        }
        for x in samples.iter().filter(|x| norm(x) > 0.0) {
            if !(self.q(x) > 0.0) || !(self.q0(x) > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "Q or Q - eps^2|x|^2 not positive at {x:?}"
                )));
            }
        }
        Ok(())
    }
}

/// State feedback `u = k(x, z, t)`.
pub trait Controller {
    fn control(&self, x: &[f64], z: Option<f64>, t: f64) -> f64;
}

impl<F> Controller for F
where
    F: Fn(&[f64], Option<f64>, f64) -> f64,
{
    fn control(&self, x: &[f64], z: Option<f64>, t: f64) -> f64 {
        self(x, z, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub x: Vec<f64>,
    pub z: Option<f64>,
    pub w: Vec<f64>,
}

impl InitialState {
    pub fn plain(x: Vec<f64>) -> Self {
        InitialState {
            x,
            z: None,
            w: Vec::new(),
        }
    }
}

/// Learner-facing record on the fixed integration grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub time: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub z: Option<Vec<f64>>,
    /// Applied input `u`.
    pub input: Vec<f64>,
    /// Composite actuation reaching the x-subsystem: `u + Δ`, or `z + Δ`
    /// with a z-channel.
    pub x_channel: Vec<f64>,
    /// Composite actuation of the z-subsystem, `u + Δ₁`.
    pub z_channel: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn step(&self) -> f64 {
        if self.time.len() < 2 {
            0.0
        } else {
            self.time[1] - self.time[0]
        }
    }

    pub fn final_x(&self) -> &[f64] {
        self.x.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Full simulation output, including the hidden state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationRecord {
    pub trajectory: Trajectory,
    pub w: Vec<Vec<f64>>,
}

impl SimulationRecord {
    pub fn learner_view(&self) -> &Trajectory {
        &self.trajectory
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub blow_up: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            blow_up: DEFAULT_BLOW_UP,
        }
    }
}

struct Layout {
    n: usize,
    has_z: bool,
    p: usize,
}

impl Layout {
    fn split<'a>(&self, s: &'a [f64]) -> (&'a [f64], Option<f64>, &'a [f64]) {
        let x = &s[..self.n];
        let z = self.has_z.then(|| s[self.n]);
        let off = self.n + self.has_z as usize;
        (x, z, &s[off..off + self.p])
    }
}

/// Derivative of the packed state plus the recorded channels at that state.
fn vector_field(
    model: &SystemModel,
    unc: Option<&UncertaintyModel>,
    controller: &dyn Controller,
    layout: &Layout,
    s: &[f64],
    t: f64,
) -> (Vec<f64>, f64, f64, Option<f64>) {
    let (x, z, w) = layout.split(s);
    let u = controller.control(x, z, t);
    let delta = unc.map_or(0.0, |m| m.matched(w, x));
    let actuation = z.unwrap_or(u);
    let xc = actuation + delta;
    let f = model.drift(x);
    let g = model.input_gain(x);
    let mut ds = Vec::with_capacity(s.len());
    ds.extend(f.iter().zip(&g).map(|(fi, gi)| fi + gi * xc));
    let mut zc = None;
    if let Some(zv) = z {
        let d1 = unc.map_or(0.0, |m| m.unmatched(w, x, zv));
        let c = u + d1;
        ds.push(model.f1(x, zv).unwrap_or(0.0) + c);
        zc = Some(c);
    }
    if let Some(m) = unc {
        ds.extend(m.w_dynamics(w, x));
    }
    (ds, u, xc, zc)
}

/// Integrate the closed loop with classical fixed-step RK4.
///
/// The controller is evaluated at every Runge–Kutta stage. The grid has
/// `round(horizon / step)` steps and node times `k·step`.
pub fn integrate(
    model: &SystemModel,
    uncertainty: Option<&UncertaintyModel>,
    controller: &dyn Controller,
    init: &InitialState,
    horizon: f64,
    step: f64,
    options: SimOptions,
) -> Result<SimulationRecord> {
    if !(step > 0.0) || !(horizon >= step) {
        return Err(Error::InvalidArgument(format!(
            "need step > 0 and horizon >= step (step {step}, horizon {horizon})"
        )));
    }
    if init.x.len() != model.n() {
        return Err(Error::DimensionMismatch {
            expected: model.n(),
            got: init.x.len(),
        });
    }
    if model.has_z_channel() != init.z.is_some() {
        return Err(Error::InvalidArgument(
            "initial z must be given exactly when the model has a z-channel".into(),
        ));
    }
    let p = uncertainty.map_or(0, UncertaintyModel::p);
    if init.w.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: init.w.len(),
        });
    }
    let layout = Layout {
        n: model.n(),
        has_z: model.has_z_channel(),
        p,
    };
    let mut s: Vec<f64> = init.x.clone();
    s.extend(init.z);
    s.extend(&init.w);
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial state is not finite".into()));
    }

    let steps = (horizon / step).round() as usize;
    let mut rec = SimulationRecord::default();
    let traj = &mut rec.trajectory;
    traj.time.reserve(steps + 1);
    if layout.has_z {
        traj.z = Some(Vec::with_capacity(steps + 1));
        traj.z_channel = Some(Vec::with_capacity(steps + 1));
    }

    let record = |rec: &mut SimulationRecord, s: &[f64], t: f64, u: f64, xc: f64, zc: Option<f64>| {
        let (x, z, w) = layout.split(s);
        let tr = &mut rec.trajectory;
        tr.time.push(t);
        tr.x.push(x.to_vec());
        if let (Some(zs), Some(zv)) = (tr.z.as_mut(), z) {
            zs.push(zv);
        }
        if let (Some(cs), Some(c)) = (tr.z_channel.as_mut(), zc) {
            cs.push(c);
        }
        tr.input.push(u);
        tr.x_channel.push(xc);
        rec.w.push(w.to_vec());
    };

    let check = |s: &[f64], t: f64| -> Result<()> {
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteDynamics(format!("state became non-finite at t = {t}")));
        }
        let nrm = norm(s);
        if nrm > options.blow_up {
            return Err(Error::StateDivergence {
                time: t,
                norm: nrm,
                bound: options.blow_up,
            });
        }
        Ok(())
    };

    let (mut k1, u0, xc0, zc0) = vector_field(model, uncertainty, controller, &layout, &s, 0.0);
    if k1.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteDynamics("vector field at t = 0".into()));
    }
    record(&mut rec, &s, 0.0, u0, xc0, zc0);

    let dim = s.len();
    let mut tmp = vec![0.0; dim];
    for k in 0..steps {
        let t = k as f64 * step;
        let h = step;
        for i in 0..dim {
            tmp[i] = s[i] + 0.5 * h * k1[i];
        }
        let (k2, ..) = vector_field(model, uncertainty, controller, &layout, &tmp, t + 0.5 * h);
        for i in 0..dim {
            tmp[i] = s[i] + 0.5 * h * k2[i];
        }
        let (k3, ..) = vector_field(model, uncertainty, controller, &layout, &tmp, t + 0.5 * h);
        for i in 0..dim {
            tmp[i] = s[i] + h * k3[i];
        }
        let (k4, ..) = vector_field(model, uncertainty, controller, &layout, &tmp, t + h);
        for i in 0..dim {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_next = (k + 1) as f64 * step;
        check(&s, t_next)?;
        let (next, u, xc, zc) = vector_field(model, uncertainty, controller, &layout, &s, t_next);
        if next.iter().any(|v| !v.is_finite()) || !u.is_finite() {
            return Err(Error::NonFiniteDynamics(format!("vector field at t = {t_next}")));
        }
        k1 = next;
        record(&mut rec, &s, t_next, u, xc, zc);
    }
    Ok(rec)
}

/// Largest difference quotient `|F(a) − F(b)| / |a − b|` over all pairs of a
/// deterministic sample of `region` (Halton points plus corners).
pub fn lipschitz_probe(
    map: &dyn Fn(&[f64]) -> Vec<f64>,
    region: &BoxRegion,
    samples: usize,
) -> Result<f64> {
    if !region.is_nondegenerate() || samples < 2 {
        return Err(Error::InvalidArgument(
            "lipschitz probe needs a nondegenerate box and at least two samples".into(),
        ));
    }
    let mut pts = region.corners();
    pts.extend(region.halton_points(samples.saturating_sub(pts.len()).max(2)));
    let vals: Vec<Vec<f64>> = pts.iter().map(|p| map(p)).collect();
    if vals.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteDynamics("map returned a non-finite value".into()));
    }
    let mut best = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let dx: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            if dx == 0.0 {
                continue;
            }
            let df: f64 = vals[i].iter().zip(&vals[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.max((df / dx).sqrt());
        }
    }
    Ok(best)
}

/// Apply-control-and-observe interface used by the data-driven learners.
pub trait Plant {
    fn state_dim(&self) -> usize;
    fn has_z_channel(&self) -> bool;
    fn step(&self) -> f64;
    /// Run from the plant's current initial condition for `horizon` seconds.
    fn run(&mut self, controller: &dyn Controller, horizon: f64) -> Result<Trajectory>;
}

/// Simulation-backed [`Plant`] that archives the hidden state of every run.
#[derive(Clone)]
pub struct SimulatedPlant {
    model: SystemModel,
    uncertainty: Option<UncertaintyModel>,
    init: InitialState,
    step: f64,
    options: SimOptions,
    archive: Vec<SimulationRecord>,
}

impl SimulatedPlant {
    pub fn new(
        model: SystemModel,
        uncertainty: Option<UncertaintyModel>,
        init: InitialState,
        step: f64,
    ) -> Self {
        SimulatedPlant {
            model,
            uncertainty,
            init,
            step,
            options: SimOptions::default(),
            archive: Vec::new(),
        }
    }

    pub fn with_options(mut self, options: SimOptions) -> Self {
        self.options = options;
        self
    }

    pub fn set_initial_state(&mut self, init: InitialState) {
        self.init = init;
    }

    pub fn initial_state(&self) -> &InitialState {
        &self.init
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn uncertainty(&self) -> Option<&UncertaintyModel> {
        self.uncertainty.as_ref()
    }

    /// Full records of every run so far (audit only).
    pub fn hidden_records(&self) -> &[SimulationRecord] {
        &self.archive
    }

    pub fn simulate(&self, controller: &dyn Controller, horizon: f64) -> Result<SimulationRecord> {
        integrate(
            &self.model,
            self.uncertainty.as_ref(),
            controller,
            &self.init,
            horizon,
            self.step,
            self.options,
        )
    }
}

impl Plant for SimulatedPlant {
    fn state_dim(&self) -> usize {
        self.model.n()
    }

    fn has_z_channel(&self) -> bool {
        self.model.has_z_channel()
    }

    fn step(&self) -> f64 {
        self.step
    }

    fn run(&mut self, controller: &dyn Controller, horizon: f64) -> Result<Trajectory> {
        let rec = self.simulate(controller, horizon)?;
        let view = rec.trajectory.clone();
        self.archive.push(rec);
        Ok(view)
    }
}
