//! One level of backstepping for uncertainty that does not enter with the input.
//!
//! The plant is `ẋ = f(x) + g(x)[z + Δ]`, `ż = f₁(x, z) + u + Δ₁`. Phase one
//! learns a robust virtual control `ξ` for the x-subsystem while `z` tracks an
//! exploratory reference. Phase two freezes `ξ`, sets `ζ = z − ξ(x)` and
//! identifies the drift of `ζ` from data.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::basis::{Approximant, BasisSet};
use crate::dynsys::{Controller, CostSpec, IssBounds, Plant, SystemModel};
use crate::error::{Error, Result};
use crate::lstsq;
use crate::online_pi::{collect_window, iterate_on_window, trapezoid, Exploration, OnlinePiConfig, OnlineRun, SampleWindow};
use crate::robust::{
    estimate_roa_matched, ladder_check, matched_sigma, robust_redesign, ClassKFunction, RoaEstimate, Rho,
    RobustPolicy, SmallGainReport,
};
use crate::sampling::{log_ladder, unit_directions};

type Field = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Frozen virtual control `ξ` with the learned value `V_{i*}` of the
/// x-subsystem.
#[derive(Debug, Clone)]
pub struct BacksteppedState {
    xi: RobustPolicy,
    value: Approximant,
}

impl BacksteppedState {
    pub fn new(xi: RobustPolicy, value: Approximant) -> Result<Self> {
        if xi.base().dim() != value.dim() {
            return Err(Error::DimensionMismatch {
                expected: xi.base().dim(),
                got: value.dim(),
            });
        }
        Ok(BacksteppedState { xi, value })
    }

    pub fn xi(&self) -> &RobustPolicy {
        &self.xi
    }

    pub fn value(&self) -> &Approximant {
        &self.value
    }

    pub fn n(&self) -> usize {
        self.value.dim()
    }

    /// `ζ = z − ξ(x)`.
    pub fn zeta(&self, x: &[f64], z: f64) -> f64 {
        z - self.xi.eval(x)
    }

    /// `X₁ = (x, ζ)`.
    pub fn augmented(&self, x: &[f64], z: f64) -> Vec<f64> {
        let mut v = x.to_vec();
        v.push(self.zeta(x, z));
        v
    }

    /// Inverse of [`augmented`](Self::augmented): `(x, z)` from `X₁`.
    pub fn from_augmented(&self, x1: &[f64]) -> (Vec<f64>, f64) {
        let n = self.n();
        let x = x1[..n].to_vec();
        let z = x1[n] + self.xi.eval(&x);
        (x, z)
    }

    /// `U(X₁) = V(x) + ½ζ²`.
    pub fn composite_value(&self, x1: &[f64]) -> f64 {
        let n = self.n();
        self.value.eval_unchecked(&x1[..n]) + 0.5 * x1[n] * x1[n]
    }

    pub fn composite_field(&self) -> Field {
        let s = self.clone();
        Arc::new(move |x1: &[f64]| s.composite_value(x1))
    }
}

/// Settings for the phase-one collector.
#[derive(Debug, Clone)]
pub struct PhaseOneConfig {
    /// Gain `k` in `u = −k(z − u₀(x) − e(t))`.
    pub tracking_gain: f64,
    pub online: OnlinePiConfig,
}

impl Default for PhaseOneConfig {
    fn default() -> Self {
        PhaseOneConfig {
            tracking_gain: 10.0,
            online: OnlinePiConfig::default(),
        }
    }
}

/// Phase-one learning: `z` tracks `u₀(x) + e(t)` and policy iteration runs
/// on the x-subsystem with `z + Δ` as the measured actuation.
pub fn phase_one_learn(
    plant: &mut dyn Plant,
    u0: &Approximant,
    exploration: &Exploration,
    basis_v: &BasisSet,
    basis_u: &BasisSet,
    cost: &CostSpec,
    cfg: &PhaseOneConfig,
) -> Result<OnlineRun> {
    if !plant.has_z_channel() {
        return Err(Error::InvalidArgument("phase one needs a plant with a z-channel".into()));
    }
    let k = cfg.tracking_gain;
    let controller = |x: &[f64], z: Option<f64>, t: f64| {
        let z = z.unwrap_or(0.0);
        -k * (z - u0.eval_unchecked(x) - exploration.eval(t))
    };
    let l = cfg.online.intervals_for(basis_v.len() + basis_u.len());
    let window = collect_window(plant, &controller, cfg.online.interval_len, l)?;
    iterate_on_window(window, u0, basis_v, basis_u, cost, &cfg.online)
}

/// Phase one followed by robust redesign of the final policy into `ξ`.
#[allow(clippy::too_many_arguments)]
pub fn phase_one(
    plant: &mut dyn Plant,
    u0: &Approximant,
    exploration: &Exploration,
    basis_v: &BasisSet,
    basis_u: &BasisSet,
    cost: &CostSpec,
    rho: &Rho,
    cfg: &PhaseOneConfig,
) -> Result<(RobustPolicy, OnlineRun)> {
    let run = phase_one_learn(plant, u0, exploration, basis_v, basis_u, cost, cfg)?;
    let xi = robust_redesign(&run.last().next_policy, rho, cost.control_weight)?;
    Ok((xi, run))
}

/// Least-squares problem identifying `f̄₁` and `ḡ₁`.
#[derive(Debug, Clone)]
pub struct PhaseTwoRegression {
    /// Rows: `∫ψ_j ζ` for the ψ-basis, then `∫φ_j Δ ζ` for the φ-basis.
    pub theta: DMatrix<f64>,
    /// `½ζ²(t_{k+1}) − ½ζ²(t_k) − ∫(u + Δ₁)ζ`.
    pub target: Vec<f64>,
    /// Interval start times.
    pub times: Vec<f64>,
    pub psi: BasisSet,
    pub phi: BasisSet,
}

impl PhaseTwoRegression {
    pub fn rows(&self) -> usize {
        self.theta.nrows()
    }

    pub fn cols(&self) -> usize {
        self.theta.ncols()
    }
}

/// Assemble the phase-two rows from a window recorded on a z-channel plant.
///
/// `ψ` lives on `(x, z)`, `φ` on `x`. `Δ` is read as `x_channel − z`.
pub fn assemble_phase_two(
    window: &SampleWindow,
    state: &BacksteppedState,
    psi: &BasisSet,
    phi: &BasisSet,
) -> Result<PhaseTwoRegression> {
    let n = state.n();
    if psi.dim() != n + 1 {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            got: psi.dim(),
        });
    }
    if phi.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: phi.dim(),
        });
    }
    let traj = &window.trajectory;
    let (zs, zc) = match (&traj.z, &traj.z_channel) {
        (Some(z), Some(c)) => (z, c),
        _ => return Err(Error::InvalidArgument("window carries no z-channel record".into())),
    };
    let n3 = psi.len();
    let n4 = phi.len();
    let l = window.intervals();
    let first = window.boundaries.first().copied().unwrap_or(0);
    let last = window.boundaries.last().copied().unwrap_or(0);
    let span = last + 1 - first;
    let mut zeta = vec![0.0; span];
    let mut drive = vec![0.0; span];
    let mut cols: Vec<Vec<f64>> = vec![vec![0.0; span]; n3 + n4];
    let mut xz = vec![0.0; n + 1];
    for i in first..=last {
        let x = &traj.x[i];
        let z = zs[i];
        let zt = state.zeta(x, z);
        let delta = traj.x_channel[i] - z;
        let k = i - first;
        zeta[k] = zt;
        drive[k] = zc[i] * zt;
        xz[..n].copy_from_slice(x);
        xz[n] = z;
        for (j, v) in psi.eval(&xz)?.into_iter().enumerate() {
            cols[j][k] = v * zt;
        }
        for (j, v) in phi.eval(x)?.into_iter().enumerate() {
            cols[n3 + j][k] = v * delta * zt;
        }
    }
    let time = &traj.time[first..=last];
    let mut theta = DMatrix::zeros(l, n3 + n4);
    let mut target = Vec::with_capacity(l);
    let mut times = Vec::with_capacity(l);
    for k in 0..l {
        let (a, b) = window.interval(k);
        let (a, b) = (a - first, b - first);
        for (j, c) in cols.iter().enumerate() {
            theta[(k, j)] = trapezoid(time, c, a, b);
        }
        target.push(0.5 * (zeta[b] * zeta[b] - zeta[a] * zeta[a]) - trapezoid(time, &drive, a, b));
        times.push(time[a]);
    }
    Ok(PhaseTwoRegression {
        theta,
        target,
        times,
        psi: psi.clone(),
        phi: phi.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct PhaseTwoSolution {
    /// `f̂₁` on `(x, z)`.
    pub f1: Approximant,
    /// `ĝ₁` on `x`.
    pub g1: Approximant,
    pub residuals: Vec<f64>,
    pub residual_rms: f64,
    pub min_singular_value: f64,
    pub pe_ratio: f64,
}

/// Least-squares solve with the relative excitation check `ratio ≥ delta`.
///
/// The `Δζ` columns carry `−ĝ₁`, so their coefficients are negated.
pub fn solve_phase_two(problem: &PhaseTwoRegression, delta: f64) -> Result<PhaseTwoSolution> {
    if problem.rows() < problem.cols() {
        return Err(Error::PEViolation {
            ratio: 0.0,
            threshold: delta,
        });
    }
    let ls = lstsq::solve(&problem.theta, &problem.target);
    let ratio = ls.excitation_ratio();
    if !(ratio >= delta) {
        return Err(Error::PEViolation {
            ratio,
            threshold: delta,
        });
    }
    let n3 = problem.psi.len();
    let f1 = Approximant::new(problem.psi.clone(), ls.solution[..n3].to_vec())?;
    let g1 = Approximant::new(
        problem.phi.clone(),
        ls.solution[n3..].iter().map(|c| -c).collect(),
    )?;
    Ok(PhaseTwoSolution {
        f1,
        g1,
        residuals: ls.residuals,
        residual_rms: ls.residual_rms,
        min_singular_value: ls.raw_min_eigenvalue,
        pe_ratio: ratio,
    })
}

/// Settings for the phase-two collector.
#[derive(Debug, Clone)]
pub struct PhaseTwoConfig {
    pub interval_len: f64,
    /// Defaults to four rows per unknown.
    pub intervals: Option<usize>,
    pub delta: f64,
    /// Gain `k` in `u = −kζ + e(t)`.
    pub feedback_gain: f64,
}

impl Default for PhaseTwoConfig {
    fn default() -> Self {
        PhaseTwoConfig {
            interval_len: 0.1,
            intervals: None,
            delta: 1e-6,
            feedback_gain: 8.0,
        }
    }
}

/// Collect under `u = −kζ + e(t)` and identify `f̄₁`, `ḡ₁`.
pub fn phase_two(
    plant: &mut dyn Plant,
    state: &BacksteppedState,
    exploration: &Exploration,
    psi: &BasisSet,
    phi: &BasisSet,
    cfg: &PhaseTwoConfig,
) -> Result<(PhaseTwoSolution, SampleWindow)> {
    let l = cfg.intervals.unwrap_or(4 * (psi.len() + phi.len()));
    let k = cfg.feedback_gain;
    let controller =
        |x: &[f64], z: Option<f64>, t: f64| -k * state.zeta(x, z.unwrap_or(0.0)) + exploration.eval(t);
    let window = collect_window(plant, &controller, cfg.interval_len, l)?;
    let problem = assemble_phase_two(&window, state, psi, phi)?;
    let sol = solve_phase_two(&problem, cfg.delta)?;
    Ok((sol, window))
}

/// The backstepped robust controller `u_ro1(x, z)`.
#[derive(Debug, Clone)]
pub struct BacksteppedController {
    state: BacksteppedState,
    f1: Approximant,
    g1: Approximant,
    u_hat: Approximant,
    rho: Rho,
    rho1: Rho,
    epsilon: f64,
    r: f64,
}

/// `u_ro1 = −f̂₁ + 2r·û − ĝ₁²ρ₁²ζ/4 − ε²ζ − ρ₁²ζ/4 − ε²ρ²(ζ²)ζ / (2ρ²(|x|²))`
/// with `ρ₁(s) = 2ρ(s/2)` evaluated at `|X₁|²`.
pub fn u_ro1(
    state: &BacksteppedState,
    f1: &Approximant,
    g1: &Approximant,
    u_hat: &Approximant,
    rho: &Rho,
    epsilon: f64,
    r: f64,
) -> Result<BacksteppedController> {
    let n = state.n();
    if f1.dim() != n + 1 || g1.dim() != n || u_hat.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: g1.dim(),
        });
    }
    if !(epsilon > 0.0) || !(r > 0.0) {
        return Err(Error::InvalidArgument("ε and r must be positive".into()));
    }
    Ok(BacksteppedController {
        state: state.clone(),
        f1: f1.clone(),
        g1: g1.clone(),
        u_hat: u_hat.clone(),
        rho1: rho.doubled(),
        rho: rho.clone(),
        epsilon,
        r,
    })
}

impl BacksteppedController {
    pub fn state(&self) -> &BacksteppedState {
        &self.state
    }

    pub fn rho(&self) -> &Rho {
        &self.rho
    }

    pub fn f1(&self) -> &Approximant {
        &self.f1
    }

    pub fn g1(&self) -> &Approximant {
        &self.g1
    }

    pub fn u_hat(&self) -> &Approximant {
        &self.u_hat
    }

    pub fn eval(&self, x: &[f64], z: f64) -> f64 {
        let zeta = self.state.zeta(x, z);
        let nx2 = sq_norm(x);
        let p1 = self.rho1.eval(nx2 + zeta * zeta);
        let pz = self.rho.eval(zeta * zeta);
        let px = self.rho.eval(nx2);
        let mut xz = x.to_vec();
        xz.push(z);
        let g = self.g1.eval_unchecked(x);
        let e2 = self.epsilon * self.epsilon;
        -self.f1.eval_unchecked(&xz) + 2.0 * self.r * self.u_hat.eval_unchecked(x)
            - 0.25 * g * g * p1 * p1 * zeta
            - e2 * zeta
            - 0.25 * p1 * p1 * zeta
            - e2 * pz * pz * zeta / (2.0 * px * px)
    }
}

impl Controller for BacksteppedController {
    fn control(&self, x: &[f64], z: Option<f64>, _t: f64) -> f64 {
        self.eval(x, z.unwrap_or(0.0))
    }
}

/// `∂ξ/∂x`: exact for constant `ρ`, central differences otherwise.
pub fn xi_gradient(xi: &RobustPolicy, x: &[f64]) -> Vec<f64> {
    if xi.rho().as_constant().is_some() {
        let m = xi.multiplier(x);
        xi.base().gradient_unchecked(x).into_iter().map(|g| m * g).collect()
    } else {
        xi.gradient_fd(x, 1e-6)
    }
}

type CascadeTruth = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
type XTruth = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Ground truth `f̄₁ = f₁ − ∇ξ·(f + g z)` and `ḡ₁ = ∇ξ·g` from the model.
pub fn cascade_truth(model: &SystemModel, xi: &RobustPolicy) -> Result<(CascadeTruth, XTruth)> {
    if !model.has_z_channel() {
        return Err(Error::InvalidArgument("model has no z-channel".into()));
    }
    let (m1, x1) = (model.clone(), xi.clone());
    let fbar: CascadeTruth = Arc::new(move |x: &[f64], z: f64| {
        let grad = xi_gradient(&x1, x);
        let f = m1.drift(x);
        let g = m1.input_gain(x);
        let flow: f64 = grad.iter().zip(f.iter().zip(&g)).map(|(d, (fi, gi))| d * (fi + gi * z)).sum();
        m1.f1(x, z).unwrap_or(0.0) - flow
    });
    let (m2, x2) = (model.clone(), xi.clone());
    let gbar: XTruth = Arc::new(move |x: &[f64]| {
        let grad = xi_gradient(&x2, x);
        grad.iter().zip(m2.input_gain(x)).map(|(d, g)| d * g).sum()
    });
    Ok((fbar, gbar))
}

/// Oracle quantities entering the unmatched redesign error.
#[derive(Clone)]
pub struct UnmatchedTruth {
    pub fbar1: CascadeTruth,
    pub gbar1: XTruth,
    /// `u_{i*+1}`.
    pub u_next: Approximant,
}

/// `e_ro1(X₁) = −f̄₁ + f̂₁ + 2r[u_{i*+1} − û] − [ḡ₁² − ĝ₁²]ρ₁²(|X₁|²)ζ/4`.
pub fn redesign_error_unmatched(
    controller: &BacksteppedController,
    truth: &UnmatchedTruth,
) -> impl Fn(&[f64]) -> f64 + Send + Sync + Clone + 'static {
    let c = controller.clone();
    let t = truth.clone();
    move |x1: &[f64]| {
        let (x, z) = c.state.from_augmented(x1);
        let zeta = x1[x.len()];
        let mut xz = x.clone();
        xz.push(z);
        let p1 = c.rho1.eval(sq_norm(x1));
        let gt = (t.gbar1)(&x);
        let gh = c.g1.eval_unchecked(&x);
        -(t.fbar1)(&x, z) + c.f1.eval_unchecked(&xz)
            + 2.0 * c.r * (t.u_next.eval_unchecked(&x) - c.u_hat.eval_unchecked(&x))
            - 0.25 * (gt * gt - gh * gh) * p1 * p1 * zeta
    }
}

/// Monotone envelope `κ₈` of `|ξ(x)|` over spheres `|x| = s ≤ s_max`.
///
/// Each radius is scanned along 64 directions and the profile is made
/// nondecreasing by a running maximum. The table extends linearly past
/// `s_max`.
pub fn kappa8_envelope(xi: &RobustPolicy, dim: usize, s_max: f64, radii: usize) -> Result<ClassKFunction> {
    if !(s_max > 0.0) || radii < 2 {
        return Err(Error::InvalidArgument("κ₈ needs s_max > 0 and two radii".into()));
    }
    let dirs = unit_directions(dim, 64);
    let ladder = log_ladder(s_max * 1e-6, s_max, radii);
    let mut run = 0.0f64;
    let vals: Vec<f64> = ladder
        .iter()
        .map(|&s| {
            let m = dirs
                .iter()
                .map(|d| xi.eval(&d.iter().map(|v| v * s).collect::<Vec<_>>()).abs())
                .fold(0.0, f64::max);
            run = run.max(m);
            run
        })
        .collect();
    Ok(ClassKFunction::from_samples("κ₈", &ladder, &vals, true))
}

/// `κ̃₁ = max{κ₁, κ₅}` and `κ̃₂ = max{κ₂, κ₉}` with
/// `κ₉(s) = max{κ₆(s), κ₇(κ₈(2s)), κ₇(2s)}`.
pub fn unmatched_gains(bounds: &IssBounds, kappa8: &ClassKFunction) -> Result<(ClassKFunction, ClassKFunction)> {
    let missing = |n: &str| Error::InvalidArgument(format!("unmatched gain {n} not declared"));
    let k5 = bounds.kappa5.as_ref().ok_or_else(|| missing("κ₅"))?;
    let k6 = bounds.kappa6.as_ref().ok_or_else(|| missing("κ₆"))?;
    let k7 = bounds.kappa7.as_ref().ok_or_else(|| missing("κ₇"))?;
    let two = ClassKFunction::linear(2.0).with_label("2s");
    let k9 = ClassKFunction::max_of(&[k6.clone(), k7.compose(kappa8).compose(&two), k7.compose(&two)])
        .with_label("κ₉");
    let k1t = ClassKFunction::max_of(&[bounds.kappa1.clone(), k5.clone()]).with_label("κ̃₁");
    let k2t = ClassKFunction::max_of(&[bounds.kappa2.clone(), k9]).with_label("κ̃₂");
    Ok((k1t, k2t))
}

/// `max{κ̃₂, κ̃₁∘λ̲⁻¹∘κ₃∘α̲₁⁻¹∘ᾱ₁}`.
pub fn unmatched_rhs(
    kappa1_t: &ClassKFunction,
    kappa2_t: &ClassKFunction,
    kappa3: &ClassKFunction,
    lambda_lo: &ClassKFunction,
    alpha1_lo: &ClassKFunction,
    alpha1_hi: &ClassKFunction,
) -> ClassKFunction {
    crate::robust::matched_rhs(kappa1_t, kappa2_t, kappa3, lambda_lo, alpha1_lo, alpha1_hi)
}

/// Ladder check of `γ₁ > max{κ̃₂, κ̃₁∘λ̲⁻¹∘κ₃∘α̲₁⁻¹∘ᾱ₁}`.
#[allow(clippy::too_many_arguments)]
pub fn check_small_gain_unmatched(
    gamma1: &ClassKFunction,
    kappa1_t: &ClassKFunction,
    kappa2_t: &ClassKFunction,
    kappa3: &ClassKFunction,
    lambda_lo: &ClassKFunction,
    alpha1_lo: &ClassKFunction,
    alpha1_hi: &ClassKFunction,
    s_max: f64,
    samples: usize,
) -> Result<SmallGainReport> {
    let rhs = unmatched_rhs(kappa1_t, kappa2_t, kappa3, lambda_lo, alpha1_lo, alpha1_hi);
    ladder_check(gamma1, &rhs, s_max, samples)
}

/// `σ₁` between `κ₃∘α̲₁⁻¹` and `λ̲∘κ̃₁⁻¹∘γ₁∘ᾱ₁⁻¹`.
pub fn unmatched_sigma(
    gamma1: &ClassKFunction,
    kappa1_t: &ClassKFunction,
    kappa3: &ClassKFunction,
    lambda_lo: &ClassKFunction,
    alpha1_lo: &ClassKFunction,
    alpha1_hi: &ClassKFunction,
    s_hi: f64,
) -> Result<ClassKFunction> {
    matched_sigma(gamma1, kappa1_t, kappa3, lambda_lo, alpha1_lo, alpha1_hi, s_hi)
}

/// `Ω₁ = {(w, X₁): max[σ₁(U(X₁)), W(w)] ≤ σ₁(d₁)}`.
pub fn estimate_roa_unmatched(
    composite: Field,
    w_fn: Field,
    d1: f64,
    sigma1: &ClassKFunction,
) -> Result<RoaEstimate> {
    estimate_roa_matched(composite, w_fn, d1, sigma1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::homogeneous_basis;

    fn lin(dim: usize, k: &[f64]) -> Approximant {
        Approximant::linear(homogeneous_basis(dim, 1), k).unwrap()
    }

    fn state(k: f64, rho: f64) -> BacksteppedState {
        let xi = robust_redesign(&lin(1, &[-k]), &Rho::constant(rho).unwrap(), 1.0).unwrap();
        let v = Approximant::new(homogeneous_basis(1, 2), vec![2.0]).unwrap();
        BacksteppedState::new(xi, v).unwrap()
    }

    #[test]
    fn zeta_roundtrip() {
        let s = state(1.5, 2.0);
        let x1 = s.augmented(&[0.7], -0.4);
        let (x, z) = s.from_augmented(&x1);
        assert!((s.zeta(&x, z) - x1[1]).abs() < 1e-12);
        assert!((z + 0.4).abs() < 1e-12);
        assert_eq!(s.composite_value(&[0.0, 0.0]), 0.0);
        assert!((s.composite_value(&[1.0, 2.0]) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn controller_vanishes_at_origin_and_on_manifold() {
        let s = state(1.0, 1.0);
        let f1 = Approximant::linear(homogeneous_basis(2, 1), &[0.3, -0.2]).unwrap();
        let g1 = Approximant::new(crate::experiments::constant_basis(1), vec![0.7]).unwrap();
        let uh = lin(1, &[-1.2]);
        let rho = Rho::constant(1.0).unwrap();
        let c = u_ro1(&s, &f1, &g1, &uh, &rho, 0.5, 1.0).unwrap();
        assert_eq!(c.eval(&[0.0], 0.0), 0.0);
        let x = [0.4];
        let z = s.xi().eval(&x);
        let expect = -(0.3 * 0.4 - 0.2 * z) + 2.0 * (-1.2 * 0.4);
        assert!((c.eval(&x, z) - expect).abs() < 1e-12);
    }

    #[test]
    fn exact_pieces_give_zero_error() {
        let s = state(1.0, 1.0);
        let f1 = Approximant::linear(homogeneous_basis(2, 1), &[0.3, -0.2]).unwrap();
        let g1 = Approximant::new(crate::experiments::constant_basis(1), vec![0.7]).unwrap();
        let uh = lin(1, &[-1.2]);
        let rho = Rho::constant(1.0).unwrap();
        let c = u_ro1(&s, &f1, &g1, &uh, &rho, 0.5, 1.0).unwrap();
        let f = f1.clone();
        let exact = UnmatchedTruth {
            fbar1: Arc::new(move |x: &[f64], z: f64| f.eval_unchecked(&[x[0], z])),
            gbar1: Arc::new(|_: &[f64]| 0.7),
            u_next: uh.clone(),
        };
        let e = redesign_error_unmatched(&c, &exact);
        let f = f1.clone();
        let shifted = UnmatchedTruth {
            fbar1: Arc::new(move |x: &[f64], z: f64| f.eval_unchecked(&[x[0], z]) - 0.25),
            ..exact.clone()
        };
        let es = redesign_error_unmatched(&c, &shifted);
        for p in [[0.1, 0.2], [-0.5, 0.9], [1.3, -0.4]] {
            assert!(e(&p).abs() < 1e-12);
            assert!((es(&p) - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn kappa8_bounds_xi() {
        let s = state(2.0, 1.0);
        let k8 = kappa8_envelope(s.xi(), 1, 3.0, 50).unwrap();
        // ξ = −3x
        for r in [0.01, 0.5, 2.9] {
            assert!((k8.eval(r) - 3.0 * r).abs() < 1e-6 * (1.0 + r));
        }
        assert!(k8.eval(6.0) >= 17.9);
    }

    #[test]
    fn linear_gains_and_dominating_kappa7() {
        let l = |k: f64| ClassKFunction::linear(k);
        let ok = check_small_gain_unmatched(&l(2.0), &l(0.5), &l(0.1), &l(1.0), &l(1.0), &l(1.0), &l(1.0), 10.0, 50)
            .unwrap();
        assert!(ok.holds);
        assert!((ok.relative_margin - 3.0).abs() < 1e-9);
        let bad = check_small_gain_unmatched(&l(2.0), &l(0.5), &l(5.0), &l(1.0), &l(1.0), &l(1.0), &l(1.0), 10.0, 50)
            .unwrap();
        assert!(!bad.holds && bad.margin < 0.0);
    }
}
