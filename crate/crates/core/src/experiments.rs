//! Single-joint arm model, linear and cascade benchmarks, and analysis
//! utilities for trajectories and value surfaces.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{homogeneous_basis, make_polynomial_basis, Approximant, BasisSet};
use crate::dynsys::{CostSpec, InitialState, IssBounds, SystemModel, Trajectory, UncertaintyModel};
use crate::error::{Error, Result};
use crate::linear::care;
use crate::robust::ClassKFunction;
use crate::sampling::BoxRegion;

/// Sign of the gravity term in the transformed arm equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmGravity {
    /// Gravity pulls `x₁` back toward the target.
    Restoring,
    /// Gravity pushes `x₁` away from the target; `u₀` does not stabilise it.
    AsPrinted,
}

/// Physical parameters of the single-joint arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmModel {
    /// Segment mass (kg).
    pub mass: f64,
    /// Joint to centre-of-mass distance (m).
    pub length: f64,
    /// Gravitational acceleration (m/s²).
    pub gravity: f64,
    /// Inertia (kg·m²).
    pub inertia: f64,
    /// Neural-integrator time constant (s).
    pub tau_n: f64,
    /// Target joint angle (rad).
    pub theta0: f64,
    pub gravity_sign: ArmGravity,
}

impl Default for ArmModel {
    fn default() -> Self {
        ArmModel {
            mass: 1.65,
            length: 0.179,
            gravity: 9.81,
            inertia: 0.0779,
            tau_n: 0.1,
            theta0: PI / 4.0,
            gravity_sign: ArmGravity::Restoring,
        }
    }
}

impl ArmModel {
    pub fn validate(&self) -> Result<()> {
        let all = [self.mass, self.length, self.gravity, self.inertia, self.tau_n, self.theta0];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("arm parameters must be positive".into()))
        }
    }

    pub fn mgl(&self) -> f64 {
        self.mass * self.gravity * self.length
    }

    /// `sin(x₁/2)·sin(x₁/2 + θ₀)`.
    pub fn s(&self, x1: f64) -> f64 {
        (0.5 * x1).sin() * (0.5 * x1 + self.theta0).sin()
    }

    fn sign(&self) -> f64 {
        match self.gravity_sign {
            ArmGravity::AsPrinted => 1.0,
            ArmGravity::Restoring => -1.0,
        }
    }

    /// `(1 + τ_N)/τ_N`.
    pub fn filter_rate(&self) -> f64 {
        (1.0 + self.tau_n) / self.tau_n
    }

    /// Joint angle θ for the shifted coordinate `x₁`.
    pub fn physical_angle(&self, x1: f64) -> f64 {
        x1 + self.theta0
    }

    pub fn shifted_angle(&self, theta: f64) -> f64 {
        theta - self.theta0
    }

    /// Drift of `(x₁, x₂)`, with the `I·x₂` part of the matched channel
    /// folded in.
    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let k = self.sign() * 2.0 * self.mgl() / self.inertia;
        vec![x[1], k * self.s(x[0]) + x[1]]
    }

    pub fn w_rate(&self, w: f64, x: &[f64]) -> f64 {
        -self.filter_rate() * (w + self.inertia * x[1]) - self.sign() * 2.0 * self.mgl() * self.s(x[0])
    }

    /// Jacobian of `(w, x₁, x₂)` dynamics at the origin under `u = −k·x`.
    pub fn linearization(&self, k: &[f64]) -> DMatrix<f64> {
        let a = self.filter_rate();
        let i = self.inertia;
        // d s / d x₁ at 0 is sin(θ₀)/2
        let ds = 0.5 * self.theta0.sin();
        let sg = self.sign() * 2.0 * self.mgl();
        DMatrix::from_row_slice(
            3,
            3,
            &[
                -a,
                -sg * ds,
                -a * i,
                0.0,
                0.0,
                1.0,
                1.0 / i,
                sg * ds / i - k[0] / i,
                1.0 - k[1] / i,
            ],
        )
    }

    /// `(A, B)` of the x-subsystem at the origin.
    pub fn x_linearization(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let ds = 0.5 * self.theta0.sin();
        let sg = self.sign() * 2.0 * self.mgl();
        (
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, sg * ds / self.inertia, 1.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0 / self.inertia]),
        )
    }
}

/// Scalar gain bounds for `W = ½|w|²` and `ẇ` dissipative once
/// `|w| ≥ c·|x|`.
fn quadratic_iss_bounds(kappa1: f64, c: f64, kappa4: f64) -> IssBounds {
    IssBounds {
        kappa1: ClassKFunction::linear(kappa1).with_label("κ₁"),
        // Δ depends on w only; a vanishing slope keeps κ₂ of class K
        kappa2: ClassKFunction::linear(1e-9).with_label("κ₂"),
        kappa3: ClassKFunction::power(0.5 * c * c, 2.0).with_label("κ₃"),
        kappa4: Arc::new(move |s| kappa4 * s * s),
        lambda_lo: ClassKFunction::power(0.5, 2.0).with_label("λ̲"),
        lambda_hi: ClassKFunction::power(0.5, 2.0).with_label("λ̄"),
        lyapunov: Arc::new(|w: &[f64]| 0.5 * w.iter().map(|v| v * v).sum::<f64>()),
        lyapunov_grad: Arc::new(|w: &[f64]| w.to_vec()),
        kappa5: None,
        kappa6: None,
        kappa7: None,
    }
}

/// A ready-to-learn problem.
#[derive(Clone)]
pub struct Benchmark {
    pub name: String,
    pub model: SystemModel,
    pub uncertainty: Option<UncertaintyModel>,
    pub cost: CostSpec,
    pub u0: Approximant,
    /// Operating box for `x` (grids, level sets).
    pub region: BoxRegion,
    pub w_region: Option<BoxRegion>,
    pub initial: InitialState,
    pub basis_v: BasisSet,
    pub basis_u: BasisSet,
    /// `(A, B)` when the x-subsystem is linear.
    pub linear: Option<(DMatrix<f64>, DMatrix<f64>)>,
    pub cascade: Option<CascadeBases>,
}

/// Phase-two bases: `ψ` over `(x, z)` and `φ` over `x` with a constant.
#[derive(Debug, Clone)]
pub struct CascadeBases {
    pub psi: BasisSet,
    pub phi: BasisSet,
}

/// Arm problem with the operating box `|w| ≤ 1, |x₁| ≤ 0.8, |x₂| ≤ 3.5`.
pub fn build_arm_system(params: &ArmModel) -> Result<Benchmark> {
    params.validate()?;
    let p = *params;
    let drift = Arc::new(move |x: &[f64]| p.drift(x));
    let gain = Arc::new(move |_: &[f64]| vec![0.0, 1.0 / p.inertia]);
    let model = SystemModel::new(2, drift, gain)?;
    // |∂ẇ/∂x| bound: a·I·|x₂| + m·g·l·|x₁|
    let a = p.filter_rate();
    let cx = ((a * p.inertia).powi(2) + p.mgl().powi(2)).sqrt();
    let eta = 0.99;
    let bounds = quadratic_iss_bounds(1.0, cx / (eta * a), (1.0 - eta) * a);
    let unc = UncertaintyModel::new(
        1,
        Arc::new(move |w: &[f64], x: &[f64]| vec![p.w_rate(w[0], x)]),
        Arc::new(|w: &[f64], _: &[f64]| w[0]),
        bounds,
    );
    let cost = CostSpec::diagonal(vec![100.0, 1.0], 1.0, 0.9)?;
    let basis_u = make_polynomial_basis(2, 5, true, false);
    let u0 = Approximant::linear(basis_u.clone(), &[-0.5, -0.5])?;
    Ok(Benchmark {
        name: "arm".into(),
        model,
        uncertainty: Some(unc),
        cost,
        u0,
        region: BoxRegion::symmetric(&[0.8, 3.5])?,
        w_region: Some(BoxRegion::symmetric(&[1.0])?),
        initial: InitialState {
            x: vec![-PI / 4.0, 0.0],
            z: None,
            w: vec![1.0],
        },
        basis_v: make_polynomial_basis(2, 5, true, false),
        basis_u,
        linear: None,
        cascade: None,
    })
}

/// `ẋ = −x + u`, `Q = x²`, `r = 1`, `u₀ = 0`.
pub fn scalar_lqr() -> Result<Benchmark> {
    let model = SystemModel::new(1, Arc::new(|x: &[f64]| vec![-x[0]]), Arc::new(|_: &[f64]| vec![1.0]))?;
    let basis_u = homogeneous_basis(1, 1);
    Ok(Benchmark {
        name: "scalar_lqr".into(),
        model,
        uncertainty: None,
        cost: CostSpec::diagonal(vec![1.0], 1.0, 0.5)?,
        u0: Approximant::zero(basis_u.clone()),
        region: BoxRegion::symmetric(&[1.0])?,
        w_region: None,
        initial: InitialState::plain(vec![1.0]),
        basis_v: homogeneous_basis(1, 2),
        basis_u,
        linear: Some((DMatrix::from_element(1, 1, -1.0), DMatrix::from_element(1, 1, 1.0))),
        cascade: None,
    })
}

/// Seeded controllable 2-state plant with `Q = I`, `r = 1`; `u₀` is the
/// Riccati gain for `Q = 10·I`.
pub fn linear2(seed: u64) -> Result<Benchmark> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = loop {
        let a = DMatrix::<f64>::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::<f64>::from_fn(2, 1, |_, _| rng.random_range(-1.0..1.0));
        let ab = &a * &b;
        let det: f64 = b[(0, 0)] * ab[(1, 0)] - b[(1, 0)] * ab[(0, 0)];
        if det.abs() > 0.2 {
            break (a, b);
        }
    };
    let p0 = care(&a, &b, &(DMatrix::identity(2, 2) * 10.0), &DMatrix::identity(1, 1))?;
    let k0 = b.transpose() * p0;
    let (am, bm) = (a.clone(), b.clone());
    let model = SystemModel::new(
        2,
        Arc::new(move |x: &[f64]| {
            vec![am[(0, 0)] * x[0] + am[(0, 1)] * x[1], am[(1, 0)] * x[0] + am[(1, 1)] * x[1]]
        }),
        Arc::new(move |_: &[f64]| vec![bm[(0, 0)], bm[(1, 0)]]),
    )?;
    let basis_u = homogeneous_basis(2, 1);
    let u0 = Approximant::linear(basis_u.clone(), &[-k0[(0, 0)], -k0[(0, 1)]])?;
    Ok(Benchmark {
        name: format!("linear2_seed{seed}"),
        model,
        uncertainty: None,
        cost: CostSpec::diagonal(vec![1.0, 1.0], 1.0, 0.5)?,
        u0,
        region: BoxRegion::symmetric(&[1.0, 1.0])?,
        w_region: None,
        initial: InitialState::plain(vec![1.0, -1.0]),
        basis_v: homogeneous_basis(2, 2),
        basis_u,
        linear: Some((a, b)),
        cascade: None,
    })
}

/// Slope `c` of `κ₃ = ½(c·s)²` for `ẇ = −w + 0.5x`: dissipation
/// `−0.1·w²` once `|w| ≥ 0.5|x|/0.9`.
const MATCHED_W_COUPLING: f64 = 0.5;
const MATCHED_ETA: f64 = 0.9;

/// `ẋ = x + u + w`, `ẇ = −w + 0.5x`, `Δ = w`, `Q = x²`, `r = 1`,
/// `u₀ = −2x`.
pub fn matched_scalar() -> Result<Benchmark> {
    let model = SystemModel::new(1, Arc::new(|x: &[f64]| vec![x[0]]), Arc::new(|_: &[f64]| vec![1.0]))?;
    let bounds = quadratic_iss_bounds(
        1.0,
        MATCHED_W_COUPLING / MATCHED_ETA,
        1.0 - MATCHED_ETA,
    );
    let unc = UncertaintyModel::new(
        1,
        Arc::new(|w: &[f64], x: &[f64]| vec![-w[0] + MATCHED_W_COUPLING * x[0]]),
        Arc::new(|w: &[f64], _: &[f64]| w[0]),
        bounds,
    );
    let basis_u = homogeneous_basis(1, 1);
    Ok(Benchmark {
        name: "matched_scalar".into(),
        model,
        uncertainty: Some(unc),
        cost: CostSpec::diagonal(vec![1.0], 1.0, 0.5)?,
        u0: Approximant::linear(basis_u.clone(), &[-2.0])?,
        region: BoxRegion::symmetric(&[2.0])?,
        w_region: Some(BoxRegion::symmetric(&[2.0])?),
        initial: InitialState {
            x: vec![1.0],
            z: None,
            w: vec![0.5],
        },
        basis_v: homogeneous_basis(1, 2),
        basis_u,
        linear: Some((DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 1.0))),
        cascade: None,
    })
}

/// Coefficients of the cascade benchmark.
pub mod cascade {
    /// `f₁(x, z) = A1·x + A2·z`.
    pub const A1: f64 = 0.5;
    pub const A2: f64 = 0.2;
    /// `Δ₁ = D1·w`.
    pub const D1: f64 = 0.3;
    /// `ẇ = −RATE·w + C·x`.
    pub const RATE: f64 = 2.0;
    pub const C: f64 = 0.5;
    /// Robustness margin `ε`.
    pub const EPSILON: f64 = 0.9;
}

/// `ẋ = x + z + w`, `ż = 0.5x + 0.2z + u + 0.3w`, `ẇ = −2w + 0.5x`.
pub fn cascade_unmatched() -> Result<Benchmark> {
    use cascade::*;
    let model = SystemModel::new(1, Arc::new(|x: &[f64]| vec![x[0]]), Arc::new(|_: &[f64]| vec![1.0]))?
        .with_z_channel(Arc::new(|x: &[f64], z: f64| A1 * x[0] + A2 * z))?;
    let mut bounds = quadratic_iss_bounds(1.0, C / (MATCHED_ETA * RATE), RATE * (1.0 - MATCHED_ETA));
    bounds.kappa5 = Some(ClassKFunction::linear(D1).with_label("κ₅"));
    bounds.kappa6 = Some(ClassKFunction::linear(1e-9).with_label("κ₆"));
    bounds.kappa7 = Some(ClassKFunction::linear(1e-9).with_label("κ₇"));
    let unc = UncertaintyModel::new(
        1,
        Arc::new(|w: &[f64], x: &[f64]| vec![-RATE * w[0] + C * x[0]]),
        Arc::new(|w: &[f64], _: &[f64]| w[0]),
        bounds,
    )
    .with_unmatched(Arc::new(|w: &[f64], _: &[f64], _: f64| D1 * w[0]));
    let basis_u = homogeneous_basis(1, 1);
    Ok(Benchmark {
        name: "cascade_unmatched".into(),
        model,
        uncertainty: Some(unc),
        cost: CostSpec::diagonal(vec![1.0], 1.0, EPSILON)?,
        u0: Approximant::linear(basis_u.clone(), &[-2.0])?,
        region: BoxRegion::symmetric(&[2.0])?,
        w_region: Some(BoxRegion::symmetric(&[2.0])?),
        initial: InitialState {
            x: vec![1.0],
            z: Some(0.0),
            w: vec![0.5],
        },
        basis_v: homogeneous_basis(1, 2),
        basis_u,
        linear: Some((DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 1.0))),
        cascade: Some(CascadeBases {
            psi: homogeneous_basis(2, 1),
            phi: constant_basis(1),
        }),
    })
}

/// The single constant monomial on `dim` variables.
pub fn constant_basis(dim: usize) -> BasisSet {
    BasisSet::from_terms(dim, vec![crate::basis::MultiIndex(vec![0; dim])]).expect("constant term")
}

/// Shape of a speed profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedProfile {
    pub peak_count: usize,
    pub peak_time: f64,
    /// `|t_peak − t_half| / duration`, with `t_half` the time `x₁` covers
    /// half its initial offset.
    pub symmetry_index: f64,
    pub movement_duration: f64,
}

impl SpeedProfile {
    pub fn is_bell_shaped(&self) -> bool {
        self.peak_count == 1
    }
}

/// Count strict local maxima of `|x₂|` above 5% of its maximum.
pub fn speed_profile_analysis(traj: &Trajectory) -> SpeedProfile {
    let speed: Vec<f64> = traj.x.iter().map(|x| x[1].abs()).collect();
    let n = speed.len();
    let top = speed.iter().cloned().fold(0.0, f64::max);
    let thr = 0.05 * top;
    let mut peak_count = 0;
    for k in 1..n.saturating_sub(1) {
        if speed[k] > speed[k - 1] && speed[k] > speed[k + 1] && speed[k] > thr {
            peak_count += 1;
        }
    }
    let k_peak = (0..n).fold(0, |b, k| if speed[k] > speed[b] { k } else { b });
    let t0 = traj.time.first().copied().unwrap_or(0.0);
    let x10 = traj.x.first().map_or(0.0, |x| x[0]);
    let end = traj
        .time
        .iter()
        .zip(&traj.x)
        .find(|(_, x)| x[0].abs() < 0.02 * x10.abs())
        .map_or(traj.time.last().copied().unwrap_or(t0), |(t, _)| *t);
    let duration = (end - t0).min(5.0);
    let t_half = traj
        .time
        .iter()
        .zip(&traj.x)
        .find(|(_, x)| x[0].abs() <= 0.5 * x10.abs())
        .map_or(end, |(t, _)| *t);
    let peak_time = traj.time.get(k_peak).copied().unwrap_or(t0);
    SpeedProfile {
        peak_count,
        peak_time,
        symmetry_index: if duration > 0.0 {
            (peak_time - t_half).abs() / duration
        } else {
            0.0
        },
        movement_duration: duration,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostComparison {
    /// Fraction of nonzero grid points with `V_final < V₀`.
    pub reduction_fraction: f64,
    /// `max V_final / V₀` where `V₀ > 0`.
    pub max_ratio: f64,
}

pub fn cost_surface_compare(v0: &Approximant, v_final: &Approximant, grid: &[Vec<f64>]) -> CostComparison {
    let mut total = 0usize;
    let mut reduced = 0usize;
    let mut max_ratio = f64::NEG_INFINITY;
    for x in grid {
        if x.iter().all(|v| *v == 0.0) {
            continue;
        }
        let a = v0.eval_unchecked(x);
        let b = v_final.eval_unchecked(x);
        total += 1;
        if b < a {
            reduced += 1;
        }
        if a > 0.0 {
            max_ratio = max_ratio.max(b / a);
        }
    }
    CostComparison {
        reduction_fraction: if total == 0 { 0.0 } else { reduced as f64 / total as f64 },
        max_ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::spectral_abscissa;

    #[test]
    fn arm_equilibrium_and_angles() {
        for g in [ArmGravity::Restoring, ArmGravity::AsPrinted] {
            let arm = ArmModel {
                gravity_sign: g,
                ..Default::default()
            };
            let b = build_arm_system(&arm).unwrap();
            let f = b.model.drift(&[0.0, 0.0]);
            let u = b.uncertainty.as_ref().unwrap();
            let n = f.iter().chain(u.w_dynamics(&[0.0], &[0.0, 0.0]).iter()).map(|v| v * v).sum::<f64>();
            assert!(n.sqrt() <= 1e-10);
        }
        let arm = ArmModel::default();
        assert!(arm.physical_angle(-PI / 4.0).abs() < 1e-15);
        assert!((arm.shifted_angle(arm.physical_angle(0.3)) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn arm_linearization_matches_finite_differences() {
        let arm = ArmModel::default();
        let k = [0.5, 0.5];
        let jac = arm.linearization(&k);
        let full = |s: &[f64]| -> Vec<f64> {
            let x = [s[1], s[2]];
            let u = -k[0] * x[0] - k[1] * x[1];
            let f = arm.drift(&x);
            vec![arm.w_rate(s[0], &x), f[0], f[1] + (u + s[0]) / arm.inertia]
        };
        let h = 1e-6;
        for j in 0..3 {
            let mut p = [0.0; 3];
            let mut m = [0.0; 3];
            p[j] = h;
            m[j] = -h;
            let (fp, fm) = (full(&p), full(&m));
            for i in 0..3 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!((fd - jac[(i, j)]).abs() <= 1e-8 * jac[(i, j)].abs().max(1.0), "({i},{j})");
            }
        }
    }

    #[test]
    fn printed_gravity_is_unstable_under_initial_policy() {
        let printed = ArmModel {
            gravity_sign: ArmGravity::AsPrinted,
            ..Default::default()
        };
        assert!(spectral_abscissa(&printed.linearization(&[0.5, 0.5])) > 1.0);
        assert!(spectral_abscissa(&ArmModel::default().linearization(&[0.5, 0.5])) < 0.0);
    }

    #[test]
    fn arm_bounds_hold_on_box() {
        let b = build_arm_system(&ArmModel::default()).unwrap();
        let u = b.uncertainty.as_ref().unwrap();
        let xs = b.region.halton_points(300);
        let ws: Vec<Vec<f64>> = (0..=20).map(|k| vec![-1.0 + 0.1 * k as f64]).collect();
        assert!(u.audit(&ws, &xs, &[]).holds());
    }

    #[test]
    fn linear2_is_seeded_and_stabilised() {
        let a = linear2(3).unwrap();
        let b = linear2(3).unwrap();
        assert_eq!(a.linear.as_ref().unwrap().0, b.linear.as_ref().unwrap().0);
        let (am, bm) = a.linear.clone().unwrap();
        let k = DMatrix::from_row_slice(1, 2, &[-a.u0.weights()[0], -a.u0.weights()[1]]);
        assert!(spectral_abscissa(&(am - bm * k)) < 0.0);
    }

    #[test]
    fn sine_speed_profile() {
        let t_end = 2.0;
        let n = 2001;
        let time: Vec<f64> = (0..n).map(|k| k as f64 * t_end / (n - 1) as f64).collect();
        let x: Vec<Vec<f64>> = time
            .iter()
            .map(|&t| {
                let x1 = -(t_end / PI) * (1.0 + (PI * t / t_end).cos());
                vec![x1, (PI * t / t_end).sin()]
            })
            .collect();
        let traj = Trajectory {
            time,
            x,
            ..Default::default()
        };
        let p = speed_profile_analysis(&traj);
        assert_eq!(p.peak_count, 1);
        assert!(p.symmetry_index < 1e-3);
    }

    #[test]
    fn two_bumps_two_peaks() {
        let time: Vec<f64> = (0..2001).map(|k| k as f64 * 1e-3).collect();
        let x = time
            .iter()
            .map(|&t| vec![-1.0 + t / 2.0, (PI * t).sin().abs() * if t < 1.0 { 1.0 } else { 0.7 }])
            .collect();
        let traj = Trajectory {
            time,
            x,
            ..Default::default()
        };
        assert_eq!(speed_profile_analysis(&traj).peak_count, 2);
    }

    #[test]
    fn cost_comparison_examples() {
        let b = homogeneous_basis(1, 2);
        let v0 = Approximant::new(b.clone(), vec![2.0]).unwrap();
        let half = Approximant::new(b, vec![1.0]).unwrap();
        let grid: Vec<Vec<f64>> = (0..11).map(|k| vec![-1.0 + 0.2 * k as f64]).collect();
        let same = cost_surface_compare(&v0, &v0, &grid);
        assert_eq!(same.reduction_fraction, 0.0);
        let c = cost_surface_compare(&v0, &half, &grid);
        assert_eq!(c.reduction_fraction, 1.0);
        assert!((c.max_ratio - 0.5).abs() < 1e-15);
    }
}
