//! Data-driven policy iteration from a single recorded trajectory.
//!
//! Data are collected once under `u = u₀(x) + e(t)`. Every iteration then
//! rebuilds the regression from the same window, with the off-policy input
//! `v̂ᵢ = (measured composite input) − ûᵢ(x)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{Approximant, BasisSet};
use crate::dynsys::{Controller, CostSpec, Plant, Trajectory};
use crate::error::{Error, Result};
use crate::lstsq;

/// Sum of sinusoids with seeded phases.
#[derive(Debug, Clone, PartialEq)]
pub struct Exploration {
    pub amplitudes: Vec<f64>,
    /// Frequencies in Hz.
    pub frequencies: Vec<f64>,
    pub phases: Vec<f64>,
}

impl Exploration {
    pub const COMPONENTS: usize = 10;

    /// Ten components log-spaced over 0.1–10 Hz, each of amplitude
    /// `amplitude / 10`, so `|e(t)| ≤ amplitude`.
    pub fn sinusoids(amplitude: f64, seed: u64) -> Self {
        let n = Self::COMPONENTS;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frequencies: Vec<f64> = (0..n)
            .map(|k| 0.1 * 100f64.powf(k as f64 / (n - 1) as f64))
            .collect();
        let phases = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        Exploration {
            amplitudes: vec![amplitude / n as f64; n],
            frequencies,
            phases,
        }
    }

    pub fn none() -> Self {
        Exploration {
            amplitudes: Vec::new(),
            frequencies: Vec::new(),
            phases: Vec::new(),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.amplitudes
            .iter()
            .zip(&self.frequencies)
            .zip(&self.phases)
            .map(|((a, f), p)| a * (2.0 * PI * f * t + p).sin())
            .sum()
    }

    /// Upper bound on `|e(t)|`.
    pub fn peak_bound(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.abs()).sum()
    }
}

/// Dense learner-visible signals split into sampling intervals.
#[derive(Debug, Clone)]
pub struct SampleWindow {
    pub trajectory: Trajectory,
    /// Node indices of `t₀ < t₁ < … < t_l`.
    pub boundaries: Vec<usize>,
}

impl SampleWindow {
    /// Map sampling instants to the nearest grid nodes.
    pub fn from_times(trajectory: Trajectory, times: &[f64]) -> Result<Self> {
        let h = trajectory.step();
        if h <= 0.0 {
            return Err(Error::EmptyInterval { index: 0 });
        }
        let t0 = trajectory.time[0];
        let last = trajectory.len() - 1;
        let boundaries = times
            .iter()
            .map(|t| (((t - t0) / h).round().max(0.0) as usize).min(last))
            .collect();
        Self::new(trajectory, boundaries)
    }

    /// `intervals` consecutive intervals of length `interval_len` starting at
    /// the first node.
    pub fn uniform(trajectory: Trajectory, interval_len: f64, intervals: usize) -> Result<Self> {
        let times: Vec<f64> = (0..=intervals).map(|k| k as f64 * interval_len).collect();
        Self::from_times(trajectory, &times)
    }

    pub fn new(trajectory: Trajectory, boundaries: Vec<usize>) -> Result<Self> {
        for (k, b) in boundaries.windows(2).enumerate() {
            if b[1] <= b[0] || b[1] >= trajectory.len() {
                return Err(Error::EmptyInterval { index: k });
            }
        }
        Ok(SampleWindow {
            trajectory,
            boundaries,
        })
    }

    pub fn intervals(&self) -> usize {
        self.boundaries.len().saturating_sub(1)
    }

    /// Node index range of interval `k`, inclusive at both ends.
    pub fn interval(&self, k: usize) -> (usize, usize) {
        (self.boundaries[k], self.boundaries[k + 1])
    }
}

/// Composite trapezoid of `values` over nodes `a..=b`.
pub(crate) fn trapezoid(time: &[f64], values: &[f64], a: usize, b: usize) -> f64 {
    (a..b)
        .map(|i| 0.5 * (time[i + 1] - time[i]) * (values[i] + values[i + 1]))
        .sum()
}

/// Least-squares problem for one policy-iteration step.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    /// Rows `θ_kᵀ`: value-basis differences, then policy-basis integrals.
    pub theta: DMatrix<f64>,
    pub target: Vec<f64>,
    pub basis_v: BasisSet,
    pub basis_u: BasisSet,
}

impl RegressionProblem {
    pub fn rows(&self) -> usize {
        self.theta.nrows()
    }

    pub fn cols(&self) -> usize {
        self.theta.ncols()
    }
}

pub fn assemble_regression(
    window: &SampleWindow,
    basis_v: &BasisSet,
    basis_u: &BasisSet,
    policy: &Approximant,
    cost: &CostSpec,
) -> Result<RegressionProblem> {
    let traj = &window.trajectory;
    let n1 = basis_v.len();
    let n2 = basis_u.len();
    let r = cost.control_weight;
    let l = window.intervals();
    let mut theta = DMatrix::zeros(l, n1 + n2);
    let mut target = Vec::with_capacity(l);
    let first = window.boundaries.first().copied().unwrap_or(0);
    let last = window.boundaries.last().copied().unwrap_or(0);
    // per-node integrands over the covered range
    let span = last + 1 - first;
    let mut running = vec![0.0; span];
    let mut weighted: Vec<Vec<f64>> = vec![vec![0.0; span]; n2];
    for i in first..=last {
        let x = &traj.x[i];
        let u_hat = policy.evaluate(x)?;
        let v_hat = traj.x_channel[i] - u_hat;
        running[i - first] = cost.q(x) + r * u_hat * u_hat;
        for (j, phi) in basis_u.eval(x)?.into_iter().enumerate() {
            weighted[j][i - first] = 2.0 * r * phi * v_hat;
        }
    }
    let time = &traj.time[first..=last];
    for k in 0..l {
        let (a, b) = window.interval(k);
        let start = basis_v.eval(&traj.x[a])?;
        let end = basis_v.eval(&traj.x[b])?;
        for j in 0..n1 {
            theta[(k, j)] = end[j] - start[j];
        }
        for j in 0..n2 {
            theta[(k, n1 + j)] = trapezoid(time, &weighted[j], a - first, b - first);
        }
        target.push(-trapezoid(time, &running, a - first, b - first));
    }
    Ok(RegressionProblem {
        theta,
        target,
        basis_v: basis_v.clone(),
        basis_u: basis_u.clone(),
    })
}

/// Solution of one step.
#[derive(Debug, Clone)]
pub struct PiStep {
    pub value: Approximant,
    pub next_policy: Approximant,
    pub residuals: Vec<f64>,
    pub residual_rms: f64,
    /// Smallest eigenvalue of `(1/l)ΘᵀΘ`.
    pub min_singular_value: f64,
    /// `λ_min/λ_max` of `(1/l)ΘᵀΘ` after column equilibration.
    pub pe_ratio: f64,
}

/// Solve without the excitation check.
pub fn solve_unchecked(problem: &RegressionProblem) -> Result<PiStep> {
    let n1 = problem.basis_v.len();
    let ls = lstsq::solve(&problem.theta, &problem.target);
    let value = Approximant::new(problem.basis_v.clone(), ls.solution[..n1].to_vec())?;
    let next_policy = Approximant::new(problem.basis_u.clone(), ls.solution[n1..].to_vec())?;
    Ok(PiStep {
        value,
        next_policy,
        pe_ratio: ls.excitation_ratio(),
        min_singular_value: ls.raw_min_eigenvalue,
        residual_rms: ls.residual_rms,
        residuals: ls.residuals,
    })
}

/// Least-squares solve with the relative excitation check `ratio ≥ delta`.
pub fn solve_pi_step(problem: &RegressionProblem, delta: f64) -> Result<PiStep> {
    if problem.rows() < problem.cols() {
        return Err(Error::PEViolation {
            ratio: 0.0,
            threshold: delta,
        });
    }
    let step = solve_unchecked(problem)?;
    if !(step.pe_ratio >= delta) {
        return Err(Error::PEViolation {
            ratio: step.pe_ratio,
            threshold: delta,
        });
    }
    Ok(step)
}

#[derive(Debug, Clone)]
pub struct OnlinePiConfig {
    pub interval_len: f64,
    /// Number of intervals; `None` means four per unknown.
    pub intervals: Option<usize>,
    pub delta: f64,
    /// Relative weight-change stopping threshold.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OnlinePiConfig {
    fn default() -> Self {
        OnlinePiConfig {
            interval_len: 0.1,
            intervals: None,
            delta: 1e-6,
            tol: 1e-6,
            max_iter: 20,
        }
    }
}

impl OnlinePiConfig {
    pub fn intervals_for(&self, unknowns: usize) -> usize {
        self.intervals.unwrap_or(4 * unknowns)
    }
}

#[derive(Debug, Clone)]
pub struct OnlineIteration {
    pub iteration: usize,
    /// `ûᵢ`.
    pub policy: Approximant,
    /// `V̂ᵢ`.
    pub value: Approximant,
    /// `ûᵢ₊₁`.
    pub next_policy: Approximant,
    pub residual_rms: f64,
    pub min_singular_value: f64,
    pub pe_ratio: f64,
    /// Relative change of the stacked weights against the previous step.
    pub weight_change: f64,
}

#[derive(Debug, Clone)]
pub struct OnlineRun {
    pub iterations: Vec<OnlineIteration>,
    pub window: SampleWindow,
    pub converged: bool,
}

impl OnlineRun {
    pub fn last(&self) -> &OnlineIteration {
        self.iterations.last().expect("at least one iteration")
    }

    /// Index of the iteration that met the stopping rule.
    pub fn converged_at(&self) -> Option<usize> {
        self.converged.then(|| self.last().iteration)
    }
}

fn stacked(step: &PiStep) -> Vec<f64> {
    let mut v = step.value.weights().to_vec();
    v.extend_from_slice(step.next_policy.weights());
    v
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Iterate on a fixed data window starting from the policy `u0` that
/// generated it.
pub fn iterate_on_window(
    window: SampleWindow,
    u0: &Approximant,
    basis_v: &BasisSet,
    basis_u: &BasisSet,
    cost: &CostSpec,
    cfg: &OnlinePiConfig,
) -> Result<OnlineRun> {
    let mut iterations: Vec<OnlineIteration> = Vec::new();
    let mut policy = u0.clone();
    let mut prev: Option<Vec<f64>> = None;
    let mut converged = false;
    for i in 0..cfg.max_iter {
        let problem = assemble_regression(&window, basis_v, basis_u, &policy, cost)?;
        let step = solve_pi_step(&problem, cfg.delta)?;
        let w = stacked(&step);
        let weight_change = match &prev {
            Some(p) => {
                let d: Vec<f64> = w.iter().zip(p).map(|(a, b)| a - b).collect();
                norm(&d) / norm(p).max(1e-12)
            }
            None => f64::INFINITY,
        };
        iterations.push(OnlineIteration {
            iteration: i,
            policy: policy.clone(),
            value: step.value,
            next_policy: step.next_policy.clone(),
            residual_rms: step.residual_rms,
            min_singular_value: step.min_singular_value,
            pe_ratio: step.pe_ratio,
            weight_change,
        });
        if weight_change < cfg.tol {
            converged = true;
            break;
        }
        prev = Some(w);
        policy = step.next_policy;
    }
    Ok(OnlineRun {
        iterations,
        window,
        converged,
    })
}

/// Record `intervals · interval_len` seconds under `controller`.
pub fn collect_window(
    plant: &mut dyn Plant,
    controller: &dyn Controller,
    interval_len: f64,
    intervals: usize,
) -> Result<SampleWindow> {
    let traj = plant.run(controller, interval_len * intervals as f64)?;
    SampleWindow::uniform(traj, interval_len, intervals)
}

/// Collect once under `u₀ + e`, then iterate on the recorded window.
pub fn run_online_pi(
    plant: &mut dyn Plant,
    u0: &Approximant,
    exploration: &Exploration,
    basis_v: &BasisSet,
    basis_u: &BasisSet,
    cost: &CostSpec,
    cfg: &OnlinePiConfig,
) -> Result<OnlineRun> {
    let l = cfg.intervals_for(basis_v.len() + basis_u.len());
    let controller = |x: &[f64], _: Option<f64>, t: f64| u0.eval_unchecked(x) + exploration.eval(t);
    let window = collect_window(plant, &controller, cfg.interval_len, l)?;
    iterate_on_window(window, u0, basis_v, basis_u, cost, cfg)
}

/// One entry of a basis-size schedule.
#[derive(Debug, Clone)]
pub struct BasisPair {
    pub value: BasisSet,
    pub policy: BasisSet,
}

impl BasisPair {
    pub fn size(&self) -> usize {
        self.value.len() + self.policy.len()
    }
}

#[derive(Debug, Clone)]
pub struct TwoLoopResult {
    pub run: OnlineRun,
    pub stage: usize,
    pub n_value: usize,
    pub n_policy: usize,
    /// Final residual of every stage tried.
    pub stage_residuals: Vec<f64>,
}

/// Outer loop: enlarge the bases until the final residual drops to
/// `threshold`. Data are recollected for every stage.
#[allow(clippy::too_many_arguments)]
pub fn two_loop_optimize(
    plant: &mut dyn Plant,
    u0: &Approximant,
    exploration: &Exploration,
    cost: &CostSpec,
    threshold: f64,
    schedule: &[BasisPair],
    cfg: &OnlinePiConfig,
) -> Result<TwoLoopResult> {
    if schedule.windows(2).any(|p| p[1].size() <= p[0].size()) {
        return Err(Error::InvalidArgument(
            "basis schedule must grow strictly".into(),
        ));
    }
    let mut best = f64::INFINITY;
    let mut stage_residuals = Vec::new();
    for (stage, pair) in schedule.iter().enumerate() {
        let run = run_online_pi(plant, u0, exploration, &pair.value, &pair.policy, cost, cfg)?;
        let res = run.last().residual_rms;
        stage_residuals.push(res);
        best = best.min(res);
        if res <= threshold {
            return Ok(TwoLoopResult {
                run,
                stage,
                n_value: pair.value.len(),
                n_policy: pair.policy.len(),
                stage_residuals,
            });
        }
    }
    Err(Error::ScheduleExhausted {
        best_residual: best,
        threshold,
    })
}

/// First-step residual of every schedule entry on one fixed window.
pub fn residual_profile(
    window: &SampleWindow,
    u0: &Approximant,
    schedule: &[BasisPair],
    cost: &CostSpec,
) -> Result<Vec<f64>> {
    schedule
        .iter()
        .map(|p| {
            let prob = assemble_regression(window, &p.value, &p.policy, u0, cost)?;
            Ok(solve_unchecked(&prob)?.residual_rms)
        })
        .collect()
}
