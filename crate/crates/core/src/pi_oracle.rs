//! Model-based policy iteration by least-squares collocation.
//!
//! With `f` and `g` known, policy evaluation solves
//! `∇V_i·(f + g·u_i) + Q + r·u_i² = 0` on a grid and policy improvement sets
//! `u_{i+1} = −(1/2r)·gᵀ∇V_iᵀ`. This is the ground truth the data-driven
//! learner is checked against.

use nalgebra::DMatrix;

use crate::basis::{Approximant, BasisSet};
use crate::dynsys::{integrate, CostSpec, InitialState, SimOptions, SystemModel};
use crate::error::{Error, Result};
use crate::lstsq;
use crate::sampling::BoxRegion;

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub max_iter: usize,
    /// Stop when the grid sup-norm of `V_{i+1} − V_i` falls below this.
    pub tol: f64,
    /// Minimum `σ_min/σ_max` of the equilibrated collocation matrix.
    pub rank_tol: f64,
    pub probe_horizon: f64,
    pub probe_ball: f64,
    pub probe_count: usize,
    pub probe_step: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            max_iter: 20,
            tol: 1e-8,
            rank_tol: 1e-10,
            probe_horizon: 20.0,
            probe_ball: 1e-3,
            probe_count: 8,
            probe_step: 1e-3,
        }
    }
}

/// One policy-iteration step: the evaluated policy `u_i`, its value `V_i`
/// and the improved policy `u_{i+1}`.
#[derive(Debug, Clone)]
pub struct PIState {
    pub iteration: usize,
    pub policy: Approximant,
    pub value: Approximant,
    pub next_policy: Approximant,
    /// RMS residual of the policy-evaluation equation on the grid.
    pub collocation_residual: f64,
    /// RMS residual of projecting `−(1/2r)gᵀ∇V` onto the policy basis.
    pub projection_residual: f64,
    /// RMS of the HJB residual `∇V f + Q − (∇V g)²/(4r)` on the grid.
    pub hjb_residual: f64,
    /// Grid sup-norm of `V_i − V_{i−1}` (∞ for the first step).
    pub value_change: f64,
}

/// Deterministic collocation grid: Halton points in `region`, at least four
/// per basis function.
pub fn collocation_grid(region: &BoxRegion, basis_size: usize) -> Vec<Vec<f64>> {
    region.halton_points((10 * basis_size).max(64))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_grid(grid: &[Vec<f64>], basis: &BasisSet) -> Result<()> {
    if grid.len() < basis.len() {
        return Err(Error::RankDeficient {
            ratio: 0.0,
            tolerance: 0.0,
        });
    }
    if let Some(p) = grid.iter().find(|p| p.len() != basis.dim()) {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: p.len(),
        });
    }
    Ok(())
}

fn solve_checked(a: &DMatrix<f64>, b: &[f64], rank_tol: f64) -> Result<lstsq::LeastSquares> {
    let ls = lstsq::solve(a, b);
    let sv = &ls.scaled_singular_values;
    let ratio = match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    };
    if ratio < rank_tol {
        return Err(Error::RankDeficient {
            ratio,
            tolerance: rank_tol,
        });
    }
    Ok(ls)
}

/// Simulate `ẋ = f + g·u` from grid-sampled initial conditions and require
/// convergence into the `probe_ball`.
pub fn probe_admissibility(
    model: &SystemModel,
    policy: &Approximant,
    grid: &[Vec<f64>],
    cfg: &OracleConfig,
) -> Result<()> {
    let x_model = model.x_subsystem();
    let count = cfg.probe_count.min(grid.len()).max(1);
    let stride = (grid.len() / count).max(1);
    let controller = |x: &[f64], _: Option<f64>, _: f64| policy.eval_unchecked(x);
    for x0 in grid.iter().step_by(stride).take(count) {
        let rec = integrate(
            &x_model,
            None,
            &controller,
            &InitialState::plain(x0.clone()),
            cfg.probe_horizon,
            cfg.probe_step,
            SimOptions::default(),
        )
        .map_err(|e| Error::InadmissiblePolicy(format!("probe from {x0:?}: {e}")))?;
        let end = rec.trajectory.final_x();
        let nrm = end.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(nrm <= cfg.probe_ball) {
            return Err(Error::InadmissiblePolicy(format!(
                "probe from {x0:?} ended at |x| = {nrm:e} after {} s",
                cfg.probe_horizon
            )));
        }
    }
    Ok(())
}

/// Least-squares collocation of the policy-evaluation equation.
pub fn policy_evaluation_collocation(
    model: &SystemModel,
    cost: &CostSpec,
    policy: &Approximant,
    basis_v: &BasisSet,
    grid: &[Vec<f64>],
    cfg: &OracleConfig,
) -> Result<(Approximant, f64)> {
    check_grid(grid, basis_v)?;
    let r = cost.control_weight;
    let mut a = DMatrix::zeros(grid.len(), basis_v.len());
    let mut b = Vec::with_capacity(grid.len());
    for (k, x) in grid.iter().enumerate() {
        let u = policy.evaluate(x)?;
        let f = model.drift(x);
        let g = model.input_gain(x);
        let closed: Vec<f64> = f.iter().zip(&g).map(|(fi, gi)| fi + gi * u).collect();
        for (j, grad) in basis_v.jacobian(x)?.iter().enumerate() {
            a[(k, j)] = dot(grad, &closed);
        }
        b.push(-cost.q(x) - r * u * u);
    }
    let ls = solve_checked(&a, &b, cfg.rank_tol)?;
    Ok((Approximant::new(basis_v.clone(), ls.solution)?, ls.residual_rms))
}

/// `u_{i+1} = −(1/2r)·gᵀ∇V` projected onto `basis_u` over the grid.
pub fn policy_improvement(
    model: &SystemModel,
    cost: &CostSpec,
    value: &Approximant,
    basis_u: &BasisSet,
    grid: &[Vec<f64>],
    cfg: &OracleConfig,
) -> Result<(Approximant, f64)> {
    check_grid(grid, basis_u)?;
    let r = cost.control_weight;
    let mut a = DMatrix::zeros(grid.len(), basis_u.len());
    let mut b = Vec::with_capacity(grid.len());
    for (k, x) in grid.iter().enumerate() {
        for (j, v) in basis_u.eval(x)?.into_iter().enumerate() {
            a[(k, j)] = v;
        }
        let grad = value.gradient(x)?;
        b.push(-dot(&model.input_gain(x), &grad) / (2.0 * r));
    }
    let ls = solve_checked(&a, &b, cfg.rank_tol)?;
    Ok((Approximant::new(basis_u.clone(), ls.solution)?, ls.residual_rms))
}

/// RMS over the grid of `∇V f + Q − (∇V g)²/(4r)`.
pub fn hjb_residual(model: &SystemModel, cost: &CostSpec, value: &Approximant, grid: &[Vec<f64>]) -> f64 {
    let r = cost.control_weight;
    let s: f64 = grid
        .iter()
        .map(|x| {
            let grad = value.gradient_unchecked(x);
            let vg = dot(&grad, &model.input_gain(x));
            let res = dot(&grad, &model.drift(x)) + cost.q(x) - vg * vg / (4.0 * r);
            res * res
        })
        .sum();
    (s / grid.len().max(1) as f64).sqrt()
}

/// Sup-norm of `a − b` over the grid.
pub fn grid_sup_diff(a: &Approximant, b: &Approximant, grid: &[Vec<f64>]) -> f64 {
    grid.iter()
        .map(|x| (a.eval_unchecked(x) - b.eval_unchecked(x)).abs())
        .fold(0.0, f64::max)
}

/// Policy iteration from an admissible `u0` until the value change on the
/// grid drops below `cfg.tol` or `cfg.max_iter` steps were taken.
pub fn run_policy_iteration(
    model: &SystemModel,
    cost: &CostSpec,
    u0: &Approximant,
    basis_v: &BasisSet,
    basis_u: &BasisSet,
    grid: &[Vec<f64>],
    cfg: &OracleConfig,
) -> Result<Vec<PIState>> {
    let mut states: Vec<PIState> = Vec::new();
    let mut policy = u0.clone();
    for i in 0..cfg.max_iter {
        probe_admissibility(model, &policy, grid, cfg)?;
        let (value, collocation_residual) =
            policy_evaluation_collocation(model, cost, &policy, basis_v, grid, cfg)?;
        let (next_policy, projection_residual) =
            policy_improvement(model, cost, &value, basis_u, grid, cfg)?;
        let value_change = states
            .last()
            .map_or(f64::INFINITY, |prev| grid_sup_diff(&value, &prev.value, grid));
        let hjb = hjb_residual(model, cost, &value, grid);
        states.push(PIState {
            iteration: i,
            policy: policy.clone(),
            value,
            next_policy: next_policy.clone(),
            collocation_residual,
            projection_residual,
            hjb_residual: hjb,
            value_change,
        });
        if value_change < cfg.tol {
            break;
        }
        policy = next_policy;
    }
    Ok(states)
}
