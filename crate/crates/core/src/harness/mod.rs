//! End-to-end learning runs: configuration, orchestration, artifacts, CLI.

pub mod cli;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::backstep::{
    cascade_truth, check_small_gain_unmatched, estimate_roa_unmatched, kappa8_envelope, phase_one_learn,
    phase_two, redesign_error_unmatched, u_ro1, unmatched_gains, unmatched_sigma, BacksteppedController,
    BacksteppedState, PhaseOneConfig, PhaseTwoConfig, PhaseTwoSolution, UnmatchedTruth,
};
use crate::basis::{make_polynomial_basis, Approximant};
use crate::dynsys::{Controller, InitialState, SimulatedPlant, SimulationRecord};
use crate::error::{Error, Result};
use crate::experiments::{cost_surface_compare, speed_profile_analysis, Benchmark, CostComparison, SpeedProfile};
use crate::online_pi::{
    run_online_pi, two_loop_optimize, BasisPair, Exploration, OnlineIteration, OnlinePiConfig,
    SampleWindow,
};
use crate::pi_oracle::{collocation_grid, run_policy_iteration, OracleConfig, PIState};
use crate::robust::{
    certify_level, check_small_gain_matched, gamma1_from_rho, gamma_from_rho, matched_sigma, quadratic_sandwich,
    redesign_error, region_samples, robust_redesign, select_constant_rho, ClassKFunction, LevelCertificate,
    RoaEstimate, Rho, RobustPolicy, SmallGainReport,
};
use crate::sampling::BoxRegion;

pub use config::{Overrides, RunConfig};

/// Compact set used for approximation, from probe simulations.
#[derive(Debug, Clone)]
pub struct InvariantSet {
    /// Box over `x`, inflated by 10%.
    pub region: BoxRegion,
    /// Box over `(x, z)` on cascade plants.
    pub augmented: Option<BoxRegion>,
    /// Some axis has zero width; too thin to excite anything.
    pub degenerate: bool,
}

/// Bounding box (inflated 10%) of probe runs under `u = u₀ + e` from the
/// benchmark initial state scaled by each entry of `scales`.
pub fn select_invariant_set(
    bench: &Benchmark,
    exploration: &Exploration,
    scales: &[f64],
    horizon: f64,
    step: f64,
    tracking_gain: f64,
) -> Result<InvariantSet> {
    let cascade = bench.model.has_z_channel();
    let u0 = &bench.u0;
    let plain = |x: &[f64], _: Option<f64>, t: f64| u0.eval_unchecked(x) + exploration.eval(t);
    let tracking = |x: &[f64], z: Option<f64>, t: f64| {
        -tracking_gain * (z.unwrap_or(0.0) - u0.eval_unchecked(x) - exploration.eval(t))
    };
    let controller: &dyn Controller = if cascade { &tracking } else { &plain };
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut xzs: Vec<Vec<f64>> = Vec::new();
    let scales = if scales.is_empty() { &[1.0][..] } else { scales };
    for &c in scales {
        let init = InitialState {
            x: bench.initial.x.iter().map(|v| c * v).collect(),
            z: bench.initial.z.map(|v| c * v),
            w: bench.initial.w.iter().map(|v| c * v).collect(),
        };
        let plant = SimulatedPlant::new(bench.model.clone(), bench.uncertainty.clone(), init, step);
        let rec = plant.simulate(controller, horizon)?;
        let tr = rec.trajectory;
        for (k, x) in tr.x.iter().enumerate() {
            xs.push(x.clone());
            if let Some(z) = &tr.z {
                let mut v = x.clone();
                v.push(z[k]);
                xzs.push(v);
            }
        }
    }
    let region = BoxRegion::bounding(&xs)?.inflate(0.1);
    let augmented = if cascade {
        Some(BoxRegion::bounding(&xzs)?.inflate(0.1))
    } else {
        None
    };
    let degenerate = !region.is_nondegenerate();
    Ok(InvariantSet {
        region,
        augmented,
        degenerate,
    })
}

/// Membership audit of the learning-phase samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StateAudit {
    pub samples: usize,
    /// Samples outside the probe-selected set.
    pub outside_selected: usize,
    /// Samples outside the declared operating boxes (x and w).
    pub outside_declared: usize,
    pub max_abs_x: Vec<f64>,
    pub max_abs_w: Vec<f64>,
}

impl StateAudit {
    pub fn within_declared(&self) -> bool {
        self.outside_declared == 0
    }
}

pub fn audit_states(rec: &SimulationRecord, selected: &BoxRegion, declared: &BoxRegion, w_box: Option<&BoxRegion>) -> StateAudit {
    let tr = &rec.trajectory;
    let n = declared.dim();
    let mut a = StateAudit {
        samples: tr.len(),
        max_abs_x: vec![0.0; n],
        max_abs_w: vec![0.0; rec.w.first().map_or(0, Vec::len)],
        ..Default::default()
    };
    for (k, x) in tr.x.iter().enumerate() {
        for (m, v) in a.max_abs_x.iter_mut().zip(x) {
            *m = m.max(v.abs());
        }
        let w = rec.w.get(k).map(Vec::as_slice).unwrap_or(&[]);
        for (m, v) in a.max_abs_w.iter_mut().zip(w) {
            *m = m.max(v.abs());
        }
        if !selected.contains(x) {
            a.outside_selected += 1;
        }
        let w_ok = match w_box {
            Some(b) if !w.is_empty() => b.contains(w),
            _ => true,
        };
        if !declared.contains(x) || !w_ok {
            a.outside_declared += 1;
        }
    }
    a
}

/// Robustness certificate of a run.
#[derive(Debug, Clone)]
pub struct Certification {
    pub rho: Rho,
    pub epsilon: f64,
    pub report: SmallGainReport,
    pub level: LevelCertificate,
    pub roa: RoaEstimate,
    /// `a, b` with `a|X|² ≤ V(X) ≤ b|X|²` on the certification box.
    pub alpha: (f64, f64),
    /// Oracle iterate index used for `u_i`, `u_{i+1}`.
    pub oracle_index: usize,
    /// Box on which the level set was certified.
    pub region: BoxRegion,
}

/// The policy applied after learning.
#[derive(Debug, Clone)]
pub enum FinalPolicy {
    Learned(Approximant),
    Robust(RobustPolicy),
    Backstepped(BacksteppedController),
}

impl Controller for FinalPolicy {
    fn control(&self, x: &[f64], z: Option<f64>, t: f64) -> f64 {
        match self {
            FinalPolicy::Learned(a) => a.eval_unchecked(x),
            FinalPolicy::Robust(p) => p.control(x, z, t),
            FinalPolicy::Backstepped(c) => c.control(x, z, t),
        }
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct LearningRun {
    pub config: RunConfig,
    pub benchmark: String,
    pub iterations: Vec<OnlineIteration>,
    pub converged_at: Option<usize>,
    pub window: SampleWindow,
    /// Learning-phase record including the hidden state.
    pub learning: SimulationRecord,
    pub phase_two_record: Option<SimulationRecord>,
    pub phase_two: Option<PhaseTwoSolution>,
    pub invariant_set: InvariantSet,
    pub audit: StateAudit,
    pub certification: Option<Certification>,
    pub final_policy: FinalPolicy,
    pub post: SimulationRecord,
    pub speed_profile: Option<SpeedProfile>,
    pub cost_comparison: CostComparison,
    /// Region of the value-surface grid.
    pub region: BoxRegion,
    /// Two-loop stage residuals when a schedule was given.
    pub stage_residuals: Vec<f64>,
    pub log: Vec<String>,
}

impl LearningRun {
    pub fn final_value(&self) -> &Approximant {
        &self.iterations.last().expect("nonempty").value
    }

    pub fn final_policy_weights(&self) -> &Approximant {
        &self.iterations.last().expect("nonempty").next_policy
    }
}

fn online_cfg(cfg: &RunConfig) -> OnlinePiConfig {
    OnlinePiConfig {
        interval_len: cfg.learning.interval_len,
        intervals: cfg.learning.intervals,
        delta: cfg.learning.delta,
        tol: cfg.learning.tol,
        max_iter: cfg.learning.max_iter,
    }
}

fn rho_ladder(cfg: &RunConfig) -> Vec<f64> {
    let r = &cfg.robust;
    let n = (r.rho_max / r.rho_step).floor() as usize;
    (1..=n).map(|k| r.rho_step * k as f64).collect()
}

fn quadratic(a: f64, label: &str) -> ClassKFunction {
    ClassKFunction::power(a, 2.0).with_label(label)
}

/// Model-based policy iterates from `u₀`, at least `index + 1` of them when
/// the oracle has not converged earlier.
pub fn oracle_iterates(bench: &Benchmark, index: usize) -> Result<Vec<PIState>> {
    let grid = collocation_grid(&bench.region, bench.basis_v.len());
    let cfg = OracleConfig {
        max_iter: index + 1,
        ..OracleConfig::default()
    };
    run_policy_iteration(&bench.model, &bench.cost, &bench.u0, &bench.basis_v, &bench.basis_u, &grid, &cfg)
}

/// Sandwich constants of `V` on the operating box.
pub fn value_sandwich(value: &Approximant, region: &BoxRegion) -> Result<(f64, f64)> {
    let v = |x: &[f64]| value.eval_unchecked(x);
    quadratic_sandwich(&v, &region_samples(region, 64, 20, 400))
}

/// Gain check for the matched case: the configured `ρ`, or the smallest one
/// on the ladder reaching the relative margin.
pub fn matched_gain_check(bench: &Benchmark, value: &Approximant, cfg: &RunConfig) -> Result<(Rho, SmallGainReport, (f64, f64))> {
    let unc = bench
        .uncertainty
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("benchmark has no uncertainty to certify against".into()))?;
    let b = unc.bounds();
    let (a_lo, a_hi) = value_sandwich(value, &bench.region)?;
    let (al, ah) = (quadratic(a_lo, "α̲"), quadratic(a_hi, "ᾱ"));
    let eps = bench.cost.margin;
    let s_max = bench.region.max_norm();
    let samples = cfg.robust.ladder_samples;
    let check = |_: &Rho, gamma: &ClassKFunction| {
        check_small_gain_matched(gamma, &b.kappa1, &b.kappa2, &b.kappa3, &b.lambda_lo, &al, &ah, s_max, samples)
    };
    let (rho, report) = match cfg.robust.rho {
        Some(c) => {
            let rho = Rho::constant(c)?;
            let g = gamma_from_rho(&rho, eps)?;
            let rep = check(&rho, &g)?;
            (rho, rep)
        }
        None => select_constant_rho(&rho_ladder(cfg), eps, cfg.robust.min_relative_margin, check)?,
    };
    Ok((rho, report, (a_lo, a_hi)))
}

/// `(x, ζ)` box: the x box with `|ζ| ≤` its largest half-width.
pub fn augmented_box(region: &BoxRegion) -> BoxRegion {
    let h = region.lo.iter().chain(&region.hi).map(|v| v.abs()).fold(0.0, f64::max);
    let mut lo = region.lo.clone();
    let mut hi = region.hi.clone();
    lo.push(-h);
    hi.push(h);
    BoxRegion { lo, hi }
}

/// Gain check for the cascade: `κ₈` is recomputed for every candidate `ρ`.
pub fn unmatched_gain_check(
    bench: &Benchmark,
    value: &Approximant,
    policy: &Approximant,
    cfg: &RunConfig,
) -> Result<(Rho, SmallGainReport, (f64, f64))> {
    let unc = bench
        .uncertainty
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("benchmark has no uncertainty to certify against".into()))?;
    let b = unc.bounds().clone();
    let x1_box = augmented_box(&bench.region);
    let n = bench.model.n();
    let u = |x1: &[f64]| value.eval_unchecked(&x1[..n]) + 0.5 * x1[n] * x1[n];
    let (a_lo, a_hi) = quadratic_sandwich(&u, &region_samples(&x1_box, 64, 20, 400))?;
    let (al, ah) = (quadratic(a_lo, "α̲₁"), quadratic(a_hi, "ᾱ₁"));
    let eps = bench.cost.margin;
    let r = bench.cost.control_weight;
    let s_max = x1_box.max_norm();
    let samples = cfg.robust.ladder_samples;
    let check = |rho: &Rho, _: &ClassKFunction| {
        let xi = robust_redesign(policy, rho, r)?;
        let k8 = kappa8_envelope(&xi, n, s_max, 100)?;
        let (k1t, k2t) = unmatched_gains(&b, &k8)?;
        let g1 = gamma1_from_rho(rho, eps)?;
        check_small_gain_unmatched(&g1, &k1t, &k2t, &b.kappa3, &b.lambda_lo, &al, &ah, s_max, samples)
    };
    let (rho, report) = match cfg.robust.rho {
        Some(c) => {
            let rho = Rho::constant(c)?;
            let rep = check(&rho, &gamma_from_rho(&rho, eps)?)?;
            (rho, rep)
        }
        None => select_constant_rho(&rho_ladder(cfg), eps, cfg.robust.min_relative_margin, check)?,
    };
    Ok((rho, report, (a_lo, a_hi)))
}

fn certify_matched(
    bench: &Benchmark,
    last: &OnlineIteration,
    cfg: &RunConfig,
    log: &mut Vec<String>,
) -> Result<(Certification, RobustPolicy)> {
    let unc = bench.uncertainty.as_ref().expect("checked by caller");
    let b = unc.bounds();
    let r = bench.cost.control_weight;
    let eps = bench.cost.margin;
    let (rho, report, alpha) = matched_gain_check(bench, &last.value, cfg)?;
    log.push(format!(
        "small-gain: rho = {} holds = {} margin = {} relative_margin = {}",
        rho.label(),
        report.holds,
        report.margin,
        report.relative_margin
    ));
    let oracle = oracle_iterates(bench, last.iteration)?;
    let idx = last.iteration.min(oracle.len() - 1);
    let st = &oracle[idx];
    let u_hat = &last.next_policy;
    let u_ro = robust_redesign(u_hat, &rho, r)?;
    let e = redesign_error(u_hat, &st.policy, &st.next_policy, &rho, r);
    let gamma = gamma_from_rho(&rho, eps)?;
    let v = last.value.clone();
    let level = certify_level(&|x: &[f64]| v.eval_unchecked(x), &e, &gamma, &bench.region, cfg.robust.level_ladder)?;
    let (al, ah) = (quadratic(alpha.0, "α̲"), quadratic(alpha.1, "ᾱ"));
    let sigma = matched_sigma(&gamma, &b.kappa1, &b.kappa3, &b.lambda_lo, &al, &ah, 10.0 * level.d_cap.max(1.0))?;
    let vf = last.value.clone();
    let roa = crate::robust::estimate_roa_matched(
        Arc::new(move |x: &[f64]| vf.eval_unchecked(x)),
        b.lyapunov.clone(),
        level.d,
        &sigma,
    )?;
    log.push(format!(
        "level: d = {} d_cap = {} d_violation = {} worst_ratio = {} sigma(d) = {} oracle_index = {idx}",
        level.d,
        level.d_cap,
        level.d_violation,
        level.worst_ratio,
        roa.level()
    ));
    Ok((
        Certification {
            rho,
            epsilon: eps,
            report,
            level,
            roa,
            alpha,
            oracle_index: idx,
            region: bench.region.clone(),
        },
        u_ro,
    ))
}

struct CascadeOutcome {
    certification: Certification,
    controller: BacksteppedController,
    solution: PhaseTwoSolution,
    record: SimulationRecord,
}

fn certify_cascade(
    bench: &Benchmark,
    last: &OnlineIteration,
    cfg: &RunConfig,
    log: &mut Vec<String>,
) -> Result<CascadeOutcome> {
    let unc = bench.uncertainty.as_ref().expect("checked by caller");
    let b = unc.bounds().clone();
    let r = bench.cost.control_weight;
    let eps = bench.cost.margin;
    let n = bench.model.n();
    let (rho, report, alpha) = unmatched_gain_check(bench, &last.value, &last.next_policy, cfg)?;
    log.push(format!(
        "small-gain (unmatched): rho = {} holds = {} margin = {} relative_margin = {}",
        rho.label(),
        report.holds,
        report.margin,
        report.relative_margin
    ));
    let xi = robust_redesign(&last.next_policy, &rho, r)?;
    let state = BacksteppedState::new(xi.clone(), last.value.clone())?;

    let p2 = cfg.phase_two.clone().unwrap_or_default();
    let bases = bench
        .cascade
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("cascade benchmark without phase-two bases".into()))?;
    let mut plant = SimulatedPlant::new(bench.model.clone(), bench.uncertainty.clone(), bench.initial.clone(), cfg.simulation.step);
    let (solution, _) = phase_two(
        &mut plant,
        &state,
        &Exploration::sinusoids(p2.amplitude, p2.seed),
        &bases.psi,
        &bases.phi,
        &PhaseTwoConfig {
            interval_len: p2.interval_len,
            intervals: p2.intervals,
            delta: cfg.learning.delta,
            feedback_gain: p2.feedback_gain,
        },
    )?;
    let record = plant.hidden_records().last().cloned().unwrap_or_default();
    log.push(format!(
        "phase two: residual_rms = {} min_singular_value = {} pe_ratio = {}",
        solution.residual_rms, solution.min_singular_value, solution.pe_ratio
    ));
    let controller = u_ro1(&state, &solution.f1, &solution.g1, &last.next_policy, &rho, eps, r)?;

    let oracle = oracle_iterates(bench, last.iteration)?;
    let idx = last.iteration.min(oracle.len() - 1);
    let st = &oracle[idx];
    let (fbar1, gbar1) = cascade_truth(&bench.model, &xi)?;
    let truth = UnmatchedTruth {
        fbar1,
        gbar1,
        u_next: st.next_policy.clone(),
    };
    let e1 = redesign_error_unmatched(&controller, &truth);
    let e0 = redesign_error(&last.next_policy, &st.policy, &st.next_policy, &rho, r);
    let err = move |x1: &[f64]| e1(x1).abs().max(e0(&x1[..n]).abs());
    let gamma1 = gamma1_from_rho(&rho, eps)?;
    let x1_box = augmented_box(&bench.region);
    let s2 = state.clone();
    let level = certify_level(&move |x1: &[f64]| s2.composite_value(x1), &err, &gamma1, &x1_box, cfg.robust.level_ladder)?;
    let k8 = kappa8_envelope(&xi, n, x1_box.max_norm(), 100)?;
    let (k1t, _) = unmatched_gains(&b, &k8)?;
    let (al, ah) = (quadratic(alpha.0, "α̲₁"), quadratic(alpha.1, "ᾱ₁"));
    let sigma = unmatched_sigma(&gamma1, &k1t, &b.kappa3, &b.lambda_lo, &al, &ah, 10.0 * level.d_cap.max(1.0))?;
    let roa = estimate_roa_unmatched(state.composite_field(), b.lyapunov.clone(), level.d, &sigma)?;
    log.push(format!(
        "level: d1 = {} d_cap = {} d_violation = {} worst_ratio = {} sigma1(d1) = {} oracle_index = {idx}",
        level.d,
        level.d_cap,
        level.d_violation,
        level.worst_ratio,
        roa.level()
    ));
    Ok(CascadeOutcome {
        certification: Certification {
            rho,
            epsilon: eps,
            report,
            level,
            roa,
            alpha,
            oracle_index: idx,
            region: x1_box,
        },
        controller,
        solution,
        record,
    })
}

/// Algorithm 1: explore under `u₀ + e`, learn, redesign, then apply the
/// final policy with exploration switched off.
pub fn run_algorithm_1(config: &RunConfig) -> Result<LearningRun> {
    let mut log = Vec::new();
    run_logged(config, &mut log)
}

fn run_logged(config: &RunConfig, log: &mut Vec<String>) -> Result<LearningRun> {
    config.validate()?;
    let bench = config.benchmark()?;
    let step = config.simulation.step;
    let cascade = bench.model.has_z_channel();
    let exploration = Exploration::sinusoids(config.exploration.amplitude, config.exploration.seed);
    let ocfg = online_cfg(config);
    log.push(format!(
        "benchmark = {} exploration amplitude = {} seed = {} step = {step}",
        bench.name, config.exploration.amplitude, config.exploration.seed
    ));

    let unknowns = bench.basis_v.len() + bench.basis_u.len();
    let horizon = ocfg.interval_len * ocfg.intervals_for(unknowns) as f64;
    let inv = select_invariant_set(
        &bench,
        &exploration,
        &config.simulation.probe_scales,
        horizon,
        step,
        config.learning.tracking_gain,
    )?;
    log.push(format!("invariant set: lo = {:?} hi = {:?}", inv.region.lo, inv.region.hi));
    if inv.degenerate {
        log.push("warning: invariant set is degenerate; data cannot be persistently exciting".into());
    }

    let mut plant = SimulatedPlant::new(bench.model.clone(), bench.uncertainty.clone(), bench.initial.clone(), step);
    let mut stage_residuals = Vec::new();
    let online = if cascade {
        phase_one_learn(
            &mut plant,
            &bench.u0,
            &exploration,
            &bench.basis_v,
            &bench.basis_u,
            &bench.cost,
            &PhaseOneConfig {
                tracking_gain: config.learning.tracking_gain,
                online: ocfg.clone(),
            },
        )?
    } else if let Some(bc) = &config.basis {
        let n = bench.model.n();
        let schedule: Vec<BasisPair> = bc
            .schedule
            .iter()
            .map(|&d| BasisPair {
                value: make_polynomial_basis(n, d, true, false),
                policy: make_polynomial_basis(n, d.saturating_sub(1).max(1), true, false),
            })
            .collect();
        let u0 = bench.u0.embed(&schedule[0].policy).unwrap_or_else(|_| bench.u0.clone());
        let res = two_loop_optimize(&mut plant, &u0, &exploration, &bench.cost, bc.residual_threshold, &schedule, &ocfg)?;
        log.push(format!(
            "two-loop: stage {} selected (value terms {}, policy terms {})",
            res.stage, res.n_value, res.n_policy
        ));
        stage_residuals = res.stage_residuals;
        res.run
    } else {
        run_online_pi(&mut plant, &bench.u0, &exploration, &bench.basis_v, &bench.basis_u, &bench.cost, &ocfg)?
    };
    for it in &online.iterations {
        log.push(format!(
            "iteration {}: residual_rms = {} min_singular_value = {} pe_ratio = {} weight_change = {}",
            it.iteration, it.residual_rms, it.min_singular_value, it.pe_ratio, it.weight_change
        ));
    }
    match online.converged_at() {
        Some(i) => log.push(format!("converged at iteration {i}")),
        None => log.push(format!("not converged after {} iterations", online.iterations.len())),
    }
    let learning = plant.hidden_records().last().cloned().unwrap_or_default();
    let audit = audit_states(&learning, &inv.region, &bench.region, bench.w_region.as_ref());
    log.push(format!(
        "state audit: samples = {} outside_selected = {} outside_declared = {} max|x| = {:?} max|w| = {:?}",
        audit.samples, audit.outside_selected, audit.outside_declared, audit.max_abs_x, audit.max_abs_w
    ));
    if audit.outside_selected > 0 || audit.outside_declared > 0 {
        log.push("violation: learning-phase states left the approximation set".into());
    }

    let last = online.last().clone();
    let mut certification = None;
    let mut phase_two_record = None;
    let mut phase_two_solution = None;
    let final_policy = if bench.uncertainty.is_none() {
        FinalPolicy::Learned(last.next_policy.clone())
    } else if cascade {
        let out = certify_cascade(&bench, &last, config, log)?;
        certification = Some(out.certification);
        phase_two_record = Some(out.record);
        phase_two_solution = Some(out.solution);
        FinalPolicy::Backstepped(out.controller)
    } else {
        let (cert, u_ro) = certify_matched(&bench, &last, config, log)?;
        certification = Some(cert);
        FinalPolicy::Robust(u_ro)
    };

    let post_plant = SimulatedPlant::new(bench.model.clone(), bench.uncertainty.clone(), bench.initial.clone(), step);
    let post = post_plant.simulate(&final_policy, config.simulation.post_horizon)?;
    let fin = post.trajectory.final_x().iter().map(|v| v * v).sum::<f64>().sqrt();
    log.push(format!("post-learning: final |x| = {fin}"));

    let speed_profile = (bench.model.n() >= 2).then(|| speed_profile_analysis(&post.trajectory));
    if let Some(sp) = &speed_profile {
        log.push(format!(
            "speed profile: peaks = {} peak_time = {} symmetry_index = {} duration = {}",
            sp.peak_count, sp.peak_time, sp.symmetry_index, sp.movement_duration
        ));
    }
    let grid = output::surface_grid(&bench.region);
    let cost_comparison = cost_surface_compare(&online.iterations[0].value, &last.value, &grid);
    log.push(format!(
        "cost surface: reduction_fraction = {} max_ratio = {}",
        cost_comparison.reduction_fraction, cost_comparison.max_ratio
    ));

    Ok(LearningRun {
        config: config.clone(),
        benchmark: bench.name.clone(),
        converged_at: online.converged_at(),
        iterations: online.iterations,
        window: online.window,
        learning,
        phase_two_record,
        phase_two: phase_two_solution,
        invariant_set: inv,
        audit,
        certification,
        final_policy,
        post,
        speed_profile,
        cost_comparison,
        region: bench.region.clone(),
        stage_residuals,
        log: std::mem::take(log),
    })
}

/// Run and write every artifact into the configured directory. On failure
/// the directory still receives `config.toml`, `run_log.txt` and `error.txt`.
pub fn run_to_dir(config: &RunConfig) -> Result<(PathBuf, LearningRun)> {
    let bench_name = config.benchmark().map(|b| b.name).unwrap_or_else(|_| "run".into());
    let dir = config.out_dir(&bench_name);
    std::fs::create_dir_all(&dir)?;
    let mut stored = config.clone();
    stored.output.dir = None;
    std::fs::write(dir.join(output::CONFIG_FILE), stored.to_toml_string())?;
    let _ = std::fs::remove_file(dir.join(output::ERROR_FILE));
    let mut log = Vec::new();
    match run_logged(config, &mut log) {
        Ok(run) => {
            output::write_run(&dir, &run)?;
            Ok((dir, run))
        }
        Err(e) => {
            output::write_lines(&dir.join(output::LOG_FILE), &log)?;
            std::fs::write(dir.join(output::ERROR_FILE), format!("{}\n{}\n", e.category(), e))?;
            Err(e)
        }
    }
}

/// Re-run `dir/config.toml` into `dir/replay` and compare every artifact
/// byte for byte.
pub fn replay(dir: &Path) -> Result<PathBuf> {
    let mut cfg = RunConfig::load(&dir.join(output::CONFIG_FILE))?;
    let target = dir.join("replay");
    cfg.output.dir = Some(target.clone());
    if target.exists() {
        std::fs::remove_dir_all(&target)?;
    }
    let _ = run_to_dir(&cfg);
    let mut names: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .map(|e| e.file_name())
        .collect();
    names.sort();
    for name in names {
        let a = std::fs::read(dir.join(&name))?;
        let b = std::fs::read(target.join(&name)).unwrap_or_default();
        if a != b {
            return Err(Error::ReplayMismatch(name.to_string_lossy().into_owned()));
        }
    }
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::scalar_lqr;

    #[test]
    fn invariant_set_of_stable_plant_contains_learning_run() {
        let b = scalar_lqr().unwrap();
        let e = Exploration::sinusoids(1.0, 1);
        let inv = select_invariant_set(&b, &e, &[1.0, -1.0], 2.0, 1e-3, 10.0).unwrap();
        assert!(!inv.degenerate);
        assert!(inv.region.contains(&[1.0]) && inv.region.contains(&[0.0]));
        let plant = SimulatedPlant::new(b.model.clone(), None, b.initial.clone(), 1e-3);
        let u0 = b.u0.clone();
        let rec = plant
            .simulate(&|x: &[f64], _: Option<f64>, t: f64| u0.eval_unchecked(x) + e.eval(t), 2.0)
            .unwrap();
        assert!(rec.trajectory.x.iter().all(|x| inv.region.contains(x)));
    }

    #[test]
    fn zero_noise_at_origin_is_degenerate() {
        let mut b = scalar_lqr().unwrap();
        b.initial = InitialState::plain(vec![0.0]);
        let inv = select_invariant_set(&b, &Exploration::none(), &[1.0], 1.0, 1e-3, 10.0).unwrap();
        assert!(inv.degenerate);
    }

    #[test]
    fn unstable_initial_policy_diverges() {
        let mut b = scalar_lqr().unwrap();
        b.model = crate::dynsys::SystemModel::new(
            1,
            Arc::new(|x: &[f64]| vec![x[0] * x[0] + x[0]]),
            Arc::new(|_: &[f64]| vec![1.0]),
        )
        .unwrap();
        b.initial = InitialState::plain(vec![2.0]);
        let err = select_invariant_set(&b, &Exploration::none(), &[1.0], 5.0, 1e-3, 10.0).unwrap_err();
        assert_eq!(err.category(), "StateDivergence");
    }
}
