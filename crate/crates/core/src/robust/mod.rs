//! Robust redesign of a learned policy and small-gain verification.

pub mod gain;
pub mod roa;

use std::fmt::Write as _;
use std::sync::Arc;

use crate::basis::Approximant;
use crate::dynsys::Controller;
use crate::error::{Error, Result};
use crate::sampling::log_ladder;

pub use gain::ClassKFunction;
pub use roa::{
    certify_level, descent_check, estimate_roa_matched, matched_sigma, quadratic_sandwich, ray_exit, region_samples,
    sigma_between, DescentReport, LevelCertificate, RoaEstimate,
};

type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Smooth, nondecreasing, strictly positive `ρ: [0, ∞) → (0, ∞)`.
#[derive(Clone)]
pub struct Rho {
    f: ScalarMap,
    label: String,
    constant: Option<f64>,
}

impl std::fmt::Debug for Rho {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Rho({})", self.label)
    }
}

impl Rho {
    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("ρ must be positive, got {c}")));
        }
        Ok(Rho {
            f: Arc::new(move |_| c),
            label: format!("{c}"),
            constant: Some(c),
        })
    }

    /// Arbitrary `ρ`; checked on `ladder`.
    pub fn from_fn<F>(label: impl Into<String>, f: F, ladder: &[f64]) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let rho = Rho {
            f: Arc::new(f),
            label: label.into(),
            constant: None,
        };
        rho.validate(ladder)?;
        Ok(rho)
    }

    pub fn validate(&self, ladder: &[f64]) -> Result<()> {
        let mut prev = self.eval(0.0);
        if !(prev > 0.0) {
            return Err(Error::InvalidArgument(format!("ρ({}) not positive at 0", self.label)));
        }
        for &s in ladder {
            let v = self.eval(s);
            if !(v > 0.0) || v < prev {
                return Err(Error::InvalidArgument(format!(
                    "ρ({}) not positive and nondecreasing at s = {s}",
                    self.label
                )));
            }
            prev = v;
        }
        Ok(())
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    /// `ρ₁(s) = 2ρ(s/2)`.
    pub fn doubled(&self) -> Rho {
        let f = self.f.clone();
        Rho {
            f: Arc::new(move |s| 2.0 * f(0.5 * s)),
            label: format!("2·ρ(s/2) with ρ = {}", self.label),
            constant: self.constant.map(|c| 2.0 * c),
        }
    }
}

/// `u_ro(x) = [1 + (r/2)ρ²(|x|²)]·û(x)`.
#[derive(Debug, Clone)]
pub struct RobustPolicy {
    base: Approximant,
    rho: Rho,
    r: f64,
}

pub fn robust_redesign(base: &Approximant, rho: &Rho, r: f64) -> Result<RobustPolicy> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument("control weight must be positive".into()));
    }
    let at_origin = base.evaluate(&vec![0.0; base.dim()])?;
    if at_origin != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "base policy does not vanish at the origin ({at_origin})"
        )));
    }
    Ok(RobustPolicy {
        base: base.clone(),
        rho: rho.clone(),
        r,
    })
}

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

impl RobustPolicy {
    pub fn base(&self) -> &Approximant {
        &self.base
    }

    pub fn rho(&self) -> &Rho {
        &self.rho
    }

    pub fn control_weight(&self) -> f64 {
        self.r
    }

    /// `1 + (r/2)ρ²(|x|²)`.
    pub fn multiplier(&self, x: &[f64]) -> f64 {
        let p = self.rho.eval(sq_norm(x));
        1.0 + 0.5 * self.r * p * p
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.multiplier(x) * self.base.eval_unchecked(x)
    }

    /// `∂u_ro/∂x` by central differences.
    pub fn gradient_fd(&self, x: &[f64], h: f64) -> Vec<f64> {
        let mut xp = x.to_vec();
        (0..x.len())
            .map(|k| {
                xp[k] = x[k] + h;
                let up = self.eval(&xp);
                xp[k] = x[k] - h;
                let dn = self.eval(&xp);
                xp[k] = x[k];
                (up - dn) / (2.0 * h)
            })
            .collect()
    }
}

impl Controller for RobustPolicy {
    fn control(&self, x: &[f64], _z: Option<f64>, _t: f64) -> f64 {
        self.eval(x)
    }
}

/// `γ(s) = ½·ε·ρ(s²)·s`.
pub fn gamma_from_rho(rho: &Rho, epsilon: f64) -> Result<ClassKFunction> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("ε must be positive".into()));
    }
    if let Some(c) = rho.as_constant() {
        return Ok(ClassKFunction::linear(0.5 * epsilon * c).with_label("γ"));
    }
    let rho = rho.clone();
    Ok(ClassKFunction::from_fn("γ", f64::INFINITY, move |s| {
        0.5 * epsilon * rho.eval(s * s) * s
    }))
}

/// `γ₁(s) = ½·ε·ρ(½s²)·s`.
pub fn gamma1_from_rho(rho: &Rho, epsilon: f64) -> Result<ClassKFunction> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("ε must be positive".into()));
    }
    if let Some(c) = rho.as_constant() {
        return Ok(ClassKFunction::linear(0.5 * epsilon * c).with_label("γ₁"));
    }
    let rho = rho.clone();
    Ok(ClassKFunction::from_fn("γ₁", f64::INFINITY, move |s| {
        0.5 * epsilon * rho.eval(0.5 * s * s) * s
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderRow {
    pub s: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct SmallGainReport {
    pub holds: bool,
    /// `min_s [lhs(s) − rhs(s)]` over the ladder.
    pub margin: f64,
    /// `min_s [lhs(s) − rhs(s)] / rhs(s)` over the ladder.
    pub relative_margin: f64,
    pub lhs_label: String,
    pub rhs_label: String,
    pub rows: Vec<LadderRow>,
}

impl SmallGainReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# lhs = {}", self.lhs_label);
        let _ = writeln!(out, "# rhs = {}", self.rhs_label);
        let _ = writeln!(
            out,
            "# holds = {} margin = {:e} relative_margin = {:e}",
            self.holds, self.margin, self.relative_margin
        );
        let _ = writeln!(out, "s\tlhs\trhs\tmargin");
        for r in &self.rows {
            let _ = writeln!(out, "{:e}\t{:e}\t{:e}\t{:e}", r.s, r.lhs, r.rhs, r.lhs - r.rhs);
        }
        out
    }
}

/// Compare `lhs > rhs` on `samples` log-spaced points in `[s_max·1e-6, s_max]`.
pub fn ladder_check(
    lhs: &ClassKFunction,
    rhs: &ClassKFunction,
    s_max: f64,
    samples: usize,
) -> Result<SmallGainReport> {
    if !(s_max > 0.0) || samples < 2 {
        return Err(Error::InvalidArgument("ladder needs s_max > 0 and two samples".into()));
    }
    let mut rows = Vec::with_capacity(samples);
    let mut margin = f64::INFINITY;
    let mut relative = f64::INFINITY;
    for s in log_ladder(s_max * 1e-6, s_max, samples) {
        let l = lhs.try_eval(s)?;
        let r = rhs.try_eval(s)?;
        margin = margin.min(l - r);
        if r > 0.0 {
            relative = relative.min((l - r) / r);
        }
        rows.push(LadderRow { s, lhs: l, rhs: r });
    }
    Ok(SmallGainReport {
        holds: margin > 0.0,
        margin,
        relative_margin: relative,
        lhs_label: lhs.label().to_string(),
        rhs_label: rhs.label().to_string(),
        rows,
    })
}

/// `max{κ₂, κ₁∘λ̲⁻¹∘κ₃∘α̲⁻¹∘ᾱ}`.
pub fn matched_rhs(
    kappa1: &ClassKFunction,
    kappa2: &ClassKFunction,
    kappa3: &ClassKFunction,
    lambda_lo: &ClassKFunction,
    alpha_lo: &ClassKFunction,
    alpha_hi: &ClassKFunction,
) -> ClassKFunction {
    let chain = kappa1
        .compose(&lambda_lo.inverse_fn())
        .compose(kappa3)
        .compose(&alpha_lo.inverse_fn())
        .compose(alpha_hi);
    ClassKFunction::max_of(&[kappa2.clone(), chain])
}

/// Ladder check of `γ > max{κ₂, κ₁∘λ̲⁻¹∘κ₃∘α̲⁻¹∘ᾱ}`.
#[allow(clippy::too_many_arguments)]
pub fn check_small_gain_matched(
    gamma: &ClassKFunction,
    kappa1: &ClassKFunction,
    kappa2: &ClassKFunction,
    kappa3: &ClassKFunction,
    lambda_lo: &ClassKFunction,
    alpha_lo: &ClassKFunction,
    alpha_hi: &ClassKFunction,
    s_max: f64,
    samples: usize,
) -> Result<SmallGainReport> {
    let rhs = matched_rhs(kappa1, kappa2, kappa3, lambda_lo, alpha_lo, alpha_hi);
    ladder_check(gamma, &rhs, s_max, samples)
}

/// Smallest constant `ρ` on `ladder` whose gain check reaches
/// `min_relative_margin`.
pub fn select_constant_rho<F>(
    ladder: &[f64],
    epsilon: f64,
    min_relative_margin: f64,
    check: F,
) -> Result<(Rho, SmallGainReport)>
where
    F: Fn(&Rho, &ClassKFunction) -> Result<SmallGainReport>,
{
    let mut sorted = ladder.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best = f64::NEG_INFINITY;
    for c in sorted {
        let rho = Rho::constant(c)?;
        let gamma = gamma_from_rho(&rho, epsilon)?;
        let report = check(&rho, &gamma)?;
        best = best.max(report.relative_margin);
        if report.holds && report.relative_margin >= min_relative_margin {
            return Ok((rho, report));
        }
    }
    Err(Error::InvalidArgument(format!(
        "no ρ on the ladder certifies the gain condition (best relative margin {best:e})"
    )))
}

/// `e_ro(x) = (r/2)ρ²(|x|²)[û(x) − u_{i+1}(x)] + û(x) − u_i(x)`.
pub fn redesign_error(
    u_hat: &Approximant,
    u_i: &Approximant,
    u_next: &Approximant,
    rho: &Rho,
    r: f64,
) -> impl Fn(&[f64]) -> f64 + Send + Sync + Clone + 'static {
    let (u_hat, u_i, u_next, rho) = (u_hat.clone(), u_i.clone(), u_next.clone(), rho.clone());
    move |x: &[f64]| {
        let p = rho.eval(sq_norm(x));
        let uh = u_hat.eval_unchecked(x);
        0.5 * r * p * p * (uh - u_next.eval_unchecked(x)) + uh - u_i.eval_unchecked(x)
    }
}
