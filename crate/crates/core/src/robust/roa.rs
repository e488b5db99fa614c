//! Level sets, the σ gain and region-of-attraction estimates.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ClassKFunction;
use crate::error::{Error, Result};
use crate::sampling::{log_ladder, unit_directions, BoxRegion};

type Field = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Constants `a ≤ V(x)/|x|² ≤ b` over `points` (origin skipped).
pub fn quadratic_sandwich(value: &dyn Fn(&[f64]) -> f64, points: &[Vec<f64>]) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for x in points {
        let n2 = x.iter().map(|v| v * v).sum::<f64>();
        if n2 == 0.0 {
            continue;
        }
        let q = value(x) / n2;
        lo = lo.min(q);
        hi = hi.max(q);
    }
    if !(lo > 0.0) || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "value function is not positive definite on the samples (min V/|x|² = {lo:e})"
        )));
    }
    Ok((lo, hi))
}

/// Radial and space-filling samples of a box around the origin.
pub fn region_samples(region: &BoxRegion, directions: usize, radii: usize, fill: usize) -> Vec<Vec<f64>> {
    let mut pts = region.halton_points(fill);
    for d in unit_directions(region.dim(), directions) {
        let reach = ray_exit(region, &d);
        for r in log_ladder(reach * 1e-3, reach, radii) {
            pts.push(d.iter().map(|v| v * r).collect());
        }
    }
    pts
}

/// Distance from the origin to the box boundary along unit direction `d`.
pub fn ray_exit(region: &BoxRegion, d: &[f64]) -> f64 {
    let mut t = f64::INFINITY;
    for (k, &dk) in d.iter().enumerate() {
        if dk > 0.0 {
            t = t.min(region.hi[k] / dk);
        } else if dk < 0.0 {
            t = t.min(region.lo[k] / dk);
        }
    }
    t
}

/// Geometric mean of `χ₂` and `χ₁⁻¹` tabulated on a ladder up to `s_hi`.
pub fn sigma_between(
    chi2: &ClassKFunction,
    chi1_inv: &ClassKFunction,
    s_hi: f64,
    samples: usize,
) -> Result<ClassKFunction> {
    let ladder = log_ladder(s_hi * 1e-9, s_hi, samples);
    let mut vals = Vec::with_capacity(ladder.len());
    for &s in &ladder {
        let a = chi2.try_eval(s)?;
        let b = chi1_inv.try_eval(s)?;
        if !(a < b) {
            return Err(Error::InvalidArgument(format!(
                "χ₂({s:e}) = {a:e} is not below χ₁⁻¹ = {b:e}; the gain condition fails"
            )));
        }
        vals.push((a * b).sqrt());
    }
    Ok(ClassKFunction::from_samples("σ", &ladder, &vals, true))
}

/// `σ` between `χ₂ = κ₃∘α̲⁻¹` and `χ₁⁻¹ = λ̲∘κ₁⁻¹∘γ∘ᾱ⁻¹`.
pub fn matched_sigma(
    gamma: &ClassKFunction,
    kappa1: &ClassKFunction,
    kappa3: &ClassKFunction,
    lambda_lo: &ClassKFunction,
    alpha_lo: &ClassKFunction,
    alpha_hi: &ClassKFunction,
    s_hi: f64,
) -> Result<ClassKFunction> {
    let chi2 = kappa3.compose(&alpha_lo.inverse_fn());
    let chi1_inv = lambda_lo
        .compose(&kappa1.inverse_fn())
        .compose(gamma)
        .compose(&alpha_hi.inverse_fn());
    sigma_between(&chi2, &chi1_inv, s_hi, 200)
}

/// Largest certified level `d` for the implication
/// `0 < V(x) ≤ d ⇒ |e(x)| < γ(|x|)`.
#[derive(Debug, Clone)]
pub struct LevelCertificate {
    pub d: f64,
    /// Smallest `V` on the box boundary; larger levels leave the box.
    pub d_cap: f64,
    /// Smallest `V` at a sample violating the bound (∞ if none).
    pub d_violation: f64,
    pub samples_checked: usize,
    /// `max |e(x)|/γ(|x|)` over samples with `V(x) ≤ d`.
    pub worst_ratio: f64,
}

pub fn certify_level(
    value: &dyn Fn(&[f64]) -> f64,
    error: &dyn Fn(&[f64]) -> f64,
    gamma: &ClassKFunction,
    region: &BoxRegion,
    ladder_count: usize,
) -> Result<LevelCertificate> {
    let dirs = unit_directions(region.dim(), 256);
    let d_cap = dirs
        .iter()
        .map(|d| {
            let t = ray_exit(region, d);
            value(&d.iter().map(|v| v * t).collect::<Vec<_>>())
        })
        .fold(f64::INFINITY, f64::min);
    if !(d_cap > 0.0) {
        return Err(Error::InvalidArgument("value vanishes on the region boundary".into()));
    }
    let pts = region_samples(region, 256, 40, 4000);
    let mut d_violation = f64::INFINITY;
    let mut evaluated = Vec::with_capacity(pts.len());
    for x in &pts {
        let nx = norm(x);
        if nx == 0.0 {
            continue;
        }
        let v = value(x);
        let ratio = error(x).abs() / gamma.try_eval(nx)?;
        if !(ratio < 1.0) {
            d_violation = d_violation.min(v);
        }
        evaluated.push((v, ratio));
    }
    let top = d_cap.min(d_violation);
    let d = log_ladder(d_cap * 1e-6, d_cap, ladder_count.max(2))
        .into_iter()
        .filter(|&d| d < top || (d <= d_cap && d_violation.is_infinite()))
        .fold(0.0, f64::max);
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "no level certified: the redesign error reaches γ at V = {d_violation:e}"
        )));
    }
    let worst_ratio = evaluated
        .iter()
        .filter(|(v, _)| *v <= d)
        .map(|(_, r)| *r)
        .fold(0.0, f64::max);
    Ok(LevelCertificate {
        d,
        d_cap,
        d_violation,
        samples_checked: evaluated.len(),
        worst_ratio,
    })
}

/// `Ω = {(w, x): max[σ(V(x)), W(w)] ≤ σ(d)}`.
#[derive(Clone)]
pub struct RoaEstimate {
    value: Field,
    w_fn: Field,
    sigma: ClassKFunction,
    d: f64,
    level: f64,
}

impl std::fmt::Debug for RoaEstimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RoaEstimate(d = {}, σ(d) = {})", self.d, self.level)
    }
}

pub fn estimate_roa_matched(value: Field, w_fn: Field, d: f64, sigma: &ClassKFunction) -> Result<RoaEstimate> {
    if !(d > 0.0) {
        return Err(Error::InvalidArgument("level d must be positive".into()));
    }
    let level = sigma.try_eval(d)?;
    Ok(RoaEstimate {
        value,
        w_fn,
        sigma: sigma.clone(),
        d,
        level,
    })
}

impl RoaEstimate {
    pub fn d(&self) -> f64 {
        self.d
    }

    /// `σ(d)`.
    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn contains(&self, x: &[f64], w: &[f64]) -> bool {
        let v = (self.value)(x);
        let sv = if v <= 0.0 { 0.0 } else { self.sigma.eval(v) };
        sv <= self.level && (self.w_fn)(w) <= self.level
    }

    /// Points with `V(x) = d` along `directions` unit rays, each searched up
    /// to radius `r_max`. Rays that stay below the level are skipped.
    pub fn x_boundary(&self, dim: usize, directions: usize, r_max: f64) -> Vec<Vec<f64>> {
        boundary_along_rays(&*self.value, self.d, dim, directions, r_max)
    }

    /// Points with `W(w) = σ(d)`.
    pub fn w_boundary(&self, dim: usize, directions: usize, r_max: f64) -> Vec<Vec<f64>> {
        boundary_along_rays(&*self.w_fn, self.level, dim, directions, r_max)
    }

    /// Seeded rejection samples `(x, w)` from the product box that lie in Ω.
    pub fn sample_inside(
        &self,
        seed: u64,
        count: usize,
        x_box: &BoxRegion,
        w_box: &BoxRegion,
    ) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let draw = |rng: &mut ChaCha8Rng, b: &BoxRegion| -> Vec<f64> {
            b.lo.iter().zip(&b.hi).map(|(l, h)| if h > l { rng.random_range(*l..*h) } else { *l }).collect()
        };
        let mut tries = 0usize;
        while out.len() < count {
            tries += 1;
            if tries > 1000 * count.max(1) {
                return Err(Error::InvalidArgument(
                    "region estimate too small for the sampling boxes".into(),
                ));
            }
            let x = draw(&mut rng, x_box);
            let w = draw(&mut rng, w_box);
            if self.contains(&x, &w) {
                out.push((x, w));
            }
        }
        Ok(out)
    }
}

fn boundary_along_rays(
    f: &(dyn Fn(&[f64]) -> f64 + Send + Sync),
    level: f64,
    dim: usize,
    directions: usize,
    r_max: f64,
) -> Vec<Vec<f64>> {
    let at = |d: &[f64], r: f64| d.iter().map(|v| v * r).collect::<Vec<_>>();
    let mut out = Vec::new();
    for d in unit_directions(dim, directions) {
        if f(&at(&d, r_max)) < level {
            continue;
        }
        let (mut lo, mut hi) = (0.0, r_max);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if f(&at(&d, mid)) < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(at(&d, 0.5 * (lo + hi)));
    }
    out
}

/// Outcome of a finite-difference descent check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentReport {
    pub checked: usize,
    /// Nodes where the premise held.
    pub active: usize,
    /// `max (V̇ − bound)` over active nodes.
    pub worst_excess: f64,
}

impl DescentReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.worst_excess <= slack
    }
}

/// Check `V̇ ≤ bound` at nodes where `active` is set, with `V̇` from the
/// fourth-order central difference of `values` on a uniform grid.
pub fn descent_check(step: f64, values: &[f64], active: &[bool], bound: &[f64]) -> DescentReport {
    let n = values.len();
    let mut rep = DescentReport {
        checked: 0,
        active: 0,
        worst_excess: f64::NEG_INFINITY,
    };
    if n < 5 {
        return rep;
    }
    for k in 2..n - 2 {
        rep.checked += 1;
        if !active[k] {
            continue;
        }
        rep.active += 1;
        let dv = (values[k - 2] - 8.0 * values[k - 1] + 8.0 * values[k + 1] - values[k + 2]) / (12.0 * step);
        rep.worst_excess = rep.worst_excess.max(dv - bound[k]);
    }
    rep
}
