//! Scalar comparison functions of class K / K∞.
//!
//! Gains are evaluated numerically on ladders rather than manipulated
//! symbolically. Inverses use closed forms where the representation allows,
//! otherwise monotone bracketing plus bisection.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Linear(f64),
    Power { coef: f64, exp: f64 },
    /// Piecewise-linear through `(s[k], v[k])`, `s[0] = 0`, `v[0] = 0`.
    Table { s: Vec<f64>, v: Vec<f64> },
    Map(ScalarMap),
    Compose(Box<ClassKFunction>, Box<ClassKFunction>),
    Inverse(Box<ClassKFunction>),
    Max(Vec<ClassKFunction>),
}

/// Continuous, strictly increasing `γ: [0, s_max] → ℝ≥0` with `γ(0) = 0`.
#[derive(Clone)]
pub struct ClassKFunction {
    repr: Repr,
    s_max: f64,
    unbounded: bool,
    label: String,
}

impl fmt::Debug for ClassKFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ClassKFunction({})", self.label)
    }
}

impl ClassKFunction {
    /// `s ↦ k·s`.
    pub fn linear(k: f64) -> Self {
        assert!(k > 0.0, "linear gain must have positive slope");
        ClassKFunction {
            repr: Repr::Linear(k),
            s_max: f64::INFINITY,
            unbounded: true,
            label: format!("{k}·s"),
        }
    }

    /// `s ↦ c·s^p`.
    pub fn power(coef: f64, exp: f64) -> Self {
        assert!(coef > 0.0 && exp > 0.0, "power gain needs positive coefficient and exponent");
        ClassKFunction {
            repr: Repr::Power { coef, exp },
            s_max: f64::INFINITY,
            unbounded: true,
            label: format!("{coef}·s^{exp}"),
        }
    }

    /// Wrap an arbitrary map. `s_max = ∞` marks it K∞ on the whole half-line.
    pub fn from_fn<F>(label: impl Into<String>, s_max: f64, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ClassKFunction {
            repr: Repr::Map(Arc::new(f)),
            s_max,
            unbounded: s_max.is_infinite(),
            label: label.into(),
        }
    }

    /// Piecewise-linear interpolant through the given samples.
    ///
    /// The samples are monotonised first (cumulative max plus a tiny strict
    /// increment) and `(0, 0)` is prepended if absent. With `extrapolate` the
    /// last slope continues past the final sample, making the result K∞.
    pub fn from_samples(label: impl Into<String>, s: &[f64], v: &[f64], extrapolate: bool) -> Self {
        assert_eq!(s.len(), v.len());
        assert!(!s.is_empty());
        let mut ss = Vec::with_capacity(s.len() + 1);
        let mut vv = Vec::with_capacity(s.len() + 1);
        if s[0] > 0.0 {
            ss.push(0.0);
            vv.push(0.0);
        }
        for (&a, &b) in s.iter().zip(v) {
            ss.push(a);
            vv.push(b.max(0.0));
        }
        vv[0] = 0.0;
        let top = vv.iter().cloned().fold(0.0, f64::max).max(1e-300);
        for k in 1..vv.len() {
            let floor = vv[k - 1] + 1e-14 * top;
            if vv[k] < floor {
                vv[k] = floor;
            }
        }
        let s_max = if extrapolate {
            f64::INFINITY
        } else {
            *ss.last().unwrap()
        };
        ClassKFunction {
            repr: Repr::Table { s: ss, v: vv },
            s_max,
            unbounded: extrapolate,
            label: label.into(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Upper end of the domain.
    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn is_unbounded(&self) -> bool {
        self.unbounded
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &ClassKFunction) -> ClassKFunction {
        ClassKFunction {
            label: format!("{}∘{}", self.label, inner.label),
            s_max: inner.s_max,
            unbounded: self.unbounded && inner.unbounded,
            repr: Repr::Compose(Box::new(self.clone()), Box::new(inner.clone())),
        }
    }

    /// Functional inverse as a class-K object. Its domain is the range of
    /// `self`; evaluating past that yields [`Error::CompositionDomain`].
    pub fn inverse_fn(&self) -> ClassKFunction {
        let range = self.range_max();
        ClassKFunction {
            label: format!("({})⁻¹", self.label),
            s_max: range,
            unbounded: self.unbounded,
            repr: Repr::Inverse(Box::new(self.clone())),
        }
    }

    /// Pointwise maximum.
    pub fn max_of(parts: &[ClassKFunction]) -> ClassKFunction {
        assert!(!parts.is_empty());
        let label = format!(
            "max{{{}}}",
            parts.iter().map(|p| p.label.as_str()).collect::<Vec<_>>().join(", ")
        );
        ClassKFunction {
            label,
            s_max: parts.iter().map(|p| p.s_max).fold(f64::INFINITY, f64::min),
            unbounded: parts.iter().any(|p| p.unbounded),
            repr: Repr::Max(parts.to_vec()),
        }
    }

    /// `s ↦ self(c·s)`.
    pub fn scale_argument(&self, c: f64) -> ClassKFunction {
        self.compose(&ClassKFunction::linear(c))
            .with_label(format!("{}({c}s)", self.label))
    }

    /// Supremum of the range, `self(s_max)` (∞ for unbounded functions).
    pub fn range_max(&self) -> f64 {
        if self.s_max.is_infinite() {
            if self.unbounded {
                f64::INFINITY
            } else {
                // bounded class-K on the half-line: probe far out
                self.try_eval(1e12).unwrap_or(f64::INFINITY)
            }
        } else {
            self.try_eval(self.s_max).unwrap_or(f64::NAN)
        }
    }

    /// Evaluate, reporting domain violations inside compositions.
    pub fn try_eval(&self, s: f64) -> Result<f64> {
        if s < 0.0 || s.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "class-K function {} evaluated at {s}",
                self.label
            )));
        }
        if s > self.s_max * (1.0 + 1e-12) {
            return Err(Error::CompositionDomain {
                value: s,
                range_max: self.s_max,
            });
        }
        Ok(match &self.repr {
            Repr::Linear(k) => k * s,
            Repr::Power { coef, exp } => coef * s.powf(*exp),
            Repr::Table { s: xs, v } => interp(xs, v, s, self.unbounded),
            Repr::Map(f) => f(s),
            Repr::Compose(outer, inner) => outer.try_eval(inner.try_eval(s)?)?,
            Repr::Inverse(f) => f.inverse(s)?,
            Repr::Max(parts) => {
                let mut m = 0.0f64;
                for p in parts {
                    m = m.max(p.try_eval(s)?);
                }
                m
            }
        })
    }

    /// Evaluate; domain violations produce NaN.
    pub fn eval(&self, s: f64) -> f64 {
        self.try_eval(s).unwrap_or(f64::NAN)
    }

    /// Solve `self(s) = value` for `s`.
    pub fn inverse(&self, value: f64) -> Result<f64> {
        if value < 0.0 || value.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "inverse of {} requested at {value}",
                self.label
            )));
        }
        if value == 0.0 {
            return Ok(0.0);
        }
        match &self.repr {
            Repr::Linear(k) => return Ok(value / k),
            Repr::Power { coef, exp } => return Ok((value / coef).powf(1.0 / exp)),
            Repr::Inverse(f) => return f.try_eval(value),
            Repr::Table { s, v } => {
                let last = *v.last().unwrap();
                if value <= last || self.unbounded {
                    return Ok(interp(v, s, value, self.unbounded));
                }
                return Err(Error::CompositionDomain {
                    value,
                    range_max: last,
                });
            }
            _ => {}
        }
        self.bisect_inverse(value)
    }

    fn bisect_inverse(&self, value: f64) -> Result<f64> {
        let mut hi = if self.s_max.is_finite() {
            self.s_max
        } else {
            1.0
        };
        if self.s_max.is_finite() {
            let top = self.try_eval(hi)?;
            if value > top * (1.0 + 1e-12) {
                return Err(Error::CompositionDomain {
                    value,
                    range_max: top,
                });
            }
        } else {
            let mut grown = 0;
            while self.try_eval(hi)? < value {
                hi *= 2.0;
                grown += 1;
                if grown > 2000 || !hi.is_finite() {
                    return Err(Error::CompositionDomain {
                        value,
                        range_max: self.try_eval(hi / 2.0).unwrap_or(f64::NAN),
                    });
                }
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.try_eval(mid)? < value {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Check the class-K contract on a ladder: zero at zero, strictly
    /// increasing, and inverse round trip within `1e-9` relative.
    pub fn validate(&self, ladder: &[f64]) -> std::result::Result<(), String> {
        let f0 = self.try_eval(0.0).map_err(|e| e.to_string())?;
        if f0.abs() > 1e-12 {
            return Err(format!("{}: f(0) = {f0}", self.label));
        }
        let mut prev = f0;
        for &s in ladder {
            let v = self.try_eval(s).map_err(|e| e.to_string())?;
            if !(v > prev) {
                return Err(format!("{}: not strictly increasing at s = {s}", self.label));
            }
            prev = v;
            let back = self.inverse(v).map_err(|e| e.to_string())?;
            if (back - s).abs() > 1e-9 * s.max(1e-300) {
                return Err(format!(
                    "{}: inverse round trip {back} vs {s}",
                    self.label
                ));
            }
        }
        Ok(())
    }
}

/// Piecewise-linear interpolation on increasing `xs`; linear extrapolation of
/// the last segment when `extend` is set, otherwise clamped.
fn interp(xs: &[f64], ys: &[f64], x: f64, extend: bool) -> f64 {
    let n = xs.len();
    if n == 1 {
        return ys[0];
    }
    if x >= xs[n - 1] {
        if !extend {
            return ys[n - 1];
        }
        let slope = (ys[n - 1] - ys[n - 2]) / (xs[n - 1] - xs[n - 2]);
        return ys[n - 1] + slope * (x - xs[n - 1]);
    }
    let k = match xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
        Ok(k) => return ys[k],
        Err(k) => k,
    };
    if k == 0 {
        return ys[0];
    }
    let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    ys[k - 1] + t * (ys[k] - ys[k - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::log_ladder;

    #[test]
    fn closed_form_inverses() {
        let l = ClassKFunction::linear(3.0);
        assert_eq!(l.inverse(6.0).unwrap(), 2.0);
        let p = ClassKFunction::power(0.5, 2.0);
        assert!((p.inverse(p.eval(1.7)).unwrap() - 1.7).abs() < 1e-14);
    }

    #[test]
    fn bisection_inverse_meets_contract() {
        let f = ClassKFunction::from_fn("s+s^3", f64::INFINITY, |s| s + s * s * s);
        f.validate(&log_ladder(1e-4, 1e3, 200)).unwrap();
    }

    #[test]
    fn composition_and_max() {
        let a = ClassKFunction::linear(2.0);
        let b = ClassKFunction::power(1.0, 2.0);
        assert_eq!(a.compose(&b).eval(3.0), 18.0);
        assert_eq!(b.compose(&a).eval(3.0), 36.0);
        let m = ClassKFunction::max_of(&[a.clone(), b.clone()]);
        assert_eq!(m.eval(1.0), 2.0);
        assert_eq!(m.eval(4.0), 16.0);
        assert_eq!(a.scale_argument(2.0).eval(1.5), 6.0);
    }

    #[test]
    fn inverse_outside_range_is_domain_error() {
        let f = ClassKFunction::from_fn("tanh", f64::INFINITY, f64::tanh);
        // tanh is class K but not K∞
        let mut g = f.clone();
        g.unbounded = false;
        assert!(matches!(g.inverse(2.0), Err(Error::CompositionDomain { .. })));
        let bounded = ClassKFunction::from_fn("s on [0,1]", 1.0, |s| s);
        assert!(matches!(
            bounded.inverse(1.5),
            Err(Error::CompositionDomain { .. })
        ));
        let inv = bounded.inverse_fn();
        assert!(matches!(inv.try_eval(1.5), Err(Error::CompositionDomain { .. })));
    }

    #[test]
    fn table_is_monotonised() {
        let s = [0.5, 1.0, 1.5, 2.0];
        let v = [1.0, 0.8, 2.0, 3.0];
        let t = ClassKFunction::from_samples("t", &s, &v, true);
        // the dip at s = 1 is lifted to the running maximum
        assert!(t.eval(1.0) >= t.eval(0.5));
        assert!(t.eval(0.75) >= t.eval(0.5));
        t.validate(&[0.25, 0.5, 1.25, 1.75, 2.0, 3.0]).unwrap();
        assert!((t.eval(4.0) - 7.0).abs() < 1e-9);
    }

    #[test]
    fn linear_ladder_validation_fails_for_flat_function() {
        let f = ClassKFunction::from_fn("flat", f64::INFINITY, |s| s.min(1.0));
        assert!(f.validate(&[0.5, 1.5, 2.0]).is_err());
    }
}
