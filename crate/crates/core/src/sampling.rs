//! Axis-aligned regions and deterministic point sets over them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical inverse of `index` in `base` (van der Corput).
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base as u64) as f64 * inv;
        index /= base as u64;
        inv /= b;
    }
    out
}

/// Halton point with the given index in the unit cube `[0,1)^dim`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton supports up to 12 dimensions");
    (0..dim).map(|d| radical_inverse(index, PRIMES[d])).collect()
}

/// Closed axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "invalid box bounds lo={lo:?} hi={hi:?}"
            )));
        }
        Ok(BoxRegion { lo, hi })
    }

    /// Box `[-h_i, h_i]` in each coordinate.
    pub fn symmetric(half_widths: &[f64]) -> Result<Self> {
        Self::new(half_widths.iter().map(|h| -h).collect(), half_widths.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Every coordinate interval has positive width.
    pub fn is_nondegenerate(&self) -> bool {
        self.lo.iter().zip(&self.hi).all(|(a, b)| b > a)
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect()
    }

    /// Grow each side by `fraction` of the width (a point box stays a point).
    pub fn inflate(&self, fraction: f64) -> BoxRegion {
        let (lo, hi) = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| {
                let pad = fraction * (b - a) / 2.0;
                (a - pad, b + pad)
            })
            .unzip();
        BoxRegion { lo, hi }
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &BoxRegion) -> BoxRegion {
        BoxRegion {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    /// Bounding box of a point cloud.
    pub fn bounding(points: &[Vec<f64>]) -> Result<BoxRegion> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty point cloud".into()))?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in points {
            for (i, &v) in p.iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        Ok(BoxRegion { lo, hi })
    }

    /// Largest Euclidean norm over the box.
    pub fn max_norm(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a.abs().max(b.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Radius of the largest origin-centred ball inside the box.
    pub fn inner_radius(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (-a).min(*b))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] })
                    .collect()
            })
            .collect()
    }

    /// `count` Halton points mapped into the box (index 0 skipped).
    pub fn halton_points(&self, count: usize) -> Vec<Vec<f64>> {
        (1..=count as u64)
            .map(|k| {
                halton(k, self.dim())
                    .into_iter()
                    .zip(self.lo.iter().zip(&self.hi))
                    .map(|(u, (a, b))| a + u * (b - a))
                    .collect()
            })
            .collect()
    }

    /// Tensor grid with `per_axis` points per coordinate, endpoints included.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        assert!(per_axis >= 2);
        let d = self.dim();
        let total = per_axis.pow(d as u32);
        (0..total)
            .map(|mut code| {
                (0..d)
                    .map(|i| {
                        let k = code % per_axis;
                        code /= per_axis;
                        self.lo[i] + (self.hi[i] - self.lo[i]) * k as f64 / (per_axis - 1) as f64
                    })
                    .collect()
            })
            .collect()
    }
}

/// Deterministic, roughly uniform unit directions in `dim` dimensions.
pub fn unit_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            // Box–Muller on Halton pairs, then normalise.
            let mut out = Vec::with_capacity(count);
            let mut k = 1u64;
            while out.len() < count {
                let u = halton(k, 2 * dim);
                k += 1;
                let v: Vec<f64> = (0..dim)
                    .map(|i| {
                        let u1 = u[2 * i].max(1e-12);
                        let u2 = u[2 * i + 1];
                        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                    })
                    .collect();
                let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if n > 1e-9 {
                    out.push(v.into_iter().map(|a| a / n).collect());
                }
            }
            out
        }
    }
}

/// `count` log-spaced points in `[lo, hi]`, both endpoints included.
pub fn log_ladder(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}
