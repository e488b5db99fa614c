//! Monomial basis sets and weighted-sum approximants.
//!
//! A [`BasisSet`] is an ordered list of multi-indices; the ordering is graded
//! lexicographic (total degree first, then lexicographic with the first
//! coordinate's exponent most significant) so weight vectors from different
//! runs line up entry by entry.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector of a single monomial `x^α`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .fold(1.0, |acc, (&a, &xi)| acc * xi.powi(a as i32))
    }

    /// Partial derivative with respect to coordinate `k`.
    pub fn partial(&self, x: &[f64], k: usize) -> f64 {
        let a = self.0[k];
        if a == 0 {
            return 0.0;
        }
        let mut acc = a as f64;
        for (i, (&e, &xi)) in self.0.iter().zip(x).enumerate() {
            let e = if i == k { e - 1 } else { e };
            acc *= xi.powi(e as i32);
        }
        acc
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_constant() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &a) in self.0.iter().enumerate() {
            if a == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if a == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, a)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    dim: usize,
    terms: Vec<MultiIndex>,
    vanish_at_origin: bool,
}

/// Enumerate all exponent vectors of `dim` variables with total degree `deg`
/// in lexicographic order, first coordinate most significant.
fn exponents_of_degree(dim: usize, deg: u32) -> Vec<Vec<u32>> {
    if dim == 1 {
        return vec![vec![deg]];
    }
    let mut out = Vec::new();
    for lead in (0..=deg).rev() {
        for mut tail in exponents_of_degree(dim - 1, deg - lead) {
            let mut v = Vec::with_capacity(dim);
            v.push(lead);
            v.append(&mut tail);
            out.push(v);
        }
    }
    out
}

/// Build the monomial basis of all terms with total degree `≤ max_degree`.
///
/// `vanish_at_origin` drops the constant term; `include_constant` keeps it and
/// is ignored when `vanish_at_origin` is set.
pub fn make_polynomial_basis(
    dim: usize,
    max_degree: u32,
    vanish_at_origin: bool,
    include_constant: bool,
) -> BasisSet {
    assert!(dim >= 1, "basis dimension must be positive");
    assert!(max_degree >= 1, "max_degree must be at least 1");
    let start = if include_constant && !vanish_at_origin {
        0
    } else {
        1
    };
    let terms = (start..=max_degree)
        .flat_map(|d| exponents_of_degree(dim, d))
        .map(MultiIndex)
        .collect();
    BasisSet {
        dim,
        terms,
        vanish_at_origin: vanish_at_origin || !include_constant,
    }
}

/// All monomials of exactly total degree `degree` (`degree ≥ 1`).
pub fn homogeneous_basis(dim: usize, degree: u32) -> BasisSet {
    assert!(dim >= 1 && degree >= 1);
    BasisSet {
        dim,
        terms: exponents_of_degree(dim, degree).into_iter().map(MultiIndex).collect(),
        vanish_at_origin: true,
    }
}

impl BasisSet {
    /// Basis from an explicit list of monomials.
    pub fn from_terms(dim: usize, terms: Vec<MultiIndex>) -> Result<Self> {
        for t in &terms {
            if t.0.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: t.0.len(),
                });
            }
        }
        let vanish_at_origin = terms.iter().all(|t| !t.is_constant());
        Ok(BasisSet {
            dim,
            terms,
            vanish_at_origin,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[MultiIndex] {
        &self.terms
    }

    pub fn vanishes_at_origin(&self) -> bool {
        self.vanish_at_origin
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.iter().map(MultiIndex::degree).max().unwrap_or(0)
    }

    /// Position of a monomial, if present.
    pub fn index_of(&self, exponents: &[u32]) -> Option<usize> {
        self.terms.iter().position(|t| t.0 == exponents)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// All basis function values at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.terms.iter().map(|t| t.eval(x)).collect())
    }

    /// Jacobian of the basis at `x`: row `j` is ∇φ_j(x).
    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(x)?;
        Ok(self
            .terms
            .iter()
            .map(|t| (0..self.dim).map(|k| t.partial(x, k)).collect())
            .collect())
    }

    /// Whether `other` contains every monomial of `self` (nested bases).
    pub fn is_subset_of(&self, other: &BasisSet) -> bool {
        self.dim == other.dim && self.terms.iter().all(|t| other.terms.contains(t))
    }

    /// Smallest eigenvalue of the normalized Gram matrix on a point cloud.
    ///
    /// Columns are scaled to unit RMS first, so the value is a scale-free
    /// measure of linear independence on the cloud.
    pub fn gram_min_eigenvalue(&self, points: &[Vec<f64>]) -> Result<f64> {
        let n = self.len();
        let m = points.len();
        let mut a = DMatrix::zeros(m, n);
        for (i, p) in points.iter().enumerate() {
            for (j, v) in self.eval(p)?.into_iter().enumerate() {
                a[(i, j)] = v;
            }
        }
        for j in 0..n {
            let norm = a.column(j).norm() / (m as f64).sqrt();
            if norm > 0.0 {
                a.column_mut(j).scale_mut(1.0 / norm);
            }
        }
        let gram = a.transpose() * &a / m as f64;
        let eig = SymmetricEigen::new(gram);
        Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
    }
}

/// Weighted sum `Σ w_j φ_j(x)` over a [`BasisSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Approximant {
    basis: BasisSet,
    weights: Vec<f64>,
}

impl Approximant {
    pub fn new(basis: BasisSet, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: weights.len(),
            });
        }
        Ok(Approximant { basis, weights })
    }

    pub fn zero(basis: BasisSet) -> Self {
        let weights = vec![0.0; basis.len()];
        Approximant { basis, weights }
    }

    /// Linear map `x ↦ Σ k_i x_i` on a basis that must contain every
    /// first-degree monomial.
    pub fn linear(basis: BasisSet, gains: &[f64]) -> Result<Self> {
        let dim = basis.dim();
        if gains.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: gains.len(),
            });
        }
        let mut weights = vec![0.0; basis.len()];
        for (i, &k) in gains.iter().enumerate() {
            let mut e = vec![0u32; dim];
            e[i] = 1;
            let j = basis.index_of(&e).ok_or_else(|| {
                Error::InvalidArgument(format!("basis lacks the linear term x{}", i + 1))
            })?;
            weights[j] = k;
        }
        Ok(Approximant { basis, weights })
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Weight of the monomial with the given exponents, zero if absent.
    pub fn coefficient(&self, exponents: &[u32]) -> f64 {
        self.basis
            .index_of(exponents)
            .map_or(0.0, |j| self.weights[j])
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.basis.check_dim(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.basis.check_dim(x)?;
        Ok(self.gradient_unchecked(x))
    }

    /// Evaluation without the dimension check, for hot loops whose inputs
    /// were validated upstream.
    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.basis
            .terms
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w != 0.0)
            .map(|(t, &w)| w * t.eval(x))
            .sum()
    }

    pub(crate) fn gradient_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.basis.dim];
        for (t, &w) in self.basis.terms.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            for (k, gk) in g.iter_mut().enumerate() {
                *gk += w * t.partial(x, k);
            }
        }
        g
    }

    /// Pointwise linear combination `a·self + b·other` on a shared basis.
    pub fn combine(&self, a: f64, other: &Approximant, b: f64) -> Result<Approximant> {
        if self.basis != other.basis {
            return Err(Error::InvalidArgument(
                "approximants live on different bases".into(),
            ));
        }
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Approximant {
            basis: self.basis.clone(),
            weights,
        })
    }

    /// Re-express on a larger basis that contains every term of this one.
    pub fn embed(&self, target: &BasisSet) -> Result<Approximant> {
        if !self.basis.is_subset_of(target) {
            return Err(Error::InvalidArgument(
                "target basis does not contain the source basis".into(),
            ));
        }
        let mut weights = vec![0.0; target.len()];
        for (t, &w) in self.basis.terms.iter().zip(&self.weights) {
            let j = target.index_of(&t.0).expect("subset checked");
            weights[j] = w;
        }
        Ok(Approximant {
            basis: target.clone(),
            weights,
        })
    }
}
