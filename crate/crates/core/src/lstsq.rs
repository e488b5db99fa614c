//! SVD least squares with column equilibration.

use nalgebra::{DMatrix, DVector};

/// Result of [`solve`].
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `sqrt(Σ e² / rows)`.
    pub residual_rms: f64,
    /// Singular values of the column-equilibrated matrix, descending.
    pub scaled_singular_values: Vec<f64>,
    /// Smallest eigenvalue of `(1/rows)·AᵀA` for the raw matrix.
    pub raw_min_eigenvalue: f64,
}

impl LeastSquares {
    /// `λ_min / λ_max` of `(1/rows)·ÃᵀÃ` for the equilibrated matrix `Ã`.
    pub fn excitation_ratio(&self) -> f64 {
        let s = &self.scaled_singular_values;
        match (s.first(), s.last()) {
            (Some(&hi), Some(&lo)) if hi > 0.0 => (lo / hi).powi(2),
            _ => 0.0,
        }
    }
}

/// Minimum-norm least-squares solution of `A x ≈ b`.
///
/// Columns are scaled to unit Euclidean norm before the SVD; zero columns are
/// left untouched and receive zero weight.
pub fn solve(a: &DMatrix<f64>, b: &[f64]) -> LeastSquares {
    let (m, n) = a.shape();
    assert_eq!(m, b.len());
    let mut scaled = a.clone();
    let mut scale = vec![1.0; n];
    for j in 0..n {
        let c = scaled.column(j).norm();
        if c > 0.0 {
            scale[j] = c;
            scaled.column_mut(j).scale_mut(1.0 / c);
        }
    }
    let rhs = DVector::from_column_slice(b);
    let svd = scaled.clone().svd(true, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let cutoff = sv.first().copied().unwrap_or(0.0) * f64::EPSILON * (m.max(n) as f64);
    let y = svd
        .solve(&rhs, cutoff)
        .unwrap_or_else(|_| DVector::zeros(n));
    let solution: Vec<f64> = y.iter().zip(&scale).map(|(v, s)| v / s).collect();
    let x = DVector::from_column_slice(&solution);
    let r = a * &x - &rhs;
    let residuals: Vec<f64> = r.iter().cloned().collect();
    let residual_rms = if m == 0 {
        0.0
    } else {
        (r.norm_squared() / m as f64).sqrt()
    };
    let raw_min_eigenvalue = if m == 0 || n == 0 {
        0.0
    } else {
        let g = a.transpose() * a / m as f64;
        g.symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    };
    LeastSquares {
        solution,
        residuals,
        residual_rms,
        scaled_singular_values: sv,
        raw_min_eigenvalue,
    }
}
