//! Dense linear-quadratic solvers for linear benchmarks.
//!
//! These work directly on matrices and never touch the basis-function
//! machinery, which makes them usable as references for the learners.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Solve `Aᵀ P + P A + Q = 0` by Kronecker vectorisation.
pub fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    // vec(AᵀP + PA) = (I⊗Aᵀ + Aᵀ⊗I) vec(P)
    let k = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -DMatrix::from_column_slice(n * n, 1, q.as_slice());
    let lu = k.lu();
    let sol = lu
        .solve(&rhs)
        .ok_or(Error::RankDeficient { ratio: 0.0, tolerance: 0.0 })?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

/// Stabilising solution of `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` via the matrix
/// sign function of the Hamiltonian.
pub fn care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let rinv = r
        .clone()
        .try_inverse()
        .ok_or(Error::RankDeficient { ratio: 0.0, tolerance: 0.0 })?;
    let s = b * rinv * b.transpose();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let mut z = h;
    for _ in 0..100 {
        let zi = z
            .clone()
            .try_inverse()
            .ok_or(Error::RankDeficient { ratio: 0.0, tolerance: 0.0 })?;
        // determinant scaling speeds up the Newton iteration
        let det = z.determinant().abs();
        let c = if det > 0.0 && det.is_finite() {
            det.powf(-1.0 / (2 * n) as f64)
        } else {
            1.0
        };
        let next = (&z * c + zi / c) * 0.5;
        let diff = (&next - &z).norm() / next.norm();
        z = next;
        if diff < 1e-14 {
            break;
        }
    }
    let w11 = z.view((0, 0), (n, n)).clone_owned();
    let w12 = z.view((0, n), (n, n)).clone_owned();
    let w21 = z.view((n, 0), (n, n)).clone_owned();
    let w22 = z.view((n, n), (n, n)).clone_owned();
    let eye = DMatrix::<f64>::identity(n, n);
    // [W12; W22 + I] P = −[W11 + I; W21]
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w22 + &eye));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w11 + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));
    let p = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((&p + p.transpose()) * 0.5)
}

/// One Kleinman step record: `P_i` for gain `K_i`, and `K_{i+1} = R⁻¹BᵀP_i`.
#[derive(Debug, Clone)]
pub struct KleinmanStep {
    pub gain: DMatrix<f64>,
    pub value: DMatrix<f64>,
    pub next_gain: DMatrix<f64>,
}

/// Kleinman's iteration from a stabilising gain `K₀` (policy `u = −K x`).
pub fn kleinman(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    k0: &DMatrix<f64>,
    iterations: usize,
) -> Result<Vec<KleinmanStep>> {
    let rinv = r
        .clone()
        .try_inverse()
        .ok_or(Error::RankDeficient { ratio: 0.0, tolerance: 0.0 })?;
    let mut k = k0.clone();
    let mut out = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let ak = a - b * &k;
        let qk = q + k.transpose() * r * &k;
        let p = lyapunov(&ak, &qk)?;
        let next = &rinv * b.transpose() * &p;
        out.push(KleinmanStep {
            gain: k.clone(),
            value: p,
            next_gain: next.clone(),
        });
        k = next;
    }
    Ok(out)
}

/// Largest real part among the eigenvalues of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_lyapunov() {
        let a = DMatrix::from_element(1, 1, -1.0);
        let q = DMatrix::from_element(1, 1, 1.0);
        assert!((lyapunov(&a, &q).unwrap()[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn scalar_riccati() {
        let a = DMatrix::from_element(1, 1, -1.0);
        let one = DMatrix::from_element(1, 1, 1.0);
        let p = care(&a, &one, &one, &one).unwrap();
        assert!((p[(0, 0)] - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn kleinman_converges_to_care() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let q = DMatrix::identity(2, 2);
        let r = DMatrix::identity(1, 1);
        let k0 = DMatrix::from_row_slice(1, 2, &[5.0, 3.0]);
        assert!(spectral_abscissa(&(&a - &b * &k0)) < 0.0);
        let steps = kleinman(&a, &b, &q, &r, &k0, 12).unwrap();
        let p = care(&a, &b, &q, &r).unwrap();
        assert!((&steps.last().unwrap().value - &p).norm() < 1e-10 * p.norm());
        // residual of the Riccati equation
        let res = a.transpose() * &p + &p * &a - &p * &b * b.transpose() * &p + &q;
        assert!(res.norm() < 1e-10);
    }
}
