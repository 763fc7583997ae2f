//! Chebyshev radius of the joint spectrum of a commuting normal tuple.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{OtkError, Result};
use crate::linalg::{hermitian_eig, smallest_enclosing_ball, ComplexMatrix};
use crate::tuple::{tuple_norm, OperatorTuple, Shift};

/// Residual allowed in the joint eigen-equations, relative to `1 + ‖A‖`.
const NORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChebyshevResult {
    pub radius: f64,
    pub center: Shift,
    /// Joint eigenvalues, one point of `C^d` per eigenvector.
    pub spectrum: Vec<Vec<Complex64>>,
}

/// Joint eigenvalues of a diagonal or simultaneously unitarily diagonalizable
/// tuple, through the eigenvectors of a generic Hermitian combination.
fn joint_spectrum(a: &OperatorTuple) -> Result<Vec<Vec<Complex64>>> {
    let n = a.n();
    let off_diag = a
        .matrices()
        .iter()
        .flat_map(|m| (0..n).flat_map(move |i| (0..n).filter(move |&k| k != i).map(move |k| m[(i, k)].norm())))
        .fold(0.0, f64::max);
    let tol = NORMAL_TOL * (1.0 + tuple_norm(a));
    if off_diag <= tol {
        return Ok((0..n).map(|i| a.matrices().iter().map(|m| m[(i, i)]).collect()).collect());
    }
    // fixed irrational-looking weights keep the combination generic
    let mut h = ComplexMatrix::zeros(n, n);
    for (j, m) in a.matrices().iter().enumerate() {
        let re = 1.0 + 0.618_033_988_7 * (j as f64 + 1.0).sqrt();
        let im = 0.414_213_562_4 + 0.271_828_182_8 * j as f64;
        h.axpy(Complex64::new(re, 0.0), &m.hermitian_part());
        let skew = (m - &m.adjoint()).scale(Complex64::new(0.0, -0.5));
        h.axpy(Complex64::new(im, 0.0), &skew.hermitian_part());
    }
    let eig = hermitian_eig(&h)?;
    let mut worst: f64 = 0.0;
    let mut points = Vec::with_capacity(n);
    for k in 0..n {
        let v = eig.eigenvector(k);
        let lam: Vec<Complex64> = a.expectations(&v);
        for (m, l) in a.matrices().iter().zip(&lam) {
            let r: f64 = m
                .matvec(&v)
                .iter()
                .zip(&v)
                .map(|(x, y)| (x - y * l).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r);
        }
        points.push(lam);
    }
    if worst > tol.max(1e-8 * (1.0 + tuple_norm(a))) {
        return Err(OtkError::NotNormalCommuting(worst));
    }
    Ok(points)
}

/// Smallest enclosing ball of the joint spectrum in `R^{2d}`, center read as `z ∈ C^d`.
pub fn chebyshev_radius_normal(a: &OperatorTuple) -> Result<ChebyshevResult> {
    let spectrum = joint_spectrum(a)?;
    let pts: Vec<Vec<f64>> = spectrum.iter().map(|p| p.iter().flat_map(|z| [z.re, z.im]).collect()).collect();
    let ball = smallest_enclosing_ball(&pts)?;
    Ok(ChebyshevResult {
        radius: ball.radius,
        center: Shift::from_real(&ball.center),
        spectrum,
    })
}
