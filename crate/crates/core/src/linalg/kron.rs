use super::matrix::ComplexMatrix;
use crate::error::{OtkError, Result};

/// Default cap on any generated matrix dimension.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Kronecker product with the default dimension cap.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    kron_capped(a, b, DEFAULT_DIM_CAP)
}

pub fn kron_capped(a: &ComplexMatrix, b: &ComplexMatrix, cap: usize) -> Result<ComplexMatrix> {
    let rows = a.rows().checked_mul(b.rows());
    let cols = a.cols().checked_mul(b.cols());
    let (rows, cols) = match (rows, cols) {
        (Some(r), Some(c)) if r <= cap && c <= cap => (r, c),
        (r, c) => {
            return Err(OtkError::SizeOverflow {
                dim: r.unwrap_or(usize::MAX).max(c.unwrap_or(usize::MAX)),
                cap,
            })
        }
    };
    let mut out = ComplexMatrix::zeros(rows, cols);
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let s = a[(i, j)];
            if s.re == 0.0 && s.im == 0.0 {
                continue;
            }
            for k in 0..b.rows() {
                for l in 0..b.cols() {
                    out[(i * b.rows() + k, j * b.cols() + l)] = s * b[(k, l)];
                }
            }
        }
    }
    Ok(out)
}

/// `I_{left} ⊗ x ⊗ I_{right}`.
pub fn embed_factor(x: &ComplexMatrix, left: usize, right: usize, cap: usize) -> Result<ComplexMatrix> {
    let inner = kron_capped(x, &ComplexMatrix::identity(right), cap)?;
    kron_capped(&ComplexMatrix::identity(left), &inner, cap)
}
