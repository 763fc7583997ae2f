//! Operator tuples `A = (A_1, ..., A_d)` and their elementary functionals.

mod gallery;
mod generators;

pub use gallery::{gallery, GalleryName};
pub use generators::{
    gen_commuting_normal, gen_doubly, gen_toeplitz, BlockSpec, Conjugation, FactorFill, FactorSpec,
    ToeplitzSymbol,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{OtkError, Result};
use crate::linalg::matrix::{inner, norm_sqr, ComplexMatrix};
use crate::linalg::{hermitian_eig, EigenDecomposition};

/// Unit-norm tolerance for vectors passed to [`variance`].
pub const UNIT_TOL: f64 = 1e-10;
/// Negative variances down to this magnitude (relative) are treated as rounding.
pub const VARIANCE_CLAMP: f64 = 1e-12;

/// Ordered list of `d >= 1` square matrices of a common size `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTuple {
    matrices: Vec<ComplexMatrix>,
}

impl OperatorTuple {
    pub fn new(matrices: Vec<ComplexMatrix>) -> Result<Self> {
        let first = matrices.first().ok_or(OtkError::EmptyInput)?;
        let n = first.rows();
        for (j, m) in matrices.iter().enumerate() {
            if !m.is_square() || m.rows() != n {
                return Err(OtkError::InvalidInput(format!(
                    "matrix {j} is {}x{}, expected {n}x{n}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        Ok(Self { matrices })
    }

    /// Tuple length.
    #[inline]
    pub fn d(&self) -> usize {
        self.matrices.len()
    }

    /// Space dimension.
    #[inline]
    pub fn n(&self) -> usize {
        self.matrices[0].rows()
    }

    #[inline]
    pub fn matrices(&self) -> &[ComplexMatrix] {
        &self.matrices
    }

    #[inline]
    pub fn get(&self, j: usize) -> &ComplexMatrix {
        &self.matrices[j]
    }

    pub fn into_matrices(self) -> Vec<ComplexMatrix> {
        self.matrices
    }

    /// Applies `f` to every component.
    pub fn map(&self, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        Self {
            matrices: self.matrices.iter().map(f).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|m| m.scale_real(s))
    }

    /// `(U^* A_j U)_j`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        self.map(|m| u.adjoint().matmul(m).matmul(u))
    }

    /// Tuple of scalars `z_j I_n`.
    pub fn scalar(z: &[Complex64], n: usize) -> Result<Self> {
        Self::new(z.iter().map(|&v| ComplexMatrix::scalar(n, v)).collect())
    }

    /// `(<x|A_1 x>, ..., <x|A_d x>)`.
    pub fn expectations(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.matrices.iter().map(|m| m.quad_form(x)).collect()
    }

    /// `‖A x‖² = Σ ‖A_j x‖²`.
    pub fn apply_norm_sqr(&self, x: &[Complex64]) -> f64 {
        self.matrices.iter().map(|m| norm_sqr(&m.matvec(x))).sum()
    }
}

/// Shift vector `z ∈ C^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shift(pub Vec<Complex64>);

impl Shift {
    pub fn zeros(d: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.0).sqrt()
    }

    /// Real coordinates `(Re z_1, Im z_1, ..., Re z_d, Im z_d)`.
    pub fn to_real(&self) -> Vec<f64> {
        self.0.iter().flat_map(|z| [z.re, z.im]).collect()
    }

    pub fn from_real(v: &[f64]) -> Self {
        Self(v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect())
    }
}

impl From<Vec<Complex64>> for Shift {
    fn from(v: Vec<Complex64>) -> Self {
        Self(v)
    }
}

/// `Σ A_j^* A_j`, exactly Hermitian.
pub fn gram(a: &OperatorTuple) -> ComplexMatrix {
    let n = a.n();
    let mut g = ComplexMatrix::zeros(n, n);
    for m in a.matrices() {
        g.axpy(Complex64::new(1.0, 0.0), &m.adjoint_mul(m));
    }
    g.hermitian_part()
}

pub fn gram_eig(a: &OperatorTuple) -> EigenDecomposition {
    hermitian_eig(&gram(a)).expect("gram matrix is Hermitian and the eigensolver converges")
}

/// `‖A‖ = λ_max(Σ A_j^* A_j)^{1/2}`.
pub fn tuple_norm(a: &OperatorTuple) -> f64 {
    gram_eig(a).max_eigenvalue().max(0.0).sqrt()
}

/// `A - zI`, componentwise.
pub fn shift(a: &OperatorTuple, z: &Shift) -> Result<OperatorTuple> {
    if z.len() != a.d() {
        return Err(OtkError::LengthMismatch {
            expected: a.d(),
            got: z.len(),
        });
    }
    Ok(OperatorTuple {
        matrices: a
            .matrices()
            .iter()
            .zip(&z.0)
            .map(|(m, &zj)| m.sub_scalar(zj))
            .collect(),
    })
}

/// `var_x(A) = ‖A x‖² - Σ |<x|A_j x>|²` for a unit vector `x`.
pub fn variance(a: &OperatorTuple, x: &[Complex64]) -> Result<f64> {
    if x.len() != a.n() {
        return Err(OtkError::LengthMismatch {
            expected: a.n(),
            got: x.len(),
        });
    }
    let xn = norm_sqr(x).sqrt();
    if (xn - 1.0).abs() > UNIT_TOL {
        return Err(OtkError::NotUnitVector(xn));
    }
    let (v, total) = variance_unchecked(a, x);
    clamp_variance(v, total)
}

/// Returns `(variance, ‖A x‖²)` without validating `x`.
pub(crate) fn variance_unchecked(a: &OperatorTuple, x: &[Complex64]) -> (f64, f64) {
    let mut total = 0.0;
    let mut means = 0.0;
    for m in a.matrices() {
        let ax = m.matvec(x);
        total += norm_sqr(&ax);
        means += inner(x, &ax).norm_sqr();
    }
    (total - means, total)
}

fn clamp_variance(v: f64, scale: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -VARIANCE_CLAMP * (1.0 + scale) {
        Ok(0.0)
    } else {
        Err(OtkError::InternalConsistency(format!("negative variance {v:e}")))
    }
}

/// Outcome of [`is_doubly_commuting`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutationReport {
    pub doubly_commuting: bool,
    /// Largest Frobenius norm of `A_iA_j - A_jA_i` or `A_i^*A_j - A_jA_i^*` over `i != j`.
    pub max_residual: f64,
    pub threshold: f64,
}

/// Checks `A_iA_j = A_jA_i` and `A_i^*A_j = A_jA_i^*` for all `i != j`, up to
/// `tol (1 + ‖A‖²)`. Frobenius norms are used, which bound the operator norm.
pub fn is_doubly_commuting(a: &OperatorTuple, tol: f64) -> CommutationReport {
    let norm2 = tuple_norm(a).powi(2);
    let threshold = tol * (1.0 + norm2);
    let mut worst: f64 = 0.0;
    let mats = a.matrices();
    for i in 0..mats.len() {
        for j in 0..mats.len() {
            if i == j {
                continue;
            }
            let comm = &mats[i].matmul(&mats[j]) - &mats[j].matmul(&mats[i]);
            let adj = &mats[i].adjoint_mul(&mats[j]) - &mats[j].matmul(&mats[i].adjoint());
            worst = worst.max(comm.frobenius_norm()).max(adj.frobenius_norm());
        }
    }
    CommutationReport {
        doubly_commuting: worst <= threshold,
        max_residual: worst,
        threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, random_unitary, rng_for, unit_vector, complex_gaussian};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_tuple(seed: u64, n: usize, d: usize) -> OperatorTuple {
        let mut rng = rng_for(seed, 0);
        OperatorTuple::new((0..d).map(|_| gaussian_matrix(n, n, &mut rng)).collect()).unwrap()
    }

    #[test]
    fn rejects_mixed_sizes() {
        let r = OperatorTuple::new(vec![ComplexMatrix::identity(2), ComplexMatrix::identity(3)]);
        assert!(r.is_err());
        assert!(matches!(OperatorTuple::new(vec![]), Err(OtkError::EmptyInput)));
        let rect = ComplexMatrix::zeros(2, 3);
        assert!(OperatorTuple::new(vec![rect]).is_err());
    }

    #[test]
    fn gram_examples() {
        let p = gallery(GalleryName::Pauli);
        assert!((&gram(&p) - &ComplexMatrix::scalar(2, c(3.0, 0.0))).max_abs() < 1e-15);
        let z = OperatorTuple::new(vec![ComplexMatrix::zeros(3, 3); 2]).unwrap();
        assert_eq!(gram(&z), ComplexMatrix::zeros(3, 3));
        let e = gallery(GalleryName::Ex2);
        assert_eq!(gram(&e), ComplexMatrix::from_diag(&[c(2.0, 0.0), c(0.0, 0.0)]));
    }

    #[test]
    fn norm_examples() {
        assert!((tuple_norm(&gallery(GalleryName::Pauli)) - 3f64.sqrt()).abs() < 1e-14);
        assert!((tuple_norm(&gallery(GalleryName::Ex2)) - 2f64.sqrt()).abs() < 1e-14);
        let mut rng = rng_for(1, 0);
        let u = OperatorTuple::new(vec![random_unitary(5, &mut rng)]).unwrap();
        assert!((tuple_norm(&u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shift_examples() {
        let e = gallery(GalleryName::Ex2);
        assert_eq!(shift(&e, &Shift::zeros(2)).unwrap(), e);
        let a0 = shift(&e, &Shift(vec![c(1.0, 0.0), c(0.0, 0.0)])).unwrap();
        let want1 = ComplexMatrix::from_real_rows(&[&[0.0, 0.0], &[0.0, -1.0]]).unwrap();
        let want2 = ComplexMatrix::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]).unwrap();
        assert_eq!(a0.get(0), &want1);
        assert_eq!(a0.get(1), &want2);
        assert!(matches!(
            shift(&e, &Shift::zeros(3)),
            Err(OtkError::LengthMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn variance_examples() {
        let p = gallery(GalleryName::Pauli);
        let mut rng = rng_for(2, 0);
        for _ in 0..20 {
            let x = unit_vector(2, &mut rng);
            assert!((variance(&p, &x).unwrap() - 2.0).abs() < 1e-13);
        }
        let h = ComplexMatrix::from_real_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        let single = OperatorTuple::new(vec![h]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(variance(&single, &[c(s, 0.0), c(s, 0.0)]).unwrap().abs() < 1e-15);
        let e = gallery(GalleryName::Ex2);
        assert!((variance(&e, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            variance(&e, &[c(1.0, 0.0), c(1.0, 0.0)]),
            Err(OtkError::NotUnitVector(_))
        ));
    }

    #[test]
    fn commutation_examples() {
        let d = OperatorTuple::new(vec![
            ComplexMatrix::from_diag(&[c(1.0, 2.0), c(-1.0, 0.0)]),
            ComplexMatrix::from_diag(&[c(0.0, 1.0), c(3.0, 0.0)]),
        ])
        .unwrap();
        assert!(is_doubly_commuting(&d, 1e-12).doubly_commuting);
        let p = is_doubly_commuting(&gallery(GalleryName::Pauli), 1e-10);
        assert!(!p.doubly_commuting);
        // σ1σ2 - σ2σ1 = 2iσ3 has Frobenius norm 2√2
        assert!((p.max_residual - 2.0 * 2f64.sqrt()).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn shift_composes(seed in 0u64..1000, n in 1usize..6, d in 1usize..4) {
            let a = random_tuple(seed, n, d);
            let mut rng = rng_for(seed, 7);
            let z = Shift((0..d).map(|_| complex_gaussian(&mut rng)).collect());
            let w = Shift((0..d).map(|_| complex_gaussian(&mut rng)).collect());
            let zw = Shift(z.0.iter().zip(&w.0).map(|(a, b)| a + b).collect());
            let lhs = shift(&shift(&a, &z).unwrap(), &w).unwrap();
            let rhs = shift(&a, &zw).unwrap();
            for (l, r) in lhs.matrices().iter().zip(rhs.matrices()) {
                prop_assert!((l - r).max_abs() < 1e-14);
            }
        }

        #[test]
        fn variance_translation_invariant_and_bounded(seed in 0u64..1000, n in 1usize..9, d in 1usize..5) {
            let a = random_tuple(seed, n, d);
            let mut rng = rng_for(seed, 3);
            let z = Shift((0..d).map(|_| complex_gaussian(&mut rng) * 2.0).collect());
            let x = unit_vector(n, &mut rng);
            let v = variance(&a, &x).unwrap();
            let vs = variance(&shift(&a, &z).unwrap(), &x).unwrap();
            prop_assert!((v - vs).abs() < 1e-10);
            let ax = a.apply_norm_sqr(&x);
            let nrm = tuple_norm(&a);
            prop_assert!(v >= 0.0);
            prop_assert!(v <= ax + 1e-12);
            prop_assert!(ax <= nrm * nrm * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn norm_unitarily_invariant(seed in 0u64..1000, n in 1usize..8, d in 1usize..4) {
            let a = random_tuple(seed, n, d);
            let u = random_unitary(n, &mut rng_for(seed, 5));
            prop_assert!((tuple_norm(&a.conjugate_by(&u)) - tuple_norm(&a)).abs() < 1e-10);
        }
    }
}
