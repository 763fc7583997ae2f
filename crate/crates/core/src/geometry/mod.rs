//! Joint numerical range `W(A)`, the maximal joint numerical range `V(A)`
//! (the range of the compression to the top eigenspace of `Σ A_j^* A_j`),
//! membership certificates for the origin, and the product/block structure of
//! `V` on doubly commuting tuples.

mod membership;
mod planar;
mod structure;

pub use membership::{
    membership_zero_in_conv_v, membership_zero_in_conv_v_with, membership_zero_in_v,
    membership_zero_in_v_with, ConvMembership, MembershipOptions, VMembership,
    CONV_MAX_ITER, DEFAULT_RESTARTS, TOL_MEMBER,
};
pub use planar::PlanarRange;
pub use structure::{v_block_formula_check, v_product_check, BlockReport, ProductReport};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{OtkError, Result};
use crate::linalg::hull::hull_distance;
use crate::linalg::matrix::{inner, ComplexMatrix};
use crate::linalg::hermitian_eig;
use crate::parallel::map_indexed;
use crate::random::{real_unit_vector, rng_for, unit_vector};
use crate::tuple::{gram_eig, OperatorTuple};

/// Default relative width of the top eigenvalue cluster.
pub const DEFAULT_REL_TOL: f64 = 1e-8;

/// Stream offset separating boundary-direction draws from random-vector draws.
const BOUNDARY_STREAM: u64 = 1 << 40;

/// Orthonormal basis of the numerical `λ_max`-eigenspace of `Σ A_j^* A_j`.
#[derive(Debug, Clone)]
pub struct TopEigenspace {
    /// `n x m`, orthonormal columns.
    pub basis: ComplexMatrix,
    pub lambda_max: f64,
    pub rel_tol: f64,
}

impl TopEigenspace {
    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    /// Maps coordinates in the eigenspace back to `C^n`.
    pub fn lift(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.basis.matvec(y)
    }

    /// Coordinates of `x` in the eigenspace (orthogonal projection).
    pub fn coordinates(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.basis.adjoint_matvec(x)
    }
}

/// Eigenvectors of the gram matrix with `λ >= (1 - rel_tol) λ_max`.
///
/// A gram matrix that is numerically scalar keeps the standard basis, so the
/// compression is the tuple itself.
pub fn top_eigenspace(a: &OperatorTuple, rel_tol: f64) -> TopEigenspace {
    let eig = gram_eig(a);
    let lambda_max = eig.max_eigenvalue();
    let cut = lambda_max - rel_tol * lambda_max.abs();
    let n = eig.dim();
    let first = eig.eigenvalues.iter().position(|&l| l >= cut).unwrap_or(n - 1);
    let basis = if first == 0 {
        ComplexMatrix::identity(n)
    } else {
        let cols: Vec<Vec<Complex64>> = (first..n).map(|i| eig.eigenvector(i)).collect();
        ComplexMatrix::from_columns(n, &cols)
    };
    TopEigenspace {
        basis,
        lambda_max,
        rel_tol,
    }
}

/// `B_j = E^* A_j E`.
pub fn compress(a: &OperatorTuple, e: &TopEigenspace) -> OperatorTuple {
    a.map(|m| e.basis.adjoint_mul(&m.matmul(&e.basis)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RangeKind {
    W,
    V,
}

/// Point cloud in `C^d` with the unit vectors generating each point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RangeSample {
    pub kind: RangeKind,
    pub points: Vec<Vec<Complex64>>,
    pub witnesses: Vec<Vec<Complex64>>,
    pub seed: u64,
    pub count: usize,
    pub boundary_dirs: usize,
}

impl RangeSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points as vectors in `R^{2d}`: `(re λ_1, im λ_1, ...)`.
    pub fn real_points(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| realify(p)).collect()
    }

    /// Largest deviation between a stored point and the one recomputed from its witness.
    pub fn reproduction_error(&self, a: &OperatorTuple) -> f64 {
        self.points
            .iter()
            .zip(&self.witnesses)
            .map(|(p, x)| point_distance(p, &a.expectations(x)))
            .fold(0.0, f64::max)
    }

    /// CSV with a header row and columns `re1,im1,...,red,imd`.
    pub fn to_csv(&self) -> String {
        let d = self.points.first().map_or(0, Vec::len);
        let mut out = String::new();
        let header: Vec<String> = (1..=d).flat_map(|j| [format!("re{j}"), format!("im{j}")]).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for p in &self.points {
            let row: Vec<String> = p
                .iter()
                .flat_map(|z| [format!("{:.16e}", z.re), format!("{:.16e}", z.im)])
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

pub(crate) fn realify(p: &[Complex64]) -> Vec<f64> {
    p.iter().flat_map(|z| [z.re, z.im]).collect()
}

pub(crate) fn point_distance(p: &[Complex64], q: &[Complex64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
}

/// `½ Σ_j (conj(c_j) A_j + c_j A_j^*)`, whose quadratic form at `x` is
/// `Re Σ_j conj(c_j) <x|A_j x>`.
pub(crate) fn pencil(a: &OperatorTuple, c: &[Complex64]) -> ComplexMatrix {
    let n = a.n();
    let mut h = ComplexMatrix::zeros(n, n);
    for (m, &cj) in a.matrices().iter().zip(c) {
        h.axpy(cj.conj(), m);
    }
    h.hermitian_part()
}

/// Seeded sample of `W(A)`: `count` uniform unit vectors plus one support
/// point of `conv W(A)` for each of `boundary_dirs` random directions.
pub fn sample_w(a: &OperatorTuple, count: usize, seed: u64, boundary_dirs: usize) -> Result<RangeSample> {
    if count == 0 {
        return Err(OtkError::InvalidInput("sample count must be at least 1".into()));
    }
    let n = a.n();
    let d = a.d();
    let mut witnesses = map_indexed(count, |i| {
        let mut rng = rng_for(seed, i as u64);
        unit_vector(n, &mut rng)
    });
    let boundary = map_indexed(boundary_dirs, |i| {
        let mut rng = rng_for(seed, BOUNDARY_STREAM + i as u64);
        let c = real_unit_vector(2 * d, &mut rng);
        let cz: Vec<Complex64> = c.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        hermitian_eig(&pencil(a, &cz))
            .expect("pencil is Hermitian by construction")
            .top_eigenvector()
    });
    witnesses.extend(boundary);
    let points = witnesses.iter().map(|x| a.expectations(x)).collect();
    Ok(RangeSample {
        kind: RangeKind::W,
        points,
        witnesses,
        seed,
        count,
        boundary_dirs,
    })
}

/// Seeded sample of `V(A)` with the default eigenspace tolerance.
pub fn sample_v(a: &OperatorTuple, count: usize, seed: u64, boundary_dirs: usize) -> Result<RangeSample> {
    sample_v_with(a, count, seed, boundary_dirs, DEFAULT_REL_TOL)
}

/// `sample_w` of the compression to the top eigenspace, witnesses lifted to `C^n`.
pub fn sample_v_with(
    a: &OperatorTuple,
    count: usize,
    seed: u64,
    boundary_dirs: usize,
    rel_tol: f64,
) -> Result<RangeSample> {
    let e = top_eigenspace(a, rel_tol);
    let b = compress(a, &e);
    let mut s = sample_w(&b, count, seed, boundary_dirs)?;
    s.kind = RangeKind::V;
    s.witnesses = s.witnesses.iter().map(|y| e.lift(y)).collect();
    // recompute on the original tuple so points and witnesses agree exactly
    s.points = s.witnesses.iter().map(|x| a.expectations(x)).collect();
    Ok(s)
}

/// Sampled-hull diagnostics. Neither number decides convexity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HullDiagnostic {
    /// Largest distance from a random-vector point to the hull of the boundary points.
    pub boundary_hull_excess: f64,
    /// Distance from the sample mean to the nearest sample point. Large values
    /// mean the cloud is hollow around a point of its own convex hull.
    pub centroid_gap: f64,
    pub probed: usize,
}

/// Diagnostics on at most `probe` random-vector points of the sample.
pub fn hull_diagnostic(sample: &RangeSample, probe: usize) -> Result<HullDiagnostic> {
    if sample.is_empty() {
        return Err(OtkError::EmptyInput);
    }
    let pts = sample.real_points();
    let boundary: Vec<Vec<f64>> = pts[sample.count..].to_vec();
    let probed = probe.min(sample.count);
    let boundary_hull_excess = if boundary.is_empty() {
        0.0
    } else {
        map_indexed(probed, |i| hull_distance(&pts[i], &boundary).map(|h| h.distance))
            .into_iter()
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max)
    };
    let k = pts[0].len();
    let mean: Vec<f64> = (0..k)
        .map(|t| pts.iter().map(|p| p[t]).sum::<f64>() / pts.len() as f64)
        .collect();
    let centroid_gap = pts
        .iter()
        .map(|p| p.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min);
    Ok(HullDiagnostic {
        boundary_hull_excess,
        centroid_gap,
        probed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    DensityMatrix,
    WitnessVector,
}

/// Either `T = Σ s_i x_i x_i^*` (orthonormal `x_i`, `Σ s_i = 1`) or a single unit vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub weights: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
    /// `(Σ_j |tr(A_j T)|²)^{1/2}` recomputed on the original tuple.
    pub residual: f64,
}

impl Certificate {
    pub fn witness(a: &OperatorTuple, x: Vec<Complex64>) -> Self {
        let residual = a.expectations(&x).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        Self {
            kind: CertificateKind::WitnessVector,
            weights: vec![1.0],
            vectors: vec![x],
            residual,
        }
    }

    /// `(tr(A_j T))_j`.
    pub fn expectations(&self, a: &OperatorTuple) -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); a.d()];
        for (s, x) in self.weights.iter().zip(&self.vectors) {
            for (t, e) in acc.iter_mut().zip(a.expectations(x)) {
                *t += e * s;
            }
        }
        acc
    }

    /// Largest `|<x_i|x_k> - δ_ik|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, x) in self.vectors.iter().enumerate() {
            for (k, y) in self.vectors.iter().enumerate() {
                let target = if i == k { 1.0 } else { 0.0 };
                worst = worst.max((inner(x, y) - target).norm());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tuple::{gallery, shift, GalleryName, Shift};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ex2_zero() -> OperatorTuple {
        shift(&gallery(GalleryName::Ex2), &Shift(vec![c(1.0, 0.0), c(0.0, 0.0)])).unwrap()
    }

    fn diag02() -> OperatorTuple {
        OperatorTuple::new(vec![ComplexMatrix::from_diag(&[c(0.0, 0.0), c(2.0, 0.0)])]).unwrap()
    }

    #[test]
    fn top_eigenspace_examples() {
        let p = top_eigenspace(&gallery(GalleryName::Pauli), DEFAULT_REL_TOL);
        assert_eq!(p.dim(), 2);
        assert!((p.lambda_max - 3.0).abs() < 1e-12);
        let e = top_eigenspace(&gallery(GalleryName::Ex2), DEFAULT_REL_TOL);
        assert_eq!(e.dim(), 1);
        assert!((e.basis[(0, 0)].norm() - 1.0).abs() < 1e-12 && e.basis[(1, 0)].norm() < 1e-12);
        assert_eq!(top_eigenspace(&ex2_zero(), DEFAULT_REL_TOL).dim(), 2);
    }

    #[test]
    fn compress_examples() {
        let pauli = gallery(GalleryName::Pauli);
        assert_eq!(compress(&pauli, &top_eigenspace(&pauli, DEFAULT_REL_TOL)), pauli);
        let ex2 = gallery(GalleryName::Ex2);
        let b = compress(&ex2, &top_eigenspace(&ex2, DEFAULT_REL_TOL));
        assert_eq!(b.n(), 1);
        assert!((b.get(0)[(0, 0)] - c(1.0, 0.0)).norm() < 1e-12);
        assert!(b.get(1)[(0, 0)].norm() < 1e-12);
    }

    #[test]
    fn sample_w_normal_matrix() {
        let s = sample_w(&diag02(), 500, 3, 64).unwrap();
        assert_eq!(s.len(), 564);
        for p in &s.points {
            assert!(p[0].im.abs() < 1e-12 && p[0].re > -1e-12 && p[0].re < 2.0 + 1e-12);
        }
        for p in &s.points[500..] {
            let r = p[0].re;
            assert!(r.abs() < 1e-12 || (r - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_w_pauli_on_bloch_sphere() {
        let s = sample_w(&gallery(GalleryName::Pauli), 2000, 11, 200).unwrap();
        for p in &s.points {
            assert!(p.iter().all(|z| z.im.abs() < 1e-10));
            let r: f64 = p.iter().map(|z| z.re * z.re).sum();
            assert!((r - 1.0).abs() < 1e-10);
        }
        assert!(s.reproduction_error(&gallery(GalleryName::Pauli)) < 1e-10);
    }

    #[test]
    fn sample_w_scalar_tuple() {
        let z = [c(0.5, -1.0), c(2.0, 0.0)];
        let a = OperatorTuple::scalar(&z, 3).unwrap();
        let s = sample_w(&a, 50, 1, 10).unwrap();
        assert!(s.points.iter().all(|p| point_distance(p, &z) < 1e-12));
    }

    #[test]
    fn sample_v_examples() {
        let s = sample_v(&ex2_zero(), 800, 5, 100).unwrap();
        for p in &s.points {
            // (-|z_2|², z_2 conj(z_1)) satisfies |w_2|² = -w_1 (1 + w_1)
            assert!(p[0].im.abs() < 1e-12 && p[0].re <= 1e-12);
            assert!((p[1].norm_sqr() + p[0].re * (1.0 + p[0].re)).abs() < 1e-12);
        }
        let s = sample_v(&diag02(), 100, 5, 10).unwrap();
        assert!(s.points.iter().all(|p| (p[0] - c(2.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn sample_v_inside_sample_w() {
        let a = gallery(GalleryName::D2);
        let v = sample_v(&a, 300, 9, 30).unwrap();
        assert_eq!(v.kind, RangeKind::V);
        assert!(v.reproduction_error(&a) < 1e-10);
        for x in &v.witnesses {
            assert!((crate::linalg::matrix::norm(x) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = gallery(GalleryName::Pauli);
        let s1 = sample_w(&a, 100, 42, 10).unwrap();
        let s2 = sample_w(&a, 100, 42, 10).unwrap();
        assert_eq!(s1.to_csv(), s2.to_csv());
        assert!(sample_w(&a, 0, 1, 1).is_err());
    }

    #[test]
    fn csv_layout() {
        let s = sample_w(&gallery(GalleryName::Ex2), 3, 0, 1).unwrap();
        let csv = s.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("re1,im1,re2,im2"));
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn ex2_zero_range_is_hollow() {
        let s = sample_v(&ex2_zero(), 2000, 1, 200).unwrap();
        let diag = hull_diagnostic(&s, 64).unwrap();
        assert!(diag.centroid_gap > 0.3, "{diag:?}");
    }
}
