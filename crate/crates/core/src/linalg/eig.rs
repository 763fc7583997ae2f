//! Hermitian eigensolver: Householder reduction to real symmetric tridiagonal
//! form followed by implicit QL iterations with Wilkinson-style shifts.

use num_complex::Complex64;

use super::matrix::{ComplexMatrix, ONE, ZERO};
use crate::error::{OtkError, Result};

/// Relative Hermitian defect accepted by [`hermitian_eig`].
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Default eigen-residual tolerance.
pub const TOL_EIG: f64 = 1e-10;

const MAX_QL_SWEEPS: usize = 64;

/// Spectral decomposition `M = V diag(eigenvalues) V^*`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns.
    pub eigenvectors: ComplexMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn eigenvector(&self, i: usize) -> Vec<Complex64> {
        self.eigenvectors.column(i)
    }

    /// Eigenvector of the largest eigenvalue.
    pub fn top_eigenvector(&self) -> Vec<Complex64> {
        self.eigenvector(self.dim() - 1)
    }

    /// `V diag(λ) V^*`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.dim();
        let v = &self.eigenvectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for (k, &lam) in self.eigenvalues.iter().enumerate() {
                    acc += v[(i, k)] * v[(j, k)].conj() * lam;
                }
                out[(i, j)] = acc;
            }
        }
        out
    }
}

/// Full eigendecomposition of a Hermitian matrix.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<EigenDecomposition> {
    if !m.is_square() {
        return Err(OtkError::InvalidInput(format!(
            "eigensolver needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let scale = m.frobenius_norm();
    let defect = m.hermitian_defect();
    let limit = HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE);
    if defect > limit {
        return Err(OtkError::NotHermitian { defect, limit });
    }
    let n = m.rows();
    let mut a = m.hermitian_part();
    let mut q = ComplexMatrix::identity(n);
    householder_tridiagonalize(&mut a, &mut q);

    let mut d: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    let mut e = vec![0.0; n];
    // Unitary diagonal scaling turns the complex subdiagonal real and non-negative.
    let mut phase = ONE;
    for i in 0..n {
        if i > 0 {
            let sub = a[(i, i - 1)];
            let mag = sub.norm();
            e[i - 1] = mag;
            if mag > 0.0 {
                phase *= sub / mag;
            }
        }
        if phase != ONE {
            for r in 0..n {
                q[(r, i)] *= phase;
            }
        }
    }

    tridiagonal_ql(&mut d, &mut e, &mut q)?;
    Ok(sort_ascending(d, q))
}

/// Reduces Hermitian `a` in place to tridiagonal form, accumulating `q` so that
/// the input equals `q a q^*`.
fn householder_tridiagonalize(a: &mut ComplexMatrix, q: &mut ComplexMatrix) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    let mut v = vec![ZERO; n];
    let mut p = vec![ZERO; n];
    for k in 0..n - 2 {
        let tail: f64 = ((k + 2)..n).map(|i| a[(i, k)].norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let xnorm = (x0.norm_sqr() + tail).sqrt();
        let ph = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        let alpha = -ph * xnorm;

        v.iter_mut().for_each(|z| *z = ZERO);
        v[k + 1] = x0 - alpha;
        for i in (k + 2)..n {
            v[i] = a[(i, k)];
        }
        let vnorm2: f64 = v[k + 1..].iter().map(|z| z.norm_sqr()).sum();
        let beta = 2.0 / vnorm2;

        // p = beta * A v, restricted to the trailing block where v lives
        for i in 0..n {
            let mut acc = ZERO;
            for j in (k + 1)..n {
                acc += a[(i, j)] * v[j];
            }
            p[i] = acc * beta;
        }
        let vp: Complex64 = (k + 1..n).map(|i| v[i].conj() * p[i]).sum();
        let kk = 0.5 * beta * vp.re;
        for i in 0..n {
            p[i] -= v[i] * kk;
        }
        // A <- A - v p^* - p v^*
        for i in 0..n {
            for j in 0..n {
                let upd = v[i] * p[j].conj() + p[i] * v[j].conj();
                if upd != ZERO {
                    a[(i, j)] -= upd;
                }
            }
        }
        a[(k + 1, k)] = alpha;
        a[(k, k + 1)] = alpha.conj();
        for i in (k + 2)..n {
            a[(i, k)] = ZERO;
            a[(k, i)] = ZERO;
        }
        for i in 0..n {
            a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
        }

        // Q <- Q (I - beta v v^*)
        for r in 0..n {
            let mut qv = ZERO;
            for j in (k + 1)..n {
                qv += q[(r, j)] * v[j];
            }
            if qv == ZERO {
                continue;
            }
            let s = qv * beta;
            for j in (k + 1)..n {
                q[(r, j)] -= s * v[j].conj();
            }
        }
    }
}

/// Implicit QL on the real symmetric tridiagonal `(d, e)`, with `e[i]` coupling
/// entries `i` and `i+1`. Rotations are applied to the columns of `z`.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], z: &mut ComplexMatrix) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_SWEEPS {
                    return Err(OtkError::ConvergenceFailure {
                        what: "hermitian_eig",
                        iterations: iter,
                        gap: e[l].abs(),
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let zi1 = z[(k, i + 1)];
                        let zi = z[(k, i)];
                        z[(k, i + 1)] = zi * s + zi1 * c;
                        z[(k, i)] = zi * c - zi1 * s;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

fn sort_ascending(d: Vec<f64>, z: ComplexMatrix) -> EigenDecomposition {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]).then(i.cmp(&j)));
    let mut vecs = ComplexMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for r in 0..n {
            vecs[(r, new)] = z[(r, old)];
        }
    }
    EigenDecomposition {
        eigenvalues: order.iter().map(|&i| d[i]).collect(),
        eigenvectors: vecs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::random::random_hermitian;

    fn residual_ok(m: &ComplexMatrix, e: &EigenDecomposition, tol: f64) {
        let scale = m.frobenius_norm().max(1.0);
        for i in 0..e.dim() {
            let v = e.eigenvector(i);
            let mv = m.matvec(&v);
            let r: f64 = mv
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b * e.eigenvalues[i]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(r <= tol * scale, "residual {r} for pair {i}");
        }
        let vtv = e.eigenvectors.adjoint_mul(&e.eigenvectors);
        assert!((&vtv - &ComplexMatrix::identity(e.dim())).max_abs() < 1e-12);
    }

    #[test]
    fn identity_and_diagonal() {
        let e = hermitian_eig(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0]);
        let m = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 3.0]]).unwrap();
        let e = hermitian_eig(&m).unwrap();
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-15 && (e.eigenvalues[1] - 3.0).abs() < 1e-15);
        assert!((e.eigenvector(0)[0].norm() - 1.0).abs() < 1e-14);
        assert!((e.eigenvector(1)[1].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn symmetric_two_by_two() {
        let m = ComplexMatrix::from_real_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        let e = hermitian_eig(&m).unwrap();
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 3.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = e.eigenvector(0);
        let v1 = e.eigenvector(1);
        // eigenvectors are determined up to a phase
        assert!((v0[0] + v0[1]).norm() < 1e-14 && (v0[0].norm() - s).abs() < 1e-14);
        assert!((v1[0] - v1[1]).norm() < 1e-14 && (v1[0].norm() - s).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(hermitian_eig(&m), Err(OtkError::NotHermitian { .. })));
    }

    #[test]
    fn zero_matrix() {
        let e = hermitian_eig(&ComplexMatrix::zeros(4, 4)).unwrap();
        assert!(e.eigenvalues.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn random_hermitian_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &n in &[1usize, 2, 3, 5, 17, 64, 128] {
            let m = random_hermitian(n, &mut rng);
            let e = hermitian_eig(&m).unwrap();
            residual_ok(&m, &e, TOL_EIG);
            let rec = e.reconstruct();
            let err = (&rec - &m).frobenius_norm();
            assert!(err <= 1e-9 * m.frobenius_norm(), "n={n} err={err}");
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn clustered_spectrum() {
        // U diag(1,1,1,0.5,-2) U^* with a random unitary U
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = crate::random::random_unitary(5, &mut rng);
        let d = ComplexMatrix::from_diag(
            &[1.0, 1.0, 1.0, 0.5, -2.0].map(|x| Complex64::new(x, 0.0)),
        );
        let m = u.matmul(&d).matmul(&u.adjoint()).hermitian_part();
        let e = hermitian_eig(&m).unwrap();
        residual_ok(&m, &e, TOL_EIG);
        for (got, want) in e.eigenvalues.iter().zip([-2.0, 0.5, 1.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-13);
        }
    }
}
