//! Certificates for `0 ∈ conv V(A)` (a density matrix on the top eigenspace)
//! and `0 ∈ V(A)` (a single unit vector).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{compress, pencil, realify, top_eigenspace, Certificate, CertificateKind, DEFAULT_REL_TOL};
use crate::error::{OtkError, Result};
use crate::linalg::hull::{solve_simplex_qp, HULL_MAX_ITER};
use crate::linalg::matrix::{norm_sqr, normalize, ComplexMatrix};
use crate::linalg::hermitian_eig;
use crate::parallel::map_indexed;
use crate::random::{rng_for, unit_vector};
use crate::tuple::OperatorTuple;

pub const TOL_MEMBER: f64 = 1e-8;
pub const CONV_MAX_ITER: usize = 20_000;
pub const DEFAULT_RESTARTS: usize = 64;
const LM_MAX_ITER: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipOptions {
    pub rel_tol: f64,
    pub tol_member: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for MembershipOptions {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            tol_member: TOL_MEMBER,
            max_iter: CONV_MAX_ITER,
            restarts: DEFAULT_RESTARTS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvMembership {
    pub is_member: bool,
    /// Distance from 0 to the hull of the generated atoms (an upper bound on `dist(0, conv V)`).
    pub distance: f64,
    /// Certified lower bound on `dist(0, conv V)` from the last separating direction.
    pub lower_bound: f64,
    pub threshold: f64,
    pub iterations: usize,
    pub certificate: Certificate,
}

/// Decides `0 ∈ conv V(A)` with default options.
pub fn membership_zero_in_conv_v(a: &OperatorTuple) -> Result<ConvMembership> {
    membership_zero_in_conv_v_with(a, &MembershipOptions::default())
}

/// Minimizes `Σ_j |tr(B_j T)|²` over density matrices `T` on the top eigenspace.
///
/// Fully corrective Frank-Wolfe: every linear step adds the minimal eigenvector of
/// `Σ_j (conj(c_j) B_j + c_j B_j^*)` as an atom, and the weights over all atoms are
/// re-optimized. The minimal eigenvalue also yields a separating-hyperplane lower
/// bound, so non-membership is certified as well.
pub fn membership_zero_in_conv_v_with(a: &OperatorTuple, opts: &MembershipOptions) -> Result<ConvMembership> {
    let e = top_eigenspace(a, opts.rel_tol);
    let b = compress(a, &e);
    let m = b.n();
    let scale = 1.0 + e.lambda_max.max(0.0).sqrt();
    let threshold = opts.tol_member * scale;
    let tiny = 1e-14 * scale;

    let mut atoms: Vec<Vec<Complex64>> = (0..m)
        .map(|i| {
            let mut v = vec![Complex64::new(0.0, 0.0); m];
            v[i] = Complex64::new(1.0, 0.0);
            v
        })
        .collect();
    let mut points: Vec<Vec<f64>> = atoms.iter().map(|x| realify(&b.expectations(x))).collect();
    let origin = vec![0.0; 2 * a.d()];
    let mut weights: Option<Vec<f64>> = None;
    let mut lower_bound: f64 = 0.0;
    let mut iterations = 0;

    let (w, distance) = loop {
        let linear = vec![0.0; points.len()];
        let sol = solve_simplex_qp(&points, &origin, &linear, weights.as_deref(), HULL_MAX_ITER, |s| {
            s.residual_norm <= tiny || s.gap <= 1e-6 * s.residual_norm * s.residual_norm
        });
        let r = sol.residual_norm;
        let c: Vec<Complex64> = sol.residual.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();

        // drop atoms that left the support
        let keep: Vec<usize> = (0..atoms.len()).filter(|&i| sol.weights[i] > 0.0).collect();
        atoms = keep.iter().map(|&i| atoms[i].clone()).collect();
        points = keep.iter().map(|&i| points[i].clone()).collect();
        let w: Vec<f64> = keep.iter().map(|&i| sol.weights[i]).collect();

        if !r.is_finite() {
            return Err(OtkError::InvalidInput("non-finite tuple entries".into()));
        }
        if r <= tiny {
            break (w, r);
        }
        let eig = hermitian_eig(&pencil(&b, &c))?;
        let delta = eig.min_eigenvalue();
        lower_bound = lower_bound.max(delta / r);
        // decided: certified outside, or well inside the tolerance, or the bounds pin the distance
        if lower_bound > threshold || r <= 0.1 * threshold || (r <= threshold && r - lower_bound <= 0.1 * r) {
            break (w, r);
        }
        // no atom improves on the current hull point
        if r * r - delta <= 1e-12 * r * r.max(tiny) {
            break (w, r);
        }
        // r is attained by an explicit density matrix, so r <= threshold is already a certificate
        if iterations >= opts.max_iter && r <= threshold {
            break (w, r);
        }
        if iterations >= opts.max_iter {
            return Err(OtkError::ConvergenceFailure {
                what: "zero-in-hull Frank-Wolfe",
                iterations,
                gap: r - lower_bound,
            });
        }
        iterations += 1;
        let x = eig.eigenvector(0);
        points.push(realify(&b.expectations(&x)));
        atoms.push(x);
        let mut ws = w;
        ws.push(0.0);
        weights = Some(ws);
    };

    let certificate = density_certificate(a, &e.basis, &atoms, &w)?;
    Ok(ConvMembership {
        is_member: distance <= threshold,
        distance,
        lower_bound: lower_bound.min(distance),
        threshold,
        iterations,
        certificate,
    })
}

/// Spectral form of `Σ λ_i x_i x_i^*`, lifted through `basis`.
fn density_certificate(
    a: &OperatorTuple,
    basis: &ComplexMatrix,
    atoms: &[Vec<Complex64>],
    lambda: &[f64],
) -> Result<Certificate> {
    let m = basis.cols();
    let mut t = ComplexMatrix::zeros(m, m);
    for (x, &l) in atoms.iter().zip(lambda) {
        for i in 0..m {
            for k in 0..m {
                t[(i, k)] += x[i] * x[k].conj() * l;
            }
        }
    }
    let eig = hermitian_eig(&t.hermitian_part())?;
    let top = eig.max_eigenvalue();
    let mut weights = Vec::new();
    let mut vectors = Vec::new();
    for i in (0..m).rev() {
        let s = eig.eigenvalues[i];
        if s > 1e-14 * top {
            weights.push(s);
            vectors.push(basis.matvec(&eig.eigenvector(i)));
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|s| *s /= total);
    let mut cert = Certificate {
        kind: CertificateKind::DensityMatrix,
        weights,
        vectors,
        residual: 0.0,
    };
    cert.residual = cert.expectations(a).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(cert)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VMembership {
    pub is_member: bool,
    /// `min_x (Σ_j |<x|B_j x>|²)^{1/2}` over the restarts.
    pub residual: f64,
    pub threshold: f64,
    pub restarts: usize,
    pub best_restart: usize,
    pub certificate: Certificate,
}

/// Decides `0 ∈ V(A)` with default options and the given restarts and seed.
pub fn membership_zero_in_v(a: &OperatorTuple, restarts: usize, seed: u64) -> VMembership {
    membership_zero_in_v_with(
        a,
        &MembershipOptions {
            restarts,
            seed,
            ..MembershipOptions::default()
        },
    )
}

/// Minimizes `g(x) = Σ_j |<x|B_j x>|²` over unit `x` in the top eigenspace.
///
/// Each restart runs damped Gauss-Newton steps on the residual map
/// `x ↦ (<x|B_j x>)_j`, projected onto the tangent space of the sphere and
/// retracted by normalization. Large damping turns a step into a plain projected
/// gradient step, so the method falls back to descent far from a zero.
/// Starting points: the eigenspace basis vectors, then seeded random vectors.
pub fn membership_zero_in_v_with(a: &OperatorTuple, opts: &MembershipOptions) -> VMembership {
    let e = top_eigenspace(a, opts.rel_tol);
    let b = compress(a, &e);
    let m = b.n();
    let scale = 1.0 + e.lambda_max.max(0.0).sqrt();
    let threshold = opts.tol_member * scale;
    let restarts = opts.restarts.max(1);

    let runs = map_indexed(restarts, |i| {
        let x0 = if i < m {
            let mut v = vec![Complex64::new(0.0, 0.0); m];
            v[i] = Complex64::new(1.0, 0.0);
            v
        } else {
            unit_vector(m, &mut rng_for(opts.seed, i as u64))
        };
        gauss_newton_sphere(&b, x0, scale)
    });
    let mut best = 0;
    for (i, (_, g)) in runs.iter().enumerate() {
        if *g < runs[best].1 - 1e-12 * scale * scale {
            best = i;
        }
    }
    let x = e.lift(&runs[best].0);
    let certificate = Certificate::witness(a, x);
    let residual = certificate.residual;
    VMembership {
        is_member: residual <= threshold,
        residual,
        threshold,
        restarts,
        best_restart: best,
        certificate,
    }
}

fn objective(b: &OperatorTuple, x: &[Complex64]) -> (Vec<Complex64>, f64) {
    let r = b.expectations(x);
    let g = r.iter().map(|z| z.norm_sqr()).sum();
    (r, g)
}

/// Returns the final unit vector and `g` there.
fn gauss_newton_sphere(b: &OperatorTuple, mut x: Vec<Complex64>, scale: f64) -> (Vec<Complex64>, f64) {
    let m = x.len();
    let d = b.d();
    let (mut r, mut g) = objective(b, &x);
    let floor = (1e-16 * scale).powi(2);
    let mut mu = f64::NAN;
    for _ in 0..LM_MAX_ITER {
        if g <= floor {
            break;
        }
        // real Jacobian rows 2j, 2j+1; columns 2k (Re δ_k), 2k+1 (Im δ_k)
        let mut jac = vec![vec![0.0; 2 * m]; 2 * d];
        for (j, bj) in b.matrices().iter().enumerate() {
            let u = bj.matvec(&x);
            let v = bj.adjoint_matvec(&x);
            for k in 0..m {
                let re = u[k] + v[k].conj();
                let im = Complex64::new(0.0, 1.0) * (v[k].conj() - u[k]);
                jac[2 * j][2 * k] = re.re;
                jac[2 * j + 1][2 * k] = re.im;
                jac[2 * j][2 * k + 1] = im.re;
                jac[2 * j + 1][2 * k + 1] = im.im;
            }
        }
        // project out the radial and phase directions
        let radial = realify(&x);
        let phase: Vec<f64> = x.iter().flat_map(|z| [-z.im, z.re]).collect();
        for row in jac.iter_mut() {
            for dir in [&radial, &phase] {
                let c: f64 = row.iter().zip(dir.iter()).map(|(a, b)| a * b).sum();
                row.iter_mut().zip(dir.iter()).for_each(|(a, b)| *a -= c * b);
            }
        }
        let rr = realify(&r);
        let k = 2 * d;
        let mut jjt = vec![vec![0.0; k]; k];
        for p in 0..k {
            for q in 0..k {
                jjt[p][q] = jac[p].iter().zip(&jac[q]).map(|(a, b)| a * b).sum();
            }
        }
        if mu.is_nan() {
            let tr: f64 = (0..k).map(|p| jjt[p][p]).sum();
            mu = 1e-3 * tr / k as f64 + 1e-300;
        }
        let mut improved = false;
        for _ in 0..40 {
            let mut sys = jjt.clone();
            (0..k).for_each(|p| sys[p][p] += mu);
            let Some(y) = solve_spd(sys, &rr) else {
                mu *= 10.0;
                continue;
            };
            let mut cand = x.clone();
            for (kk, z) in cand.iter_mut().enumerate() {
                let s_re: f64 = -(0..k).map(|p| jac[p][2 * kk] * y[p]).sum::<f64>();
                let s_im: f64 = -(0..k).map(|p| jac[p][2 * kk + 1] * y[p]).sum::<f64>();
                *z += Complex64::new(s_re, s_im);
            }
            normalize(&mut cand);
            let (rc, gc) = objective(b, &cand);
            if gc < g {
                x = cand;
                r = rc;
                g = gc;
                mu = (mu / 3.0).max(1e-300);
                improved = true;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    debug_assert!((norm_sqr(&x) - 1.0).abs() < 1e-12);
    (x, g)
}

/// Cholesky solve of a small symmetric positive definite system.
fn solve_spd(mut a: Vec<Vec<f64>>, rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    for j in 0..n {
        let mut s = a[j][j];
        for k in 0..j {
            s -= a[j][k] * a[j][k];
        }
        if s <= 0.0 || !s.is_finite() {
            return None;
        }
        let l = s.sqrt();
        a[j][j] = l;
        for i in j + 1..n {
            let mut t = a[i][j];
            for k in 0..j {
                t -= a[i][k] * a[j][k];
            }
            a[i][j] = t / l;
        }
    }
    let mut y = rhs.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= a[i][k] * y[k];
        }
        y[i] /= a[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= a[k][i] * y[k];
        }
        y[i] /= a[i][i];
    }
    Some(y)
}
