//! `sup_{‖x‖=1} var_x(A)` by Riemannian gradient ascent on the unit sphere.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SolverOptions;
use crate::error::Result;
use crate::linalg::matrix::{inner, norm_sqr, normalize, ComplexMatrix};
use crate::parallel::map_indexed;
use crate::random::{rng_for, unit_vector};
use crate::tuple::{gram, gram_eig, variance, OperatorTuple};

const ARMIJO: f64 = 1e-4;
/// Gradient tolerance for the restarts before the winner is polished.
const COARSE_GRAD: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceResult {
    pub value: f64,
    pub argmax: Vec<Complex64>,
    pub restarts_used: usize,
    pub best_restart: usize,
    pub per_restart: Vec<f64>,
    pub options: SolverOptions,
}

/// Euclidean gradient of `x ↦ x^*Gx - Σ_j |x^*A_j x|²` in complex form:
/// the directional derivative along `δ` is `Re<g|δ>`, with
/// `g = 2 (G x - Σ_j (conj(c_j) A_j x + c_j A_j^* x))`, `c_j = <x|A_j x>`.
pub fn variance_gradient(a: &OperatorTuple, x: &[Complex64]) -> Vec<Complex64> {
    euclidean_gradient(&gram(a), a, x).0
}

/// Returns `(gradient, value)` at `x`, not assuming `‖x‖ = 1`.
fn euclidean_gradient(g: &ComplexMatrix, a: &OperatorTuple, x: &[Complex64]) -> (Vec<Complex64>, f64) {
    let gx = g.matvec(x);
    let mut grad: Vec<Complex64> = gx.iter().map(|v| v * 2.0).collect();
    let mut value = inner(x, &gx).re;
    for aj in a.matrices() {
        let ax = aj.matvec(x);
        let astx = aj.adjoint_matvec(x);
        let c = inner(x, &ax);
        value -= c.norm_sqr();
        for ((gi, u), v) in grad.iter_mut().zip(&ax).zip(&astx) {
            *gi -= (c.conj() * u + c * v) * 2.0;
        }
    }
    (grad, value)
}

fn value_at(g: &ComplexMatrix, a: &OperatorTuple, x: &[Complex64]) -> f64 {
    let mut v = g.quad_form(x).re;
    for aj in a.matrices() {
        v -= aj.quad_form(x).norm_sqr();
    }
    v
}

/// One restart: ascent with Armijo backtracking from a Barzilai-Borwein trial
/// step, retraction by normalization.
fn ascend(g: &ComplexMatrix, a: &OperatorTuple, mut x: Vec<Complex64>, scale: f64, tol_grad: f64, opts: &SolverOptions) -> (Vec<Complex64>, f64) {
    normalize(&mut x);
    let (mut grad, mut f) = euclidean_gradient(g, a, &x);
    let mut step = 0.5 / scale;
    let mut prev: Option<(Vec<Complex64>, Vec<Complex64>)> = None;
    for _ in 0..opts.ascent_iter {
        // tangent projection: remove the radial component Re<x|g> x
        let radial = inner(&x, &grad).re;
        for (gi, xi) in grad.iter_mut().zip(&x) {
            *gi -= xi * radial;
        }
        let gn2 = norm_sqr(&grad);
        if gn2.sqrt() <= tol_grad * scale {
            break;
        }
        if let Some((px, pg)) = &prev {
            // ascent, so the curvature along s is -<s, y>
            let (mut ss, mut sy) = (0.0, 0.0);
            for i in 0..x.len() {
                let si = x[i] - px[i];
                ss += si.norm_sqr();
                sy += (si.conj() * (grad[i] - pg[i])).re;
            }
            if sy < 0.0 {
                step = (ss / -sy).clamp(1e-6 / scale, 1e3 / scale);
            }
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut cand: Vec<Complex64> = x.iter().zip(&grad).map(|(xi, gi)| xi + gi * step).collect();
            normalize(&mut cand);
            let fc = value_at(g, a, &cand);
            if fc >= f + ARMIJO * step * gn2 {
                prev = Some((std::mem::replace(&mut x, cand), std::mem::take(&mut grad)));
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        let (gr, fv) = euclidean_gradient(g, a, &x);
        grad = gr;
        f = fv;
    }
    (x, f)
}

/// Maximizes `var_x(A)` over unit `x` from `opts.restarts` seeded starts: the
/// gram eigenvectors first, then random unit vectors. Restarts stop at a coarse
/// gradient tolerance; the best value wins (ties within `1e-12` go to the lowest
/// restart index) and only that one is refined to `opts.tol_grad`. The value is
/// a lower bound on the supremum by construction.
pub fn max_variance(a: &OperatorTuple, opts: &SolverOptions) -> Result<VarianceResult> {
    let g = gram(a);
    let n = a.n();
    let eig = gram_eig(a);
    let scale = eig.max_eigenvalue().max(1e-300);
    let restarts = opts.restarts.max(1);
    let runs = map_indexed(restarts, |i| {
        let x0 = if i < n {
            eig.eigenvector(n - 1 - i)
        } else {
            unit_vector(n, &mut rng_for(opts.seed, i as u64))
        };
        ascend(&g, a, x0, scale, opts.tol_grad.max(COARSE_GRAD), opts)
    });
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.1 > runs[best].1 + 1e-12 {
            best = i;
        }
    }
    let (argmax, _) = ascend(&g, a, runs[best].0.clone(), scale, opts.tol_grad, opts);
    let value = variance(a, &argmax)?;
    Ok(VarianceResult {
        value,
        argmax,
        restarts_used: restarts,
        best_restart: best,
        per_restart: runs.iter().map(|r| r.1.max(0.0)).collect(),
        options: *opts,
    })
}

/// `sup |<Ax|y>|` over unit `x`, unit `y ∈ C^{nd}` with `<x|y_j> = 0` for all `j`.
/// For fixed `x` the best `y` is the normalized `((I - xx^*) A_j x)_j`, so the
/// supremum is `(max var)^{1/2}`.
pub fn orthopair_sup(a: &OperatorTuple, opts: &SolverOptions) -> Result<f64> {
    Ok(max_variance(a, opts)?.value.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::gaussian_matrix;
    use crate::tuple::{gallery, GalleryName};
    use rand::Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Dense grid over the unit sphere of C^2 modulo phase.
    fn sphere_grid_max(a: &OperatorTuple, steps: usize) -> f64 {
        let h = (PI / 2.0) / steps as f64;
        let mut best: f64 = 0.0;
        for ia in 0..=steps {
            let t = ia as f64 * h;
            for ip in 0..4 * steps {
                let x = [c(t.cos(), 0.0), Complex64::from_polar(t.sin(), ip as f64 * h)];
                best = best.max(variance(a, &x).unwrap());
            }
        }
        best
    }

    #[test]
    fn gallery_values() {
        let o = SolverOptions::default();
        let p = max_variance(&gallery(GalleryName::Pauli), &o).unwrap();
        assert!((p.value - 2.0).abs() < 1e-9);
        assert!(p.per_restart.iter().all(|v| (v - 2.0).abs() < 1e-9));
        let d2 = max_variance(&gallery(GalleryName::D2), &o).unwrap();
        assert!((d2.value - 4.0 / 3.0).abs() < 1e-9, "{}", d2.value);
        let e = max_variance(&gallery(GalleryName::Ex2), &o).unwrap();
        assert!((e.value - 1.0).abs() < 1e-9);
        let s = max_variance(&OperatorTuple::scalar(&[c(1.0, 1.0)], 3).unwrap(), &o).unwrap();
        assert!(s.value.abs() < 1e-12);
    }

    #[test]
    fn gallery_values_against_grid() {
        for name in GalleryName::ALL {
            let a = gallery(name);
            let grid = sphere_grid_max(&a, 200);
            let r = max_variance(&a, &SolverOptions::default()).unwrap();
            assert!(r.value >= grid - 1e-12 && r.value - grid < 1e-4, "{name}: {} vs {grid}", r.value);
        }
    }

    #[test]
    fn random_two_dimensional_against_grid() {
        let mut rng = rng_for(4, 0);
        for _ in 0..10 {
            let d = rng.random_range(1..4);
            let a = OperatorTuple::new((0..d).map(|_| gaussian_matrix(2, 2, &mut rng)).collect()).unwrap();
            let grid = sphere_grid_max(&a, 200);
            let r = max_variance(&a, &SolverOptions::default()).unwrap();
            assert!(r.value >= grid - 1e-12 && r.value - grid < 1e-3 * (1.0 + grid));
        }
    }

    #[test]
    fn orthopair_values() {
        let o = SolverOptions::default();
        assert!((orthopair_sup(&gallery(GalleryName::Pauli), &o).unwrap() - 2f64.sqrt()).abs() < 1e-9);
        let n = OperatorTuple::new(vec![ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap()]).unwrap();
        assert!((orthopair_sup(&n, &o).unwrap() - 1.0).abs() < 1e-9);
        assert!(orthopair_sup(&OperatorTuple::scalar(&[c(2.0, 0.0)], 2).unwrap(), &o).unwrap() < 1e-6);
    }

    #[test]
    fn orthopair_closed_form_beats_random_pairs() {
        // the closed-form inner maximum dominates any feasible (x, y)
        let mut rng = rng_for(8, 0);
        let a = OperatorTuple::new((0..2).map(|_| gaussian_matrix(3, 3, &mut rng)).collect()).unwrap();
        let sup = orthopair_sup(&a, &SolverOptions::default()).unwrap();
        for _ in 0..500 {
            let x = unit_vector(3, &mut rng);
            let mut ys: Vec<Vec<Complex64>> = (0..2).map(|_| unit_vector(3, &mut rng)).collect();
            for y in ys.iter_mut() {
                let p = inner(&x, y);
                y.iter_mut().zip(&x).for_each(|(yi, xi)| *yi -= xi * p);
            }
            let total: f64 = ys.iter().map(|y| norm_sqr(y)).sum::<f64>().sqrt();
            let val: Complex64 = a
                .matrices()
                .iter()
                .zip(&ys)
                .map(|(m, y)| inner(y, &m.matvec(&x)) / total)
                .sum();
            assert!(val.norm() <= sup + 1e-9);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = rng_for(31, 0);
        for _ in 0..40 {
            let n = rng.random_range(2..7);
            let d = rng.random_range(1..4);
            let a = OperatorTuple::new((0..d).map(|_| gaussian_matrix(n, n, &mut rng)).collect()).unwrap();
            let g = gram(&a);
            let x = unit_vector(n, &mut rng);
            let grad = variance_gradient(&a, &x);
            let h = 1e-5;
            for k in 0..n {
                for dir in [c(1.0, 0.0), c(0.0, 1.0)] {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += dir * h;
                    xm[k] -= dir * h;
                    let fd = (value_at(&g, &a, &xp) - value_at(&g, &a, &xm)) / (2.0 * h);
                    let an = (grad[k].conj() * dir).re;
                    assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "{fd} vs {an}");
                }
            }
        }
    }
}
