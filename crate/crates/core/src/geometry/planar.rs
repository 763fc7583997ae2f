//! Distance from a complex number to the numerical range of a single matrix,
//! through the support function `h(θ) = λ_max(Re(e^{-iθ} C))`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::linalg::{hermitian_eig, ComplexMatrix};

const GRID: usize = 2048;
const GOLDEN_STEPS: usize = 60;

/// Tabulated support function of `W(C)`, which is convex.
#[derive(Debug, Clone)]
pub struct PlanarRange {
    c: ComplexMatrix,
    dirs: Vec<Complex64>,
    support: Vec<f64>,
    scale: f64,
}

impl PlanarRange {
    pub fn new(c: ComplexMatrix) -> Self {
        let dirs: Vec<Complex64> = (0..GRID)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * i as f64 / GRID as f64))
            .collect();
        let support = dirs.iter().map(|&u| support_at(&c, u)).collect();
        let scale = c.max_abs().max(1.0);
        Self { c, dirs, support, scale }
    }

    /// `dist(p, W(C)) = max_θ (Re(e^{-iθ} p) - h(θ))^+`. Every evaluated angle
    /// gives a valid lower bound; a golden-section search sharpens the best one.
    pub fn distance(&self, p: Complex64) -> f64 {
        let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
        for (i, (u, h)) in self.dirs.iter().zip(&self.support).enumerate() {
            let g = (u.conj() * p).re - h;
            if g > best {
                best = g;
                arg = i;
            }
        }
        // far inside: the grid error cannot lift the gap above zero
        if best < -1e-3 * self.scale {
            return 0.0;
        }
        let step = 2.0 * PI / GRID as f64;
        let theta0 = arg as f64 * step;
        let gap = |t: f64| {
            let u = Complex64::from_polar(1.0, t);
            (u.conj() * p).re - support_at(&self.c, u)
        };
        let (mut lo, mut hi) = (theta0 - step, theta0 + step);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - r * (hi - lo);
        let mut x2 = lo + r * (hi - lo);
        let (mut f1, mut f2) = (gap(x1), gap(x2));
        for _ in 0..GOLDEN_STEPS {
            if f1 > f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - r * (hi - lo);
                f1 = gap(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + r * (hi - lo);
                f2 = gap(x2);
            }
        }
        best.max(f1).max(f2).max(0.0)
    }
}

fn support_at(c: &ComplexMatrix, u: Complex64) -> f64 {
    if c.rows() == 1 {
        return (u.conj() * c[(0, 0)]).re;
    }
    hermitian_eig(&c.scale(u.conj()).hermitian_part())
        .expect("Hermitian part is Hermitian")
        .max_eigenvalue()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn segment_of_a_hermitian_matrix() {
        let w = PlanarRange::new(ComplexMatrix::from_diag(&[c(0.0, 0.0), c(2.0, 0.0)]));
        assert_eq!(w.distance(c(1.0, 0.0)), 0.0);
        assert!((w.distance(c(1.0, 0.5)) - 0.5).abs() < 1e-12);
        assert!((w.distance(c(3.0, 0.0)) - 1.0).abs() < 1e-12);
        assert!((w.distance(c(-3.0, 4.0)) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn disc_of_a_nilpotent() {
        // W([[0,1],[0,0]]) is the closed disc of radius 1/2
        let n = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let w = PlanarRange::new(n);
        assert!(w.distance(c(0.3, -0.3)) == 0.0);
        for k in 0..17 {
            let p = Complex64::from_polar(0.5 + 0.01 * k as f64, 0.37 * k as f64);
            assert!((w.distance(p) - 0.01 * k as f64).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn single_point() {
        let w = PlanarRange::new(ComplexMatrix::scalar(1, c(1.0, 1.0)));
        assert!((w.distance(c(4.0, 5.0)) - 5.0).abs() < 1e-12);
    }
}
