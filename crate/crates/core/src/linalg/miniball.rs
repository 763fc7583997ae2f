//! Smallest enclosing ball in R^k by Welzl's move-to-front recursion.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{OtkError, Result};
use crate::random::rng_for;

/// Largest ambient dimension handled by the exact support-set recursion.
pub const MAX_BALL_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Indices (into the input list) of the points on the boundary that determine the ball.
    pub support: Vec<usize>,
}

impl Ball {
    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        dist2(p, &self.center).sqrt() <= self.radius + tol
    }
}

/// Minimal enclosing ball with the default shuffle seed.
pub fn smallest_enclosing_ball(points: &[Vec<f64>]) -> Result<Ball> {
    smallest_enclosing_ball_seeded(points, 0)
}

pub fn smallest_enclosing_ball_seeded(points: &[Vec<f64>], seed: u64) -> Result<Ball> {
    let first = points.first().ok_or(OtkError::EmptyInput)?;
    let k = first.len();
    if points.iter().any(|p| p.len() != k) {
        return Err(OtkError::InvalidInput("points of different dimensions".into()));
    }
    if k > MAX_BALL_DIM {
        return Err(OtkError::InvalidInput(format!(
            "ambient dimension {k} exceeds {MAX_BALL_DIM}"
        )));
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(OtkError::NonFinite);
    }
    let scale = points
        .iter()
        .flatten()
        .fold(0.0_f64, |m, x| m.max(x.abs()))
        .max(1.0);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut rng_for(seed, 0));

    let mut solver = Welzl {
        points,
        dim: k,
        tol: 1e-12 * scale,
        support: Vec::with_capacity(k + 1),
    };
    let end = order.len();
    let ball = solver
        .mtf(&mut order, end)
        .expect("a single point always yields a ball");
    Ok(Ball {
        center: ball.center,
        radius: ball.radius,
        support: ball.support,
    })
}

struct Welzl<'a> {
    points: &'a [Vec<f64>],
    dim: usize,
    tol: f64,
    support: Vec<usize>,
}

#[derive(Clone)]
struct Partial {
    center: Vec<f64>,
    radius: f64,
    support: Vec<usize>,
}

impl Welzl<'_> {
    /// Smallest ball enclosing `order[..end]` with the current support on its boundary.
    fn mtf(&mut self, order: &mut Vec<usize>, end: usize) -> Option<Partial> {
        let mut ball = if self.support.is_empty() {
            None
        } else {
            Some(self.circumball()?)
        };
        if self.support.len() == self.dim + 1 {
            return ball;
        }
        let mut i = 0;
        while i < end {
            let idx = order[i];
            let outside = match &ball {
                None => true,
                Some(b) => dist2(&self.points[idx], &b.center).sqrt() > b.radius + self.tol,
            };
            if outside {
                self.support.push(idx);
                let sub = self.mtf(order, i);
                self.support.pop();
                if let Some(b) = sub {
                    ball = Some(b);
                    let moved = order.remove(i);
                    order.insert(0, moved);
                }
            }
            i += 1;
        }
        ball
    }

    /// Ball with all support points on its boundary and center in their affine hull.
    fn circumball(&self) -> Option<Partial> {
        let p0 = &self.points[self.support[0]];
        let m = self.support.len() - 1;
        if m == 0 {
            return Some(Partial {
                center: p0.clone(),
                radius: 0.0,
                support: self.support.clone(),
            });
        }
        let diffs: Vec<Vec<f64>> = self.support[1..]
            .iter()
            .map(|&i| self.points[i].iter().zip(p0).map(|(a, b)| a - b).collect())
            .collect();
        let mut mat = vec![vec![0.0; m + 1]; m];
        for i in 0..m {
            for j in 0..m {
                mat[i][j] = 2.0 * dot(&diffs[i], &diffs[j]);
            }
            mat[i][m] = dot(&diffs[i], &diffs[i]);
        }
        let lambda = solve_dense(mat)?;
        let mut center = p0.clone();
        for (l, d) in lambda.iter().zip(&diffs) {
            for (c, x) in center.iter_mut().zip(d) {
                *c += l * x;
            }
        }
        let radius = self
            .support
            .iter()
            .map(|&i| dist2(&self.points[i], &center).sqrt())
            .fold(0.0, f64::max);
        Some(Partial {
            center,
            radius,
            support: self.support.clone(),
        })
    }
}

/// Gaussian elimination with partial pivoting on an augmented system; `None` if singular.
fn solve_dense(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let m = a.len();
    let scale = a
        .iter()
        .flat_map(|r| r[..m].iter())
        .fold(0.0_f64, |s, x| s.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        for r in (col + 1)..m {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = ((i + 1)..m).map(|j| a[i][j] * x[j]).sum();
        x[i] = (a[i][m] - s) / a[i][i];
    }
    Some(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{real_unit_vector, rng_for};
    use proptest::prelude::*;
    use rand::Rng;

    /// Minimizes the maximal distance over a grid of candidate centers, then
    /// refines the grid around the best cell.
    fn grid_radius_2d(points: &[Vec<f64>]) -> (Vec<f64>, f64) {
        let lo_x = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi_x = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let lo_y = points.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let hi_y = points.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
        let (mut cx, mut cy) = ((lo_x + hi_x) / 2.0, (lo_y + hi_y) / 2.0);
        let mut half = (hi_x - lo_x).max(hi_y - lo_y).max(1e-9);
        let mut best = f64::INFINITY;
        for _ in 0..30 {
            let steps = 40;
            let (mut bx, mut by) = (cx, cy);
            for i in 0..=steps {
                for j in 0..=steps {
                    let x = cx - half + 2.0 * half * i as f64 / steps as f64;
                    let y = cy - half + 2.0 * half * j as f64 / steps as f64;
                    let r = points
                        .iter()
                        .map(|p| ((p[0] - x).powi(2) + (p[1] - y).powi(2)).sqrt())
                        .fold(0.0, f64::max);
                    if r < best {
                        best = r;
                        bx = x;
                        by = y;
                    }
                }
            }
            cx = bx;
            cy = by;
            half *= 0.2;
        }
        (vec![cx, cy], best)
    }

    #[test]
    fn single_point_and_diameter() {
        let b = smallest_enclosing_ball(&[vec![0.0, 0.0]]).unwrap();
        assert_eq!(b.radius, 0.0);
        assert_eq!(b.center, vec![0.0, 0.0]);
        let b = smallest_enclosing_ball(&[vec![0.0], vec![2.0]]).unwrap();
        assert!((b.center[0] - 1.0).abs() < 1e-15 && (b.radius - 1.0).abs() < 1e-15);
    }

    #[test]
    fn right_triangle_against_grid_oracle() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 0.0]];
        let (gc, gr) = grid_radius_2d(&pts);
        assert!((gr - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((gc[0] - 0.5).abs() < 1e-6 && (gc[1] - 0.5).abs() < 1e-6);
        let b = smallest_enclosing_ball(&pts).unwrap();
        assert!((b.radius - gr).abs() < 1e-9);
        assert!((b.center[0] - 0.5).abs() < 1e-12 && (b.center[1] - 0.5).abs() < 1e-12);
    }

    /// Exhaustive oracle: the minimal circle is fixed by two or three of the points.
    fn enumerate_radius_2d(points: &[Vec<f64>]) -> f64 {
        let n = points.len();
        let fits = |c: &[f64], r: f64| points.iter().all(|p| dist2(p, c).sqrt() <= r + 1e-12);
        let mut best = if n == 1 { 0.0 } else { f64::INFINITY };
        for i in 0..n {
            for j in (i + 1)..n {
                let c = vec![(points[i][0] + points[j][0]) / 2.0, (points[i][1] + points[j][1]) / 2.0];
                let r = dist2(&points[i], &c).sqrt();
                if r < best && fits(&c, r) {
                    best = r;
                }
                for k in (j + 1)..n {
                    let (a, b, q) = (&points[i], &points[j], &points[k]);
                    let d = 2.0 * (a[0] * (b[1] - q[1]) + b[0] * (q[1] - a[1]) + q[0] * (a[1] - b[1]));
                    if d.abs() < 1e-14 {
                        continue;
                    }
                    let (a2, b2, q2) = (dot(a, a), dot(b, b), dot(q, q));
                    let ux = (a2 * (b[1] - q[1]) + b2 * (q[1] - a[1]) + q2 * (a[1] - b[1])) / d;
                    let uy = (a2 * (q[0] - b[0]) + b2 * (a[0] - q[0]) + q2 * (b[0] - a[0])) / d;
                    let c = vec![ux, uy];
                    let r = dist2(a, &c).sqrt();
                    if r < best && fits(&c, r) {
                        best = r;
                    }
                }
            }
        }
        best
    }

    #[test]
    fn random_clouds_against_enumeration_oracle() {
        let mut rng = rng_for(3, 0);
        for _ in 0..50 {
            let n = rng.random_range(1..12);
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                .collect();
            let b = smallest_enclosing_ball(&pts).unwrap();
            assert!(pts.iter().all(|p| b.contains(p, 1e-9)));
            let oracle = enumerate_radius_2d(&pts);
            assert!((b.radius - oracle).abs() < 1e-9, "{} vs {}", b.radius, oracle);
        }
    }

    #[test]
    fn empty_input() {
        assert!(matches!(smallest_enclosing_ball(&[]), Err(OtkError::EmptyInput)));
    }

    #[test]
    fn duplicate_and_collinear_points() {
        let pts = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0], vec![0.5, 0.5], vec![2.0, 2.0]];
        let b = smallest_enclosing_ball(&pts).unwrap();
        assert!((b.radius - 2f64.sqrt()).abs() < 1e-12);
    }

    fn cloud(seed: u64, n: usize, k: usize) -> Vec<Vec<f64>> {
        let mut rng = rng_for(seed, 1);
        (0..n)
            .map(|_| (0..k).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect()
    }

    proptest! {
        #[test]
        fn radius_monotone_under_deletion(seed in 0u64..5000, n in 2usize..30, k in 1usize..7, del in 0usize..30) {
            let pts = cloud(seed, n, k);
            let full = smallest_enclosing_ball(&pts).unwrap();
            prop_assert!(pts.iter().all(|p| full.contains(p, 1e-9)));
            let mut fewer = pts.clone();
            fewer.remove(del % n);
            let part = smallest_enclosing_ball(&fewer).unwrap();
            prop_assert!(part.radius <= full.radius + 1e-9);
        }

        #[test]
        fn radius_invariant_under_rigid_motion(seed in 0u64..5000, n in 1usize..25, k in 1usize..7) {
            let pts = cloud(seed, n, k);
            let mut rng = rng_for(seed, 9);
            // random orthogonal matrix from Gram-Schmidt on random directions
            let mut basis: Vec<Vec<f64>> = Vec::new();
            while basis.len() < k {
                let mut v = real_unit_vector(k, &mut rng);
                for b in &basis {
                    let c = dot(b, &v);
                    for (vi, bi) in v.iter_mut().zip(b) { *vi -= c * bi; }
                }
                let nv = dot(&v, &v).sqrt();
                if nv > 1e-6 { basis.push(v.into_iter().map(|x| x / nv).collect()); }
            }
            let shift: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
            let moved: Vec<Vec<f64>> = pts
                .iter()
                .map(|p| basis.iter().zip(&shift).map(|(row, s)| dot(row, p) + s).collect())
                .collect();
            let a = smallest_enclosing_ball(&pts).unwrap();
            let b = smallest_enclosing_ball(&moved).unwrap();
            prop_assert!((a.radius - b.radius).abs() < 1e-9);
        }
    }
}
