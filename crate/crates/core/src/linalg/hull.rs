//! Convex-hull distance and small quadratic programs over the probability simplex:
//! pairwise Frank-Wolfe with exact line search, and an exact active-set method
//! for the low-dimensional case.

use serde::{Deserialize, Serialize};

use crate::error::{OtkError, Result};

pub const HULL_MAX_ITER: usize = 10_000;
pub const HULL_GAP_TOL: f64 = 1e-10;

/// Distance from a target to the convex hull of a point list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HullDistance {
    pub distance: f64,
    /// Convex coefficients, one per input point.
    pub weights: Vec<f64>,
    /// Certified lower bound on the distance (from the separating direction).
    pub lower_bound: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Euclidean distance from `target` to `conv(points)` with a certifying convex combination.
///
/// Stops once the distance is below `HULL_GAP_TOL * scale` or the gap between the
/// distance and its separating-hyperplane lower bound is below that threshold.
pub fn hull_distance(target: &[f64], points: &[Vec<f64>]) -> Result<HullDistance> {
    if points.is_empty() {
        return Err(OtkError::EmptyInput);
    }
    let k = target.len();
    if points.iter().any(|p| p.len() != k) {
        return Err(OtkError::LengthMismatch {
            expected: k,
            got: points.iter().map(Vec::len).find(|&l| l != k).unwrap_or(k),
        });
    }
    let scale = points
        .iter()
        .map(|p| dist(p, target))
        .fold(0.0, f64::max)
        .max(1.0);
    let tol = HULL_GAP_TOL * scale;
    let linear = vec![0.0; points.len()];
    let sol = solve_simplex_qp(points, target, &linear, None, HULL_MAX_ITER, |state| {
        let r = state.residual_norm;
        r <= tol || state.gap <= tol * r
    });
    let distance = sol.residual_norm;
    let lower_bound = if distance > 0.0 {
        (distance - sol.gap / distance).max(0.0)
    } else {
        0.0
    };
    Ok(HullDistance {
        distance,
        weights: sol.weights,
        lower_bound,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

/// Progress snapshot passed to the stopping rule.
#[derive(Debug, Clone, Copy)]
pub struct QpState {
    /// Frank-Wolfe duality gap, an upper bound on `objective - optimum`.
    pub gap: f64,
    pub objective: f64,
    pub residual_norm: f64,
    pub iteration: usize,
}

#[derive(Debug, Clone)]
pub struct SimplexSolution {
    pub weights: Vec<f64>,
    /// `P w - target`.
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    pub objective: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `½|P w - t|² + <c, w>` over the simplex, `P` having the given points as columns.
pub fn solve_simplex_qp<F>(
    points: &[Vec<f64>],
    target: &[f64],
    linear: &[f64],
    warm_start: Option<&[f64]>,
    max_iter: usize,
    mut done: F,
) -> SimplexSolution
where
    F: FnMut(&QpState) -> bool,
{
    let m = points.len();
    let k = target.len();
    let mut w = vec![0.0; m];
    match warm_start {
        Some(ws) if ws.len() == m && ws.iter().sum::<f64>() > 0.0 => {
            let s: f64 = ws.iter().map(|x| x.max(0.0)).sum();
            for (wi, &x) in w.iter_mut().zip(ws) {
                *wi = x.max(0.0) / s;
            }
        }
        _ => {
            let best = (0..m)
                .min_by(|&i, &j| {
                    let fi = 0.5 * dist2(&points[i], target) + linear[i];
                    let fj = 0.5 * dist2(&points[j], target) + linear[j];
                    fi.total_cmp(&fj)
                })
                .expect("non-empty point list");
            w[best] = 1.0;
        }
    }

    let mut residual = combine(points, &w, target);
    let mut grad = vec![0.0; m];
    let mut iterations = 0;
    let mut converged = false;
    let mut state;
    loop {
        if iterations % 64 == 0 {
            residual = combine(points, &w, target);
        }
        for (g, (p, c)) in grad.iter_mut().zip(points.iter().zip(linear)) {
            *g = dot(p, &residual) + c;
        }
        let fw = argmin(&grad, |_| true);
        let away = argmax(&grad, |i| w[i] > 0.0);
        let wg: f64 = w.iter().zip(&grad).map(|(a, b)| a * b).sum();
        let gap = (wg - grad[fw]).max(0.0);
        let rn = norm(&residual);
        let objective = 0.5 * rn * rn + dot(&w, linear);
        state = QpState {
            gap,
            objective,
            residual_norm: rn,
            iteration: iterations,
        };
        if done(&state) {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        let slope = grad[fw] - grad[away];
        if fw == away || slope >= 0.0 {
            // numerically stationary on the current support
            converged = true;
            break;
        }
        let diff: Vec<f64> = (0..k).map(|t| points[fw][t] - points[away][t]).collect();
        let curv = dot(&diff, &diff);
        let max_step = w[away];
        let step = if curv > 0.0 {
            (-slope / curv).min(max_step)
        } else {
            max_step
        };
        if step <= 0.0 {
            converged = true;
            break;
        }
        w[fw] += step;
        if step >= max_step {
            w[away] = 0.0;
        } else {
            w[away] -= step;
        }
        for (r, d) in residual.iter_mut().zip(&diff) {
            *r += step * d;
        }
    }
    residual = combine(points, &w, target);
    let rn = norm(&residual);
    SimplexSolution {
        objective: 0.5 * rn * rn + dot(&w, linear),
        weights: w,
        residual,
        residual_norm: rn,
        gap: state.gap,
        iterations,
        converged,
    }
}

/// Minimizes `½|P w|² + <c, w>` over the simplex with a Wolfe-style active-set
/// method. The support is kept affinely independent, so it never exceeds
/// `dim + 1` points and each minor step is an exact solve of the equality
/// constrained problem on it. Near-degenerate supports end the run with
/// `converged = false`; the weights are still feasible and usable as a warm start.
pub fn solve_simplex_qp_active(points: &[Vec<f64>], linear: &[f64], max_iter: usize) -> SimplexSolution {
    let m = points.len();
    let k = points.first().map_or(0, Vec::len);
    let sc = points.iter().map(|p| dot(p, p)).fold(0.0, f64::max) + linear.iter().fold(0.0, |a: f64, c| a.max(c.abs())) + 1e-300;
    let tol = 4.0 * f64::EPSILON * sc;
    let start = (0..m)
        .min_by(|&i, &j| (0.5 * dot(&points[i], &points[i]) + linear[i]).total_cmp(&(0.5 * dot(&points[j], &points[j]) + linear[j])))
        .expect("non-empty point list");
    let mut w = vec![0.0; m];
    w[start] = 1.0;
    let mut support = vec![start];
    let mut iterations = 0;
    let mut converged = false;
    let mut gap = f64::INFINITY;
    let mut stuck = false;

    while iterations < max_iter {
        iterations += 1;
        let x = combine(points, &w, &vec![0.0; k]);
        let grad: Vec<f64> = points.iter().zip(linear).map(|(p, c)| dot(p, &x) + c).collect();
        let nu: f64 = support.iter().map(|&i| w[i] * grad[i]).sum();
        let j = argmin(&grad, |_| true);
        gap = (nu - grad[j]).max(0.0);
        if grad[j] >= nu - tol {
            converged = true;
            break;
        }
        let mut added = None;
        if !support.contains(&j) {
            match affine_coordinates(points, &support, &points[j], sc) {
                Some(alpha) => {
                    // p_j lies in the affine hull: the objective is linear along e_j - α
                    let slope = grad[j] - support.iter().zip(&alpha).map(|(&i, a)| a * grad[i]).sum::<f64>();
                    if slope >= -tol {
                        converged = true;
                        break;
                    }
                    let (mut t, mut block) = (f64::INFINITY, usize::MAX);
                    for (pos, &i) in support.iter().enumerate() {
                        if alpha[pos] > 0.0 && w[i] / alpha[pos] < t {
                            t = w[i] / alpha[pos];
                            block = pos;
                        }
                    }
                    for (pos, &i) in support.iter().enumerate() {
                        w[i] = (w[i] - t * alpha[pos]).max(0.0);
                    }
                    w[support[block]] = 0.0;
                    w[j] = t;
                    support[block] = j;
                }
                None => {
                    support.push(j);
                    added = Some(j);
                }
            }
        }
        // minor cycle: move toward the affine minimizer on the support, dropping points that hit zero
        loop {
            let Some(mu) = affine_minimizer(points, linear, &support) else {
                stuck = true;
                break;
            };
            if mu.iter().all(|&v| v > 0.0) {
                for (&i, &v) in support.iter().zip(&mu) {
                    w[i] = v;
                }
                break;
            }
            let mut theta = 1.0;
            for (&i, &v) in support.iter().zip(&mu) {
                if v <= 0.0 {
                    theta = f64::min(theta, w[i] / (w[i] - v));
                }
            }
            if theta <= 0.0 && added.is_some_and(|a| mu[support.iter().position(|&i| i == a).unwrap()] <= 0.0) {
                // the new point cannot enter: rounding, not a certified optimum
                support.retain(|&i| Some(i) != added);
                stuck = true;
                break;
            }
            for (&i, &v) in support.iter().zip(&mu) {
                w[i] += theta * (v - w[i]);
            }
            let drop = support
                .iter()
                .copied()
                .filter(|&i| mu[support.iter().position(|&s| s == i).unwrap()] <= 0.0)
                .min_by(|&a, &b| w[a].total_cmp(&w[b]))
                .expect("some coordinate is non-positive");
            w[drop] = 0.0;
            for &i in &support {
                if w[i] <= 0.0 {
                    w[i] = 0.0;
                }
            }
            support.retain(|&i| w[i] > 0.0);
            if support.len() == 1 {
                w.iter_mut().for_each(|v| *v = 0.0);
                w[support[0]] = 1.0;
                break;
            }
            let total: f64 = support.iter().map(|&i| w[i]).sum();
            support.iter().for_each(|&i| w[i] /= total);
        }
        if stuck {
            break;
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let residual = combine(points, &w, &vec![0.0; k]);
    let rn = norm(&residual);
    SimplexSolution {
        objective: 0.5 * rn * rn + dot(&w, linear),
        weights: w,
        residual,
        residual_norm: rn,
        gap,
        iterations,
        converged,
    }
}

/// Coefficients `α` (summing to one) with `Σ α_i p_i = q` over the support, when
/// `q` lies in its affine hull up to rounding; `None` when it does not.
fn affine_coordinates(points: &[Vec<f64>], support: &[usize], q: &[f64], sc: f64) -> Option<Vec<f64>> {
    let s = support.len();
    let base = &points[support[0]];
    // least squares in the differences p_i - p_0, i > 0
    let diffs: Vec<Vec<f64>> = support[1..].iter().map(|&i| sub(&points[i], base)).collect();
    let rhs = sub(q, base);
    let beta = if s == 1 {
        Vec::new()
    } else {
        let gram: Vec<Vec<f64>> = diffs.iter().map(|a| diffs.iter().map(|b| dot(a, b)).collect()).collect();
        let b: Vec<f64> = diffs.iter().map(|a| dot(a, &rhs)).collect();
        solve_dense(gram, b)?
    };
    let mut r = rhs.clone();
    for (bi, di) in beta.iter().zip(&diffs) {
        for (rv, dv) in r.iter_mut().zip(di) {
            *rv -= bi * dv;
        }
    }
    if norm(&r) > 1e-9 * sc.sqrt() {
        return None;
    }
    let mut alpha = vec![1.0 - beta.iter().sum::<f64>()];
    alpha.extend(beta);
    Some(alpha)
}

/// Minimizer of `½|P_S μ|² + <c_S, μ>` subject to `Σ μ = 1` (signs free).
fn affine_minimizer(points: &[Vec<f64>], linear: &[f64], support: &[usize]) -> Option<Vec<f64>> {
    let s = support.len();
    let mut a = vec![vec![0.0; s + 1]; s + 1];
    let mut b = vec![0.0; s + 1];
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            a[r][c] = dot(&points[i], &points[j]);
        }
        a[r][s] = 1.0;
        a[s][r] = 1.0;
        b[r] = -linear[i];
    }
    b[s] = 1.0;
    let mut sol = solve_dense(a, b)?;
    sol.truncate(s);
    Some(sol)
}

/// Gaussian elimination with partial pivoting; `None` on a numerically singular matrix.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let big = a.iter().flatten().fold(0.0, |m: f64, v| m.max(v.abs()));
    if big == 0.0 {
        return None;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * big {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn combine(points: &[Vec<f64>], w: &[f64], target: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = target.iter().map(|t| -t).collect();
    for (p, &wi) in points.iter().zip(w) {
        if wi != 0.0 {
            for (o, x) in out.iter_mut().zip(p) {
                *o += wi * x;
            }
        }
    }
    out
}

fn argmin(v: &[f64], keep: impl Fn(usize) -> bool) -> usize {
    let mut best = usize::MAX;
    for i in 0..v.len() {
        if keep(i) && (best == usize::MAX || v[i] < v[best]) {
            best = i;
        }
    }
    best
}

fn argmax(v: &[f64], keep: impl Fn(usize) -> bool) -> usize {
    let mut best = usize::MAX;
    for i in 0..v.len() {
        if keep(i) && (best == usize::MAX || v[i] > v[best]) {
            best = i;
        }
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}
