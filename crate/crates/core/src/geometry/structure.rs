//! `V` of tensor and block-diagonal tuples against the sets predicted from the
//! factors: `V(I ⊗ X_j ⊗ I) = Π_j V(X_j)` for one block, and the convex hull of
//! the products over the blocks of maximal `Σ_j ‖X_{j,k}‖²` for several.
//!
//! Both directions are checked point by point against the exact sets rather
//! than cloud to cloud:
//! * each sampled `V(A)` point is measured against the factor ranges, which are
//!   planar convex sets with computable support functions;
//! * each product point comes with a tensor witness, which is projected onto the
//!   computed top eigenspace of `A` and evaluated there.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::planar::PlanarRange;
use super::{compress, point_distance, sample_v, top_eigenspace, TopEigenspace, DEFAULT_REL_TOL};
use crate::error::{OtkError, Result};
use crate::linalg::matrix::{kron_vec, norm, ComplexMatrix};
use crate::parallel::map_indexed;
use crate::random::rng_for;
use crate::tuple::{gen_doubly, tuple_norm, BlockSpec, Conjugation, FactorSpec, OperatorTuple};
use rand::Rng;

const MAX_BLOCK_REL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductReport {
    /// Largest distance from a sampled `V(A)` point to `Π_j V(X_j)`.
    pub forward: f64,
    /// Largest distance from a sampled product point to `V(A)`.
    pub backward: f64,
    pub hausdorff: f64,
    pub points_forward: usize,
    pub points_backward: usize,
    pub samples: usize,
    pub boundary_dirs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockReport {
    /// `Σ_j ‖X_{j,k}‖²` per block.
    pub block_norms: Vec<f64>,
    pub maximal_blocks: Vec<usize>,
    /// Largest weight a sampled `V(A)` witness puts on non-maximal blocks.
    pub nonmaximal_mass: f64,
    /// Largest distance bound from a sampled `V(A)` point to the hull of the maximal-block products.
    pub forward: f64,
    pub backward: f64,
    pub hausdorff: f64,
    pub points_forward: usize,
    pub points_backward: usize,
    pub samples: usize,
    pub boundary_dirs: usize,
    pub seed: u64,
}

/// `V(X)` of one factor as a planar convex set.
fn factor_range(x: &ComplexMatrix) -> Result<PlanarRange> {
    let t = OperatorTuple::new(vec![x.clone()])?;
    let e = top_eigenspace(&t, DEFAULT_REL_TOL);
    Ok(PlanarRange::new(compress(&t, &e).get(0).clone()))
}

/// Distance from `p ∈ C^d` to `Π_j V(X_j)`.
fn product_distance(p: &[Complex64], ranges: &[PlanarRange]) -> f64 {
    p.iter()
        .zip(ranges)
        .map(|(z, r)| r.distance(*z).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Distance from `q` to the point of `V(A)` generated by projecting `y` onto the top eigenspace.
fn witness_gap(a: &OperatorTuple, e: &TopEigenspace, y: &[Complex64], q: &[Complex64]) -> f64 {
    let coords = e.coordinates(y);
    let kept = norm(&coords);
    if kept < 0.5 {
        return f64::INFINITY;
    }
    let mut x = e.lift(&coords);
    // leakage out of the eigenspace is part of the error
    let leak = norm(&y.iter().zip(&x).map(|(u, v)| u - v).collect::<Vec<_>>());
    x.iter_mut().for_each(|z| *z /= kept);
    point_distance(&a.expectations(&x), q) + leak * tuple_norm(a)
}

/// Per-factor `V` samples as `(point, witness)` pairs, one list per factor.
fn factor_samples(
    factors: &[&ComplexMatrix],
    samples: usize,
    seed: u64,
    boundary_dirs: usize,
    salt: u64,
) -> Result<Vec<Vec<(Complex64, Vec<Complex64>)>>> {
    factors
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let t = OperatorTuple::new(vec![(*x).clone()])?;
            let s = sample_v(&t, samples, seed ^ (salt.wrapping_mul(0x9E37_79B9) + j as u64 + 1), boundary_dirs)?;
            Ok(s.points.iter().map(|p| p[0]).zip(s.witnesses).collect())
        })
        .collect()
}

/// Product points and their tensor witnesses, pairing the `i`-th sample of every factor.
fn tensor_points(samples: &[Vec<(Complex64, Vec<Complex64>)>]) -> Vec<(Vec<Complex64>, Vec<Complex64>)> {
    let len = samples.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let q: Vec<Complex64> = samples.iter().map(|s| s[i].0).collect();
            let y = samples[1..]
                .iter()
                .fold(samples[0][i].1.clone(), |acc, s| kron_vec(&acc, &s[i].1));
            (q, y)
        })
        .collect()
}

/// Compares sampled `V(I ⊗ X_j ⊗ I)` with `Π_j V(X_j)`.
pub fn v_product_check(
    factors: &[ComplexMatrix],
    samples: usize,
    boundary_dirs: usize,
    seed: u64,
) -> Result<ProductReport> {
    if factors.is_empty() {
        return Err(OtkError::EmptyInput);
    }
    let spec = FactorSpec::new(vec![BlockSpec::explicit(factors.to_vec())]);
    let (a, _) = gen_doubly(&spec, seed)?;
    let ranges = factors.iter().map(factor_range).collect::<Result<Vec<_>>>()?;

    let sv = sample_v(&a, samples, seed, boundary_dirs)?;
    let forward = map_indexed(sv.len(), |i| product_distance(&sv.points[i], &ranges))
        .into_iter()
        .fold(0.0, f64::max);

    let e = top_eigenspace(&a, DEFAULT_REL_TOL);
    let refs: Vec<&ComplexMatrix> = factors.iter().collect();
    let prods = tensor_points(&factor_samples(&refs, samples, seed, boundary_dirs, 0)?);
    let backward = map_indexed(prods.len(), |i| witness_gap(&a, &e, &prods[i].1, &prods[i].0))
        .into_iter()
        .fold(0.0, f64::max);

    Ok(ProductReport {
        forward,
        backward,
        hausdorff: forward.max(backward),
        points_forward: sv.len(),
        points_backward: prods.len(),
        samples,
        boundary_dirs,
        seed,
    })
}

/// Compares sampled `V(A)` of a block-diagonal doubly commuting tuple with the
/// hull of the factor products over the maximal blocks. `spec` must be
/// materialized (explicit factors), as returned by `gen_doubly`.
pub fn v_block_formula_check(
    spec: &FactorSpec,
    samples: usize,
    boundary_dirs: usize,
    seed: u64,
) -> Result<BlockReport> {
    let factors: Vec<Vec<&ComplexMatrix>> = spec
        .blocks
        .iter()
        .map(|b| b.factors())
        .collect::<Option<_>>()
        .ok_or_else(|| OtkError::InvalidInput("block check needs explicit factors".into()))?;
    if matches!(spec.conjugation, Conjugation::Random) {
        return Err(OtkError::InvalidInput("block check needs a materialized conjugation".into()));
    }
    let (a, _) = gen_doubly(spec, seed)?;
    let unitary = match &spec.conjugation {
        Conjugation::Explicit(u) => Some(u),
        _ => None,
    };
    let offsets = spec.offsets();
    let sizes: Vec<usize> = spec.blocks.iter().map(BlockSpec::size).collect();

    let block_norms: Vec<f64> = factors
        .iter()
        .map(|fs| fs.iter().map(|x| x.spectral_norm().powi(2)).sum())
        .collect();
    let top = block_norms.iter().cloned().fold(0.0, f64::max);
    let maximal_blocks: Vec<usize> = (0..block_norms.len())
        .filter(|&k| block_norms[k] >= top * (1.0 - MAX_BLOCK_REL))
        .collect();
    let is_max: Vec<bool> = (0..block_norms.len()).map(|k| maximal_blocks.contains(&k)).collect();

    // canonical (unconjugated) per-block tuples
    let block_tuples: Vec<OperatorTuple> = spec
        .blocks
        .iter()
        .map(|b| gen_doubly(&FactorSpec::new(vec![b.clone()]), 0).map(|(t, _)| t))
        .collect::<Result<_>>()?;
    let ranges: Vec<Vec<PlanarRange>> = factors
        .iter()
        .map(|fs| fs.iter().map(|x| factor_range(x)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let norm_a = tuple_norm(&a);

    let to_canonical = |x: &[Complex64]| -> Vec<Complex64> {
        match unitary {
            Some(u) => u.matvec(x),
            None => x.to_vec(),
        }
    };
    let from_canonical = |x: &[Complex64]| -> Vec<Complex64> {
        match unitary {
            Some(u) => u.adjoint_matvec(x),
            None => x.to_vec(),
        }
    };

    let sv = sample_v(&a, samples, seed, boundary_dirs)?;
    let per_point = map_indexed(sv.len(), |i| {
        let x = to_canonical(&sv.witnesses[i]);
        let mut nonmax = 0.0;
        let mut bound = 0.0;
        for (k, (&o, &sz)) in offsets.iter().zip(&sizes).enumerate() {
            let seg = &x[o..o + sz];
            let s = seg.iter().map(|z| z.norm_sqr()).sum::<f64>();
            if !is_max[k] {
                nonmax += s;
                continue;
            }
            if s <= 0.0 {
                continue;
            }
            let y: Vec<Complex64> = seg.iter().map(|z| z / s.sqrt()).collect();
            let q = block_tuples[k].expectations(&y);
            bound += s * product_distance(&q, &ranges[k]);
        }
        // the hull point keeps the maximal-block weights renormalized; the
        // remaining mass moves points by at most twice the tuple norm
        (nonmax, bound + 2.0 * nonmax * norm_a)
    });
    let nonmaximal_mass = per_point.iter().map(|p| p.0).fold(0.0, f64::max);
    let forward = per_point.iter().map(|p| p.1).fold(0.0, f64::max);

    let e = top_eigenspace(&a, DEFAULT_REL_TOL);
    let n = a.n();
    let embed = |k: usize, y: &[Complex64], into: &mut Vec<Complex64>, w: f64| {
        for (t, z) in y.iter().enumerate() {
            into[offsets[k] + t] += z * w;
        }
    };
    let mut gaps = Vec::new();
    let mut per_block: Vec<Vec<(Vec<Complex64>, Vec<Complex64>)>> = Vec::new();
    for &k in &maximal_blocks {
        let prods = tensor_points(&factor_samples(&factors[k], samples, seed, boundary_dirs, k as u64)?);
        gaps.extend(map_indexed(prods.len(), |i| {
            let mut x = vec![Complex64::new(0.0, 0.0); n];
            embed(k, &prods[i].1, &mut x, 1.0);
            witness_gap(&a, &e, &from_canonical(&x), &prods[i].0)
        }));
        per_block.push(prods);
    }
    // convex combinations across maximal blocks: ⊕ √t_k y_k gives Σ t_k q_k
    let mut mixed = 0;
    if maximal_blocks.len() > 1 {
        let mut rng = rng_for(seed, 1 << 41);
        let len = per_block.iter().map(Vec::len).min().unwrap_or(0);
        for i in 0..samples.min(len) {
            let t: Vec<f64> = (0..maximal_blocks.len()).map(|_| rng.random_range(0.0..1.0)).collect();
            let total: f64 = t.iter().sum();
            let mut x = vec![Complex64::new(0.0, 0.0); n];
            let mut q = vec![Complex64::new(0.0, 0.0); a.d()];
            for (slot, &k) in maximal_blocks.iter().enumerate() {
                let w = t[slot] / total;
                embed(k, &per_block[slot][i].1, &mut x, w.sqrt());
                for (qj, pj) in q.iter_mut().zip(&per_block[slot][i].0) {
                    *qj += pj * w;
                }
            }
            gaps.push(witness_gap(&a, &e, &from_canonical(&x), &q));
            mixed += 1;
        }
    }
    let backward = gaps.iter().cloned().fold(0.0, f64::max);
    let points_backward = per_block.iter().map(Vec::len).sum::<usize>() + mixed;

    Ok(BlockReport {
        block_norms,
        maximal_blocks,
        nonmaximal_mass,
        forward,
        backward,
        hausdorff: forward.max(backward),
        points_forward: sv.len(),
        points_backward,
        samples,
        boundary_dirs,
        seed,
    })
}
