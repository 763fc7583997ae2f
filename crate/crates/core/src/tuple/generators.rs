//! Instance generators: doubly commuting tuples in block/tensor canonical form,
//! Toeplitz finite sections, and diagonal (commuting normal) tuples.

use std::str::FromStr;

use num_complex::Complex64;

use super::OperatorTuple;
use crate::error::{OtkError, Result};
use crate::linalg::kron::{embed_factor, DEFAULT_DIM_CAP};
use crate::linalg::ComplexMatrix;
use crate::random::{gaussian_matrix, random_unitary, rng_for, SeededRng};
use rand::Rng;

/// How a factor `X_{j,k}` is filled.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorFill {
    /// Complex Ginibre entries scaled by `1/√p`.
    Gaussian,
    /// Haar unitary: every unit vector is a top singular vector.
    Unitary,
    /// `Q diag(1, 1, s_3, ...) R` with random unitaries, so the top singular
    /// space has dimension 2 (or `p` when `p <= 2`).
    DegenerateTop,
    Explicit(ComplexMatrix),
}

/// One diagonal block `k` of the canonical form: factor sizes `p_{1,k}, ..., p_{d,k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub dims: Vec<usize>,
    pub fills: Vec<FactorFill>,
}

impl BlockSpec {
    pub fn gaussian(dims: Vec<usize>) -> Self {
        let fills = vec![FactorFill::Gaussian; dims.len()];
        Self { dims, fills }
    }

    pub fn explicit(factors: Vec<ComplexMatrix>) -> Self {
        Self {
            dims: factors.iter().map(ComplexMatrix::rows).collect(),
            fills: factors.into_iter().map(FactorFill::Explicit).collect(),
        }
    }

    /// `m_k = p_{1,k} ⋯ p_{d,k}`.
    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    /// Materialized factors; `None` unless every fill is explicit.
    pub fn factors(&self) -> Option<Vec<&ComplexMatrix>> {
        self.fills
            .iter()
            .map(|f| match f {
                FactorFill::Explicit(m) => Some(m),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Conjugation {
    None,
    /// Seeded Haar unitary applied after assembly.
    Random,
    Explicit(ComplexMatrix),
}

/// Block/tensor description of a doubly commuting tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSpec {
    pub blocks: Vec<BlockSpec>,
    pub conjugation: Conjugation,
}

impl FactorSpec {
    pub fn new(blocks: Vec<BlockSpec>) -> Self {
        Self {
            blocks,
            conjugation: Conjugation::None,
        }
    }

    /// Gaussian factors with the given dimension lists, e.g. `[[2, 2], [1, 1]]`.
    pub fn gaussian(dims: &[Vec<usize>]) -> Self {
        Self::new(dims.iter().cloned().map(BlockSpec::gaussian).collect())
    }

    pub fn with_conjugation(mut self, c: Conjugation) -> Self {
        self.conjugation = c;
        self
    }

    pub fn d(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.dims.len())
    }

    /// `n = Σ_k Π_j p_{j,k}`.
    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(BlockSpec::size).sum()
    }

    /// Block offsets into the assembled space.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.blocks
            .iter()
            .map(|b| {
                let o = acc;
                acc += b.size();
                o
            })
            .collect()
    }

    fn validate(&self) -> Result<usize> {
        let d = self.d();
        if self.blocks.is_empty() || d == 0 {
            return Err(OtkError::EmptyInput);
        }
        for (k, b) in self.blocks.iter().enumerate() {
            if b.dims.len() != d || b.fills.len() != d {
                return Err(OtkError::InvalidInput(format!(
                    "block {k} has {} factor sizes and {} fills, expected {d}",
                    b.dims.len(),
                    b.fills.len()
                )));
            }
            if b.dims.contains(&0) {
                return Err(OtkError::InvalidInput(format!("block {k} has a zero factor size")));
            }
            for (p, f) in b.dims.iter().zip(&b.fills) {
                if let FactorFill::Explicit(m) = f {
                    if !m.is_square() || m.rows() != *p {
                        return Err(OtkError::InvalidInput(format!(
                            "explicit factor in block {k} is {}x{}, expected {p}x{p}",
                            m.rows(),
                            m.cols()
                        )));
                    }
                }
            }
        }
        Ok(d)
    }
}

/// Doubly commuting tuple with the default dimension cap.
pub fn gen_doubly(spec: &FactorSpec, seed: u64) -> Result<(OperatorTuple, FactorSpec)> {
    gen_doubly_capped(spec, seed, DEFAULT_DIM_CAP)
}

/// Builds `A_j = U^* (⊕_k I ⊗ ⋯ ⊗ X_{j,k} ⊗ ⋯ ⊗ I) U` and returns the
/// materialized spec (explicit factors and unitary).
pub fn gen_doubly_capped(spec: &FactorSpec, seed: u64, cap: usize) -> Result<(OperatorTuple, FactorSpec)> {
    let d = spec.validate()?;
    let mut n: usize = 0;
    for b in &spec.blocks {
        let size = b
            .dims
            .iter()
            .try_fold(1usize, |acc, &p| acc.checked_mul(p))
            .filter(|&s| s <= cap)
            .ok_or(OtkError::SizeOverflow { dim: usize::MAX, cap })?;
        n = n.saturating_add(size);
    }
    if n > cap {
        return Err(OtkError::SizeOverflow { dim: n, cap });
    }

    let mut rng = rng_for(seed, 0);
    let mut blocks = Vec::with_capacity(spec.blocks.len());
    for b in &spec.blocks {
        let factors: Vec<ComplexMatrix> = b
            .dims
            .iter()
            .zip(&b.fills)
            .map(|(&p, fill)| materialize(p, fill, &mut rng))
            .collect();
        blocks.push(BlockSpec::explicit(factors));
    }

    let mut mats = vec![ComplexMatrix::zeros(n, n); d];
    let mut offset = 0;
    for b in &blocks {
        let factors = b.factors().expect("materialized");
        for j in 0..d {
            let left: usize = b.dims[..j].iter().product();
            let right: usize = b.dims[j + 1..].iter().product();
            let aj = embed_factor(factors[j], left, right, cap)?;
            mats[j].set_block(offset, offset, &aj);
        }
        offset += b.size();
    }
    let unitary = match &spec.conjugation {
        Conjugation::None => None,
        Conjugation::Random => Some(random_unitary(n, &mut rng)),
        Conjugation::Explicit(u) => {
            if u.rows() != n || !u.is_square() {
                return Err(OtkError::InvalidInput("conjugating unitary has the wrong size".into()));
            }
            Some(u.clone())
        }
    };
    let mut tuple = OperatorTuple::new(mats)?;
    if let Some(u) = &unitary {
        tuple = tuple.conjugate_by(u);
    }
    let materialized = FactorSpec {
        blocks,
        conjugation: unitary.map_or(Conjugation::None, Conjugation::Explicit),
    };
    Ok((tuple, materialized))
}

fn materialize(p: usize, fill: &FactorFill, rng: &mut SeededRng) -> ComplexMatrix {
    match fill {
        FactorFill::Explicit(m) => m.clone(),
        FactorFill::Gaussian => gaussian_matrix(p, p, rng).scale_real(1.0 / (p as f64).sqrt()),
        FactorFill::Unitary => random_unitary(p, rng),
        FactorFill::DegenerateTop => {
            let q = random_unitary(p, rng);
            let r = random_unitary(p, rng);
            let sv: Vec<Complex64> = (0..p)
                .map(|i| {
                    let s = if i < 2 { 1.0 } else { rng.random_range(0.1..0.8) };
                    Complex64::new(s, 0.0)
                })
                .collect();
            q.matmul(&ComplexMatrix::from_diag(&sv)).matmul(&r)
        }
    }
}

/// Fourier coefficients `c_k` of a Toeplitz symbol; unspecified coefficients are zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ToeplitzSymbol {
    pub coefficients: Vec<(i64, Complex64)>,
}

impl ToeplitzSymbol {
    pub fn new(coefficients: Vec<(i64, Complex64)>) -> Self {
        Self { coefficients }
    }

    /// Symbol with a single coefficient `c_k = value`.
    pub fn single(k: i64, value: Complex64) -> Self {
        Self::new(vec![(k, value)])
    }

    pub fn coefficient(&self, k: i64) -> Complex64 {
        self.coefficients
            .iter()
            .filter(|(i, _)| *i == k)
            .map(|(_, v)| *v)
            .sum()
    }
}

impl FromStr for ToeplitzSymbol {
    type Err = OtkError;

    /// Parses `"c-1=0.5,c0=1,c1=2-1i"`.
    fn from_str(s: &str) -> Result<Self> {
        let mut coefficients = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| OtkError::InvalidInput(format!("expected c<k>=<value>, got {part:?}")))?;
            let idx = key
                .trim()
                .strip_prefix('c')
                .and_then(|k| k.parse::<i64>().ok())
                .ok_or_else(|| OtkError::InvalidInput(format!("bad coefficient index {key:?}")))?;
            coefficients.push((idx, parse_complex(value.trim())?));
        }
        if coefficients.is_empty() {
            return Err(OtkError::EmptyInput);
        }
        Ok(Self { coefficients })
    }
}

/// Parses `"1.5"`, `"-2i"`, `"i"`, `"1+2i"` or `"0.5-0.25i"`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let bad = || OtkError::InvalidInput(format!("cannot parse complex number {s:?}"));
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
        return t.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let mut split = None;
    for i in (1..bytes.len()).rev() {
        if (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E') {
            split = Some(i);
            break;
        }
    }
    let imag = |txt: &str| -> Result<f64> {
        match txt {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => txt.parse::<f64>().map_err(|_| bad()),
        }
    };
    match split {
        Some(i) => {
            let re = body[..i].parse::<f64>().map_err(|_| bad())?;
            Ok(Complex64::new(re, imag(&body[i..])?))
        }
        None => Ok(Complex64::new(0.0, imag(body)?)),
    }
}

/// `n x n` finite sections `(A_j)_{r,s} = c^{(j)}_{r-s}`.
pub fn gen_toeplitz(symbols: &[ToeplitzSymbol], n: usize) -> Result<OperatorTuple> {
    if symbols.is_empty() {
        return Err(OtkError::EmptyInput);
    }
    if n == 0 {
        return Err(OtkError::InvalidInput("section size must be at least 1".into()));
    }
    let mats = symbols
        .iter()
        .map(|sym| {
            let mut m = ComplexMatrix::zeros(n, n);
            for &(k, v) in &sym.coefficients {
                for r in 0..n {
                    let s = r as i64 - k;
                    if s >= 0 && (s as usize) < n {
                        m[(r, s as usize)] += v;
                    }
                }
            }
            m
        })
        .collect();
    OperatorTuple::new(mats)
}

/// Diagonal tuple whose `k`-th diagonal entries are the coordinates of `points[k]`.
pub fn gen_commuting_normal(points: &[Vec<Complex64>]) -> Result<OperatorTuple> {
    let first = points.first().ok_or(OtkError::EmptyInput)?;
    let d = first.len();
    if d == 0 {
        return Err(OtkError::EmptyInput);
    }
    if let Some(bad) = points.iter().find(|p| p.len() != d) {
        return Err(OtkError::LengthMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    let mats = (0..d)
        .map(|j| ComplexMatrix::from_diag(&points.iter().map(|p| p[j]).collect::<Vec<_>>()))
        .collect();
    OperatorTuple::new(mats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron;
    use crate::tuple::{gram, is_doubly_commuting, tuple_norm};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn single_block_product() {
        let x1 = ComplexMatrix::from_diag(&[c(0.0), c(2.0)]);
        let x2 = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let spec = FactorSpec::new(vec![BlockSpec::explicit(vec![x1.clone(), x2.clone()])]);
        let (a, _) = gen_doubly(&spec, 0).unwrap();
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(a.get(0), &kron(&x1, &i2).unwrap());
        assert_eq!(a.get(1), &kron(&i2, &x2).unwrap());
    }

    #[test]
    fn two_blocks_dimension() {
        let spec = FactorSpec::gaussian(&[vec![2, 2], vec![1, 1]]);
        let (a, mat) = gen_doubly(&spec, 3).unwrap();
        assert_eq!(a.n(), 5);
        assert_eq!(mat.total_dim(), 5);
        // off-diagonal block coupling is zero
        for j in 0..2 {
            for r in 0..4 {
                assert_eq!(a.get(j)[(r, 4)], c(0.0));
                assert_eq!(a.get(j)[(4, r)], c(0.0));
            }
        }
    }

    #[test]
    fn generated_tuples_doubly_commute() {
        let fills = [FactorFill::Gaussian, FactorFill::Unitary, FactorFill::DegenerateTop];
        for seed in 0..30u64 {
            let d = 1 + (seed as usize % 3);
            let blocks = (0..1 + seed as usize % 3)
                .map(|k| BlockSpec {
                    dims: (0..d).map(|j| 1 + (seed as usize + j + k) % 3).collect(),
                    fills: (0..d).map(|j| fills[(seed as usize + j) % 3].clone()).collect(),
                })
                .collect();
            let conj = if seed % 2 == 0 { Conjugation::Random } else { Conjugation::None };
            let spec = FactorSpec::new(blocks).with_conjugation(conj);
            let (a, mat) = gen_doubly(&spec, seed).unwrap();
            let rep = is_doubly_commuting(&a, 1e-10);
            assert!(rep.doubly_commuting, "seed {seed}: {rep:?}");

            // ‖A‖² = max_k Σ_j ‖X_{j,k}‖²
            let expected = mat
                .blocks
                .iter()
                .map(|b| b.factors().unwrap().iter().map(|x| x.spectral_norm().powi(2)).sum::<f64>())
                .fold(0.0, f64::max);
            assert!((tuple_norm(&a).powi(2) - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn gram_is_blockwise_sum_of_embedded_factor_grams() {
        let spec = FactorSpec::gaussian(&[vec![2, 3], vec![2, 1]]);
        let (a, mat) = gen_doubly(&spec, 9).unwrap();
        let g = gram(&a);
        let offs = mat.offsets();
        for (b, &o) in mat.blocks.iter().zip(&offs) {
            let f = b.factors().unwrap();
            let m = b.size();
            let mut want = ComplexMatrix::zeros(m, m);
            for j in 0..2 {
                let left: usize = b.dims[..j].iter().product();
                let right: usize = b.dims[j + 1..].iter().product();
                let xx = f[j].adjoint_mul(f[j]);
                want.axpy(c(1.0), &embed_factor(&xx, left, right, 4096).unwrap());
            }
            assert!((&g.block(o, o, m, m) - &want).max_abs() < 1e-13);
        }
    }

    #[test]
    fn size_overflow() {
        let spec = FactorSpec::gaussian(&[vec![64, 65]]);
        assert!(matches!(gen_doubly(&spec, 0), Err(OtkError::SizeOverflow { .. })));
    }

    #[test]
    fn toeplitz_band_placement() {
        let s = gen_toeplitz(&[ToeplitzSymbol::single(1, c(1.0))], 3).unwrap();
        let want = ComplexMatrix::from_real_rows(&[&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(s.get(0), &want);

        let alpha = Complex64::new(0.3, -2.0);
        let t = gen_toeplitz(&[ToeplitzSymbol::single(0, alpha)], 4).unwrap();
        assert_eq!(t.get(0), &ComplexMatrix::scalar(4, alpha));

        let pair = gen_toeplitz(
            &[ToeplitzSymbol::single(1, c(1.0)), ToeplitzSymbol::single(-1, c(1.0))],
            2,
        )
        .unwrap();
        assert_eq!(pair.get(0), &ComplexMatrix::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]).unwrap());
        assert_eq!(pair.get(1), &ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap());
    }

    #[test]
    fn symbol_parsing() {
        let s: ToeplitzSymbol = "c-1=0.5, c0=1+2i,c1=-i".parse().unwrap();
        assert_eq!(s.coefficient(-1), c(0.5));
        assert_eq!(s.coefficient(0), Complex64::new(1.0, 2.0));
        assert_eq!(s.coefficient(1), Complex64::new(0.0, -1.0));
        assert_eq!(parse_complex("1e-3-2.5e2i").unwrap(), Complex64::new(1e-3, -250.0));
        assert!("x1=2".parse::<ToeplitzSymbol>().is_err());
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn commuting_normal_examples() {
        let pts = vec![vec![c(0.0), c(0.0)], vec![c(1.0), c(1.0)]];
        let a = gen_commuting_normal(&pts).unwrap();
        assert_eq!(a.get(0), &ComplexMatrix::from_diag(&[c(0.0), c(1.0)]));
        assert_eq!(a.get(1), &ComplexMatrix::from_diag(&[c(0.0), c(1.0)]));
        assert!(is_doubly_commuting(&a, 1e-12).doubly_commuting);
        let z = vec![Complex64::new(1.0, -1.0), c(2.0)];
        let one = gen_commuting_normal(&[z.clone()]).unwrap();
        assert_eq!(one.n(), 1);
        assert_eq!(one.get(0)[(0, 0)], z[0]);
        assert!(matches!(gen_commuting_normal(&[]), Err(OtkError::EmptyInput)));
    }
}
