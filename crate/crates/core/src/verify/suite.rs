//! The reproducible check suite: twelve numbered criteria, an exploratory
//! search over commuting tuples, and a deterministic JSON summary.

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_equality_with, toeplitz_section_sweep, ExpectedClass, CENTERED_MEMBERSHIP};
use crate::error::{OtkError, Result};
use crate::geometry::{
    hull_diagnostic, membership_zero_in_conv_v_with, sample_v_with, sample_w, v_block_formula_check,
    v_product_check, MembershipOptions,
};
use crate::io::{to_json_pretty, write_json_pretty};
use crate::linalg::matrix::inner;
use crate::linalg::ComplexMatrix;
use crate::parallel::map_indexed;
use crate::random::{complex_gaussian, gaussian_matrix, random_unitary, rng_for, unit_vector, SeededRng};
use crate::solvers::{
    chebyshev_radius_normal, dist_objective, dist_to_scalars, grid_refine_dist2, max_variance, variance_gradient,
    SolverOptions,
};
use crate::tuple::{
    gallery, gen_commuting_normal, gen_doubly, gram, shift, tuple_norm, BlockSpec, Conjugation, FactorFill,
    FactorSpec, GalleryName, OperatorTuple, Shift, ToeplitzSymbol,
};

/// Largest matrix size the suite will generate.
pub const SUITE_DIM_CAP: usize = 64;
/// Largest tuple length the suite will generate.
pub const SUITE_D_CAP: usize = 4;
/// Number of numbered criteria run by [`run_suite`].
pub const CRITERIA: u32 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteCounts {
    pub doubly: usize,
    pub inequality: usize,
    pub normal: usize,
    pub single: usize,
    pub product: usize,
    pub block: usize,
    pub probe: usize,
    pub gradient: usize,
    pub exploratory: usize,
}

impl Default for SuiteCounts {
    fn default() -> Self {
        Self {
            doubly: 100,
            inequality: 500,
            normal: 100,
            single: 100,
            product: 50,
            block: 25,
            probe: 50,
            gradient: 100,
            exploratory: 32,
        }
    }
}

impl SuiteCounts {
    fn entries(&self) -> [(&'static str, usize); 9] {
        [
            ("doubly", self.doubly),
            ("inequality", self.inequality),
            ("normal", self.normal),
            ("single", self.single),
            ("product", self.product),
            ("block", self.block),
            ("probe", self.probe),
            ("gradient", self.gradient),
            ("exploratory", self.exploratory),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteDims {
    /// Matrix size cap for general random tuples.
    pub general_n_max: usize,
    pub d_max: usize,
    /// Matrix size cap for single operators.
    pub single_n_max: usize,
    pub normal_n_max: usize,
    /// Largest factor size in tensor and block instances.
    pub factor_max: usize,
    pub blocks_max: usize,
    pub exploratory_n_max: usize,
}

impl Default for SuiteDims {
    fn default() -> Self {
        Self {
            general_n_max: 16,
            d_max: 4,
            single_n_max: 32,
            normal_n_max: 16,
            factor_max: 3,
            blocks_max: 3,
            exploratory_n_max: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteTolerances {
    /// Equality tolerance on normalized gaps.
    pub tol_eq: f64,
    /// Equality tolerance used to label Toeplitz sections.
    pub tol_eq_sections: f64,
    pub tol_ineq: f64,
    /// Agreement with gallery values and the grid oracle.
    pub gallery: f64,
    pub minimizer: f64,
    /// Residual of the density-matrix certificate for the centered example.
    pub conv_witness: f64,
    /// Residual of the unit-vector certificate on equality instances.
    pub v_witness: f64,
    pub normal_radius: f64,
    pub hausdorff: f64,
    pub block_hull: f64,
    pub probe: f64,
    pub gradient: f64,
    /// Minimal top-eigenvalue gap for a gradient sample of the distance objective.
    pub eigen_gap_filter: f64,
    pub toeplitz_gap_max: f64,
}

impl Default for SuiteTolerances {
    fn default() -> Self {
        Self {
            tol_eq: super::TOL_EQ,
            tol_eq_sections: super::TOL_EQ,
            tol_ineq: super::TOL_INEQ,
            gallery: 1e-6,
            minimizer: 1e-7,
            conv_witness: 1e-8,
            v_witness: 1e-6,
            normal_radius: 1e-7,
            hausdorff: 1e-5,
            block_hull: 1e-6,
            probe: 1e-7,
            gradient: 1e-5,
            eigen_gap_filter: 1e-6,
            toeplitz_gap_max: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    pub counts: SuiteCounts,
    pub dims: SuiteDims,
    pub tolerances: SuiteTolerances,
    pub solver: SolverOptions,
    pub samples: usize,
    pub boundary_dirs: usize,
    pub probe_shifts: usize,
    pub toeplitz_sections: Vec<usize>,
    /// Criteria to run; all of them when empty.
    pub only: Vec<u32>,
    /// Where the JSON summary goes.
    pub output: Option<PathBuf>,
    /// Directory for CSV range samples.
    pub csv_dir: Option<PathBuf>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            counts: SuiteCounts::default(),
            dims: SuiteDims::default(),
            tolerances: SuiteTolerances::default(),
            solver: SolverOptions::default(),
            samples: 2048,
            boundary_dirs: 256,
            probe_shifts: 1000,
            toeplitz_sections: vec![4, 8, 16, 32],
            only: Vec::new(),
            output: None,
            csv_dir: None,
        }
    }
}

impl SuiteConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s).map_err(|e| OtkError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(OtkError::Config(m));
        for (name, n) in self.counts.entries() {
            if n == 0 {
                return bad(format!("instance count {name} must be at least 1"));
            }
        }
        let d = &self.dims;
        for (name, n) in [
            ("general_n_max", d.general_n_max),
            ("single_n_max", d.single_n_max),
            ("normal_n_max", d.normal_n_max),
            ("exploratory_n_max", d.exploratory_n_max),
        ] {
            if n == 0 || n > SUITE_DIM_CAP {
                return bad(format!("{name} = {n} is outside 1..={SUITE_DIM_CAP}"));
            }
        }
        if d.d_max == 0 || d.d_max > SUITE_D_CAP {
            return bad(format!("d_max = {} is outside 1..={SUITE_D_CAP}", d.d_max));
        }
        if !(2..=4).contains(&d.factor_max) {
            return bad(format!("factor_max = {} is outside 2..=4", d.factor_max));
        }
        if !(2..=4).contains(&d.blocks_max) {
            return bad(format!("blocks_max = {} is outside 2..=4", d.blocks_max));
        }
        if self.samples == 0 || self.probe_shifts == 0 {
            return bad("samples and probe_shifts must be at least 1".into());
        }
        let t = &self.toeplitz_sections;
        if t.len() < 2 || t.windows(2).any(|w| w[0] >= w[1]) || t[0] == 0 || t[t.len() - 1] > SUITE_DIM_CAP {
            return bad("toeplitz_sections needs two or more strictly ascending sizes in 1..=64".into());
        }
        if let Some(&c) = self.only.iter().find(|&&c| c == 0 || c > CRITERIA) {
            return bad(format!("unknown criterion {c}"));
        }
        let tol = serde_json::to_value(&self.tolerances).map_err(|e| OtkError::Config(e.to_string()))?;
        if let Some((k, _)) = tol
            .as_object()
            .into_iter()
            .flatten()
            .find(|(_, v)| !v.as_f64().is_some_and(|x| x.is_finite() && x > 0.0))
        {
            return bad(format!("tolerance {k} must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionStatus {
    Pass,
    Fail,
    /// A solver hit its iteration cap, so the criterion was not decided.
    ConvergenceFailure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: String,
    pub status: CriterionStatus,
    pub instances: usize,
    pub failures: usize,
    /// Named worst-case quantities, compared against the tolerances.
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl CriterionOutcome {
    pub fn passed(&self) -> bool {
        self.status == CriterionStatus::Pass
    }

    /// One line for logs: `[PASS] 4 doubly_commuting_equality: ...`.
    pub fn line(&self) -> String {
        let tag = match self.status {
            CriterionStatus::Pass => "PASS",
            CriterionStatus::Fail => "FAIL",
            CriterionStatus::ConvergenceFailure => "NOCONV",
        };
        let metrics: Vec<String> = self.metrics.iter().map(|(k, v)| format!("{k}={v:.3e}")).collect();
        format!(
            "[{tag}] {:>2} {} ({} instances, {} failures) {}",
            self.id,
            self.name,
            self.instances,
            self.failures,
            metrics.join(" ")
        )
    }
}

/// Gaps of `dist² - maxvar` on polynomials in one random matrix. Reported,
/// never judged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExploratoryReport {
    pub label: String,
    pub instances: usize,
    pub max_gap: f64,
    pub max_gap_instance: usize,
    pub max_gap_n: usize,
    pub above_tol_eq: usize,
    pub convergence_failures: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub config: SuiteConfig,
    pub criteria: Vec<CriterionOutcome>,
    pub exploratory: Option<ExploratoryReport>,
    pub passed: bool,
    pub exit_code: i32,
}

impl SuiteSummary {
    pub fn to_json(&self) -> String {
        to_json_pretty(self)
    }
}

/// Runs the selected criteria and the exploratory search, writes the summary
/// and CSV samples when paths are configured. Exit codes: 0 all pass, 1 a
/// criterion failed, 2 a solver did not converge (takes precedence).
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteSummary> {
    config.validate()?;
    let ids: Vec<u32> = if config.only.is_empty() {
        (1..=CRITERIA).collect()
    } else {
        let mut v = config.only.clone();
        v.sort_unstable();
        v.dedup();
        v
    };
    let criteria = ids
        .iter()
        .map(|&id| run_criterion(id, config))
        .collect::<Result<Vec<_>>>()?;
    let exploratory = if config.only.is_empty() {
        Some(exploratory_search(config))
    } else {
        None
    };
    let exit_code = if criteria.iter().any(|c| c.status == CriterionStatus::ConvergenceFailure) {
        2
    } else if criteria.iter().any(|c| c.status == CriterionStatus::Fail) {
        1
    } else {
        0
    };
    let summary = SuiteSummary {
        config: config.clone(),
        criteria,
        exploratory,
        passed: exit_code == 0,
        exit_code,
    };
    if let Some(path) = &config.output {
        write_json_pretty(path, &summary)?;
    }
    Ok(summary)
}

/// Runs criterion `id` (1 to 12). Solver failures become statuses; only
/// configuration and file errors are returned as `Err`.
pub fn run_criterion(id: u32, config: &SuiteConfig) -> Result<CriterionOutcome> {
    let mut out = Outcome::default();
    let (name, res) = match id {
        1 => ("pauli_gallery", pauli(config, &mut out)),
        2 => ("d2_gallery", d2(config, &mut out)),
        3 => ("centered_example", centered_example(config, &mut out)),
        4 => ("doubly_commuting_equality", doubly(config, &mut out)),
        5 => ("inequality_soundness", inequality(config, &mut out)),
        6 => ("commuting_normal_radius", normal(config, &mut out)),
        7 => ("single_operator_equality", single(config, &mut out)),
        8 => ("tensor_product_range", product(config, &mut out)),
        9 => ("block_formula_range", block(config, &mut out)),
        10 => ("orthogonality_probe", probe(config, &mut out)),
        11 => ("toeplitz_sections", toeplitz(config, &mut out)),
        12 => ("gradient_checks", gradients(config, &mut out)),
        _ => return Err(OtkError::Config(format!("unknown criterion {id}"))),
    };
    let status = match res {
        Ok(()) if out.unconverged > 0 => CriterionStatus::ConvergenceFailure,
        Ok(()) if out.failures == 0 => CriterionStatus::Pass,
        Ok(()) => CriterionStatus::Fail,
        Err(e @ OtkError::ConvergenceFailure { .. }) => {
            out.notes.push(e.to_string());
            CriterionStatus::ConvergenceFailure
        }
        Err(e @ (OtkError::Io(_) | OtkError::Config(_))) => return Err(e),
        Err(e) => {
            out.failures += 1;
            out.notes.push(e.to_string());
            CriterionStatus::Fail
        }
    };
    Ok(CriterionOutcome {
        id,
        name: name.to_string(),
        status,
        instances: out.instances,
        failures: out.failures,
        metrics: out.metrics,
        notes: out.notes,
    })
}

#[derive(Default)]
struct Outcome {
    instances: usize,
    failures: usize,
    /// Solves that stopped without certifying their gap; these outrank failures.
    unconverged: usize,
    metrics: BTreeMap<String, f64>,
    notes: Vec<String>,
}

impl Outcome {
    /// Records `value` under `key` (keeping the worst) and fails when `ok` is false.
    fn check(&mut self, key: &str, value: f64, ok: bool, what: impl FnOnce() -> String) {
        let slot = self.metrics.entry(key.to_string()).or_insert(value);
        if value > *slot || value.is_nan() {
            *slot = value;
        }
        if !ok {
            self.failures += 1;
            if self.notes.len() < 10 {
                self.notes.push(what());
            }
        }
    }

    fn converged(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.unconverged += 1;
            if self.notes.len() < 10 {
                self.notes.push(format!("{}: distance solver did not certify its gap", what()));
            }
        }
    }

    fn record(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }
}

/// One seeded generator per criterion and instance.
fn instance_rng(config: &SuiteConfig, criterion: u32, i: usize) -> SeededRng {
    rng_for(config.seed, ((criterion as u64) << 32) | i as u64)
}

fn instance_seed(config: &SuiteConfig, criterion: u32, i: usize) -> u64 {
    instance_rng(config, criterion, i).random()
}

fn random_tuple(rng: &mut SeededRng, n: usize, d: usize) -> OperatorTuple {
    OperatorTuple::new((0..d).map(|_| gaussian_matrix(n, n, rng)).collect()).expect("square blocks of equal size")
}

fn write_csv(config: &SuiteConfig, name: &str, sample: &crate::geometry::RangeSample) -> Result<()> {
    if let Some(dir) = &config.csv_dir {
        std::fs::create_dir_all(dir)?;
        sample.write_csv(&dir.join(name))?;
    }
    Ok(())
}

fn gallery_check(
    config: &SuiteConfig,
    out: &mut Outcome,
    name: GalleryName,
    var_expected: f64,
    dist2_expected: f64,
    grid_step: f64,
) -> Result<f64> {
    let a = gallery(name);
    let tol = config.tolerances.gallery;
    let var = max_variance(&a, &config.solver)?.value;
    let dist = dist_to_scalars(&a, &config.solver)?;
    let (_, grid) = grid_refine_dist2(&a, 2.0, grid_step, 30)?;
    out.instances = 1;
    out.check("maxvar_error", (var - var_expected).abs(), (var - var_expected).abs() <= tol, || {
        format!("maxvar {var}")
    });
    out.check("dist2_error", (dist.dist2 - dist2_expected).abs(), (dist.dist2 - dist2_expected).abs() <= tol, || {
        format!("dist2 {}", dist.dist2)
    });
    out.check("dist2_vs_grid", (dist.dist2 - grid).abs(), (dist.dist2 - grid).abs() <= tol, || {
        format!("grid oracle {grid} vs dist2 {}", dist.dist2)
    });
    out.converged(dist.converged, || name.to_string());
    let gap = dist.dist2 - var;
    out.record("gap", gap);
    out.check("gap_negativity", -gap, gap > tol, || format!("gap {gap} is not positive"));
    write_csv(config, &format!("{}_w.csv", name.as_str()), &sample_w(&a, config.samples, config.seed, config.boundary_dirs)?)?;
    Ok(dist.dist2)
}

fn pauli(config: &SuiteConfig, out: &mut Outcome) -> Result<()> {
    gallery_check(config, out, GalleryName::Pauli, 2.0, 3.0, 1.0).map(|_| ())
}

fn d2(config: &SuiteConfig, out: &mut Outcome) -> Result<()> {
    let dist2 = gallery_check(config, out, GalleryName::D2, 4.0 / 3.0, 25.0 / 16.0, 0.25)?;
    out.check("dist2_below_three_halves", 1.5 - dist2, dist2 >= 1.5, || format!("dist2 {dist2} < 3/2"));
    Ok(())
}

fn centered_example(config: &SuiteConfig, out: &mut Outcome) -> Result<()> {
    let t = &config.tolerances;
    let a = gallery(GalleryName::Ex2);
    let dist = dist_to_scalars(&a, &config.solver)?;
    let var = max_variance(&a, &config.solver)?.value;
    out.instances = 1;
    let dist_err = (dist.dist2 - 1.0).abs();
    out.converged(dist.converged, || "ex2".into());
    out.check("dist2_error", dist_err, dist_err <= t.minimizer, || format!("dist2 {}", dist.dist2));
    let z_err = (dist.z0.0[0] - Complex64::new(1.0, 0.0)).norm().max(dist.z0.0[1].norm());
    out.check("minimizer_error", z_err, z_err <= t.minimizer, || format!("z0 {:?}", dist.z0.0));
    out.check("maxvar_error", (var - 1.0).abs(), (var - 1.0).abs() <= t.gallery, || format!("maxvar {var}"));

    let centered = shift(&a, &dist.z0)?;
    let mopts = MembershipOptions {
        tol_member: t.conv_witness,
        seed: config.seed,
        ..CENTERED_MEMBERSHIP
    };
    let conv = membership_zero_in_conv_v_with(&centered, &mopts)?;
    let res = conv.certificate.residual;
    out.check("conv_witness_residual", res, conv.is_member && res <= t.conv_witness, || {
        format!("conv membership {} residual {res:e}", conv.is_member)
    });

    // shape of V(A⁰), diagnostic only
    let sample = sample_v_with(&centered, config.samples, config.seed, config.boundary_dirs, CENTERED_MEMBERSHIP.rel_tol)?;
    let hull = hull_diagnostic(&sample, 64)?;
    out.record("v_centroid_gap", hull.centroid_gap);
    out.record("v_boundary_hull_excess", hull.boundary_hull_excess);
    out.notes.push(format!(
        "sampled V(A0): centroid gap {:.3e} (positive reads as non-convex-shaped)",
        hull.centroid_gap
    ));
    write_csv(config, "ex2_centered_v.csv", &sample)
}

/// Random block/tensor spec: `blocks` blocks, `d` components, factor sizes up to `pmax`.
fn random_spec(rng: &mut SeededRng, blocks: usize, d: usize, pmin: usize, pmax: usize, cap: usize) -> FactorSpec {
    loop {
        let spec = FactorSpec::new(
            (0..blocks)
                .map(|_| {
                    let dims: Vec<usize> = (0..d).map(|_| rng.random_range(pmin..=pmax)).collect();
                    let fills = dims.iter().map(|_| random_fill(rng)).collect();
                    BlockSpec { dims, fills }
                })
                .collect(),
        );
        if spec.total_dim() <= cap {
            return spec;
        }
    }
}

fn random_fill(rng: &mut SeededRng) -> FactorFill {
    match rng.random_range(0..4) {
        0 => FactorFill::Unitary,
        1 => FactorFill::DegenerateTop,
        _ => FactorFill::Gaussian,
    }
}

fn doubly(config: &SuiteConfig, out: &mut Outcome) -> Result<()> {
    let t = &config.tolerances;
    let dmax = config.dims.d_max.min(3);
    let runs = map_indexed(config.counts.doubly, |i| -> Result<_> {
        let mut rng = instance_rng(config, 4, i);
        let blocks = rng.random_range(1..=config.dims.blocks_max.min(3));
        let d = rng.random_range(1..=dmax);
        let mut spec = random_spec(&mut rng, blocks, d, 1, config.dims.factor_max, SUITE_DIM_CAP);
        if rng.random_bool(0.5) {
            spec = spec.with_conjugation(Conjugation::Random);
        }
        let (a, _) = gen_doubly(&spec, rng.random())?;
        let opts = SolverOptions { seed: i as u64, ..config.solver };
        check_equality_with(&a, ExpectedClass::DoublyCommuting, &opts, t.tol_eq)
    });
    for (i, r) in runs.into_iter().enumerate() {
        let r = r?;
        out.instances += 1;
        out.converged(r.dist_converged, || format!("instance {i}"));
        let g = r.normalized_gap.abs();
        out.check("gap", g, g <= t.tol_eq && r.class_verified, || format!("instance {i}: gap {:e}", r.normalized_gap));
        let w = r.v_membership.residual;
        out.check("v_witness_residual", w, r.v_membership.is_member && w <= t.v_witness, || {
            format!("instance {i}: V witness residual {w:e}")
        });
        let v = r.violations();
        out.check("invariant_violations", v.len() as f64, v.is_empty(), || format!("instance {i}: {v:?}"));
    }
    Ok(())
}

fn inequality(config: &SuiteConfig, out: &mut Outcome) -> Result<()> {
    let runs = map_indexed(config.counts.inequality, |i| -> Result<_> {
        let mut rng = instance_rng(config, 5, i);
        let n = rng.random_range(1..=config.dims.general_n_max);
        let d = rng.random_range(1..=config.dims.d_max);
        let a = random_tuple(&mut rng, n, d);
        let opts = SolverOptions { seed: i as u64, ..config.solver };
        let dist = dist_to_scalars(&a, &opts)?;
        let var = max_variance(&a, &opts)?;
        Ok((var.value - dist.dist2, dist.converged))
    });
    for (i, r) in runs.into_iter().enumerate() {
        let (excess, converged) = r?;
        out.instances += 1;
        out.converged(converged, || format!("instance {i}"));
        out.check("maxvar_minus_dist2", excess, excess <= config.tolerances.tol_ineq, || {
            format!("instance {i}: maxvar exceeds dist2 by {excess:e}")
        });
    }
    Ok(())
}

fn normal(config: &SuiteConfig, out: &mut Outcome) -> Result<()> {
    let runs = map_indexed(config.counts.normal, |i| -> Result<_> {
        let mut rng = instance_rng(config, 6, i);
        let n = rng.random_range(1..=config.dims.normal_n_max);
        let d = rng.random_range(1..=config.dims.d_max);
        let pts: Vec<Vec<Complex64>> = (0..n).map(|_| (0..d).map(|_| complex_gaussian(&mut rng)).collect()).collect();
        let mut a = gen_commuting_normal(&pts)?;
        if rng.random_bool(0.5) {
            a = a.conjugate_by(&random_unitary(n, &mut rng));
        }
        let ball = chebyshev_radius_normal(&a)?;
        let dist = dist_to_scalars(&a, &SolverOptions { seed: i as u64, ..config.solver })?;
        Ok(((dist.dist - ball.radius).abs(), dist.converged))
    });
    for (i, r) in runs.into_iter().enumerate() {
        let (e, converged) = r?;
        out.instances += 1;
        out.converged(converged, || format!("instance {i}"));
        out.check("dist_vs_radius", e, e <= config.tolerances.normal_radius, || {
            format!("instance {i}: |dist - radius| = {e:e}")
        });
    }
    Ok(())
}

fn single(config: &SuiteConfig, out: &mut Outcome) -> Result<()> {
    let t = &config.tolerances;
    let runs = map_indexed(config.counts.single, |i| -> Result<_> {
        let mut rng = instance_rng(config, 7, i);
        let n = rng.random_range(1..=config.dims.single_n_max);
        let a = random_tuple(&mut rng, n, 1);
        check_equality_with(&a, ExpectedClass::D1, &SolverOptions { seed: i as u64, ..config.solver }, t.tol_eq)
    });
    for (i, r) in runs.into_iter().enumerate() {
        let r = r?;
        out.instances += 1;
        out.converged(r.dist_converged, || format!("instance {i}"));
        let g = r.normalized_gap.abs();
        out.check("gap", g, g <= t.tol_eq, || format!("instance {i}: gap {:e}", r.normalized_gap));
        let v = r.violations();
        out.check("invariant_violations", v.len() as f64, v.is_empty(), || format!("instance {i}: {v:?}"));
    }
    Ok(())
}

fn product(config: &SuiteConfig, out: &mut Outcome) -> Result<()> {
    let runs = map_indexed(config.counts.product, |i| -> Result<_> {
        let mut rng = instance_rng(config, 8, i);
        let d = rng.random_range(2..=config.dims.d_max.clamp(2, 3));
        let spec = random_spec(&mut rng, 1, d, 2, config.dims.factor_max, SUITE_DIM_CAP);
        let (_, full) = gen_doubly(&spec, rng.random())?;
        let factors: Vec<ComplexMatrix> = full.blocks[0]
            .factors()
            .expect("materialized spec")
            .into_iter()
            .cloned()
            .collect();
        v_product_check(&factors, config.samples, config.boundary_dirs, instance_seed(config, 8, i))
    });
    for (i, r) in runs.into_iter().enumerate() {
        let r = r?;
        out.instances += 1;
        out.check("hausdorff", r.hausdorff, r.hausdorff <= config.tolerances.hausdorff, || {
            format!("instance {i}: forward {:e} backward {:e}", r.forward, r.backward)
        });
    }
    Ok(())
}

fn block(config: &SuiteConfig, out: &mut Outcome) -> Result<()> {
    let t = &config.tolerances;
    let runs = map_indexed(config.counts.block, |i| -> Result<_> {
        let mut rng = instance_rng(config, 9, i);
        let blocks = rng.random_range(2..=config.dims.blocks_max);
        let d = rng.random_range(1..=config.dims.d_max.min(3));
        let mut spec = random_spec(&mut rng, blocks, d, 1, config.dims.factor_max, SUITE_DIM_CAP / 2);
        // every other instance repeats a block, giving ties among the maximal blocks
        if i % 2 == 0 {
            let (_, full) = gen_doubly(&spec, rng.random())?;
            spec = full;
            let k = rng.random_range(0..spec.blocks.len());
            let copy = spec.blocks[k].clone();
            spec.blocks.push(copy);
        }
        let (_, full) = gen_doubly(&spec.with_conjugation(Conjugation::Random), rng.random())?;
        v_block_formula_check(&full, config.samples, config.boundary_dirs, instance_seed(config, 9, i))
    });
    for (i, r) in runs.into_iter().enumerate() {
        let r = r?;
        out.instances += 1;
        out.check("forward_to_maximal_hull", r.forward, r.forward <= t.block_hull, || {
            format!("instance {i}: V point {:e} away from the maximal-block hull", r.forward)
        });
        out.check("hausdorff", r.hausdorff, r.hausdorff <= t.hausdorff, || {
            format!("instance {i}: forward {:e} backward {:e}", r.forward, r.backward)
        });
    }
    Ok(())
}

/// Candidate tuples for the orthogonality probe, normalized to norm 1.
/// Kinds cycle: random, centered random, centered then pushed off by 1e-2,
/// centered doubly commuting, centered gallery under a random unitary.
fn probe_instance(config: &SuiteConfig, i: usize) -> Result<OperatorTuple> {
    let mut rng = instance_rng(config, 10, i);
    let opts = SolverOptions { seed: i as u64, ..config.solver };
    let n = rng.random_range(2..=config.dims.general_n_max.clamp(2, 6));
    let d = rng.random_range(1..=config.dims.d_max.min(3));
    let center = |a: &OperatorTuple| -> Result<OperatorTuple> { shift(a, &dist_to_scalars(a, &opts)?.z0) };
    let a = match i % 5 {
        0 => random_tuple(&mut rng, n, d),
        1 => center(&random_tuple(&mut rng, n, d))?,
        2 => {
            let c = center(&random_tuple(&mut rng, n, d))?;
            let c = c.scale(1.0 / tuple_norm(&c));
            let w = unit_vector(d, &mut rng);
            shift(&c, &Shift(w.iter().map(|x| x * 1e-2).collect()))?
        }
        3 => {
            let blocks = rng.random_range(1..=2);
            // a 1x1 tuple centers to zero
            let spec = loop {
                let s = random_spec(&mut rng, blocks, d, 1, 3, 27);
                if s.total_dim() >= 2 {
                    break s.with_conjugation(Conjugation::Random);
                }
            };
            center(&gen_doubly(&spec, rng.random())?.0)?
        }
        _ => {
            let name = GalleryName::ALL[rng.random_range(0..GalleryName::ALL.len())];
            let g = gallery(name);
            center(&g.conjugate_by(&random_unitary(g.n(), &mut rng)))?
        }
    };
    let s = tuple_norm(&a);
    Ok(a.scale(1.0 / s))
}

fn probe(config: &SuiteConfig, out: &mut Outcome) -> Result<()> {
    let tol = config.tolerances.probe;
    let runs = map_indexed(config.counts.probe, |i| -> Result<_> {
        let a = probe_instance(config, i)?;
        let mut rng = instance_rng(config, 10, 1 << 20 | i);
        let norm = tuple_norm(&a);
        let mut best = f64::INFINITY;
        for _ in 0..config.probe_shifts {
            let r = norm * 10f64.powf(rng.random_range(-4.0..0.0));
            let u = unit_vector(a.d(), &mut rng);
            let z = Shift(u.iter().map(|x| x * r).collect());
            best = best.min(tuple_norm(&shift(&a, &z)?));
        }
        let probe_orthogonal = best >= norm - tol;
        let conv = membership_zero_in_conv_v_with(&a, &MembershipOptions { seed: i as u64, ..CENTERED_MEMBERSHIP })?;
        Ok((probe_orthogonal, conv.is_member, norm - best, conv.distance))
    });
    let mut members = 0;
    for (i, r) in runs.into_iter().enumerate() {
        let (p, m, drop, dist) = r?;
        out.instances += 1;
        members += m as usize;
        out.check("disagreements", (p != m) as u8 as f64, p == m, || {
            format!("instance {i}: probe says {p} (best drop {drop:e}), membership says {m} (distance {dist:e})")
        });
    }
    out.record("members", members as f64);
    out.record("non_members", (out.instances - members) as f64);
    Ok(())
}

fn toeplitz(config: &SuiteConfig, out: &mut Outcome) -> Result<()> {
    let t = &config.tolerances;
    let one = Complex64::new(1.0, 0.0);
    let symbols = [ToeplitzSymbol::single(1, one), ToeplitzSymbol::single(-1, one)];
    let sweep = toeplitz_section_sweep(&symbols, &config.toeplitz_sections, &config.solver, t.tol_eq_sections)?;
    out.instances = sweep.sections.len();
    for s in &sweep.sections {
        out.record(&format!("gap_n{:02}", s.n), s.report.normalized_gap);
        if let Some(note) = section_note(s.n, s.report.normalized_gap, t.tol_eq_sections) {
            out.notes.push(note);
        }
        out.converged(s.report.dist_converged, || format!("n = {}", s.n));
        let v = s.report.violations();
        out.check("invariant_violations", v.len() as f64, v.is_empty(), || format!("n = {}: {v:?}", s.n));
    }
    let first = sweep.sections.first().expect("validated").report.normalized_gap;
    let last = sweep.sections.last().expect("validated").report.normalized_gap;
    out.check("last_minus_first_gap", last - first, last <= first + t.tol_ineq, || {
        format!("gap grew from {first:e} to {last:e}")
    });
    out.check("last_gap", last, last <= t.toeplitz_gap_max, || format!("gap {last:e} above {}", t.toeplitz_gap_max));
    out.notes.push(format!("monotone along the sweep: {}", sweep.monotone));
    Ok(())
}

/// Finite sections carry no equality guarantee; a gap above the tolerance is labeled, not failed.
fn section_note(n: usize, gap: f64, tol: f64) -> Option<String> {
    (gap > tol).then(|| format!("n = {n}: gap {gap:.3e} above tol_eq {tol:e}; approximation, not bug"))
}

/// `x^*Gx - Σ|x^*A_jx|²` without normalizing `x`.
fn raw_variance(g: &ComplexMatrix, a: &OperatorTuple, x: &[Complex64]) -> f64 {
    inner(x, &g.matvec(x)).re - a.matrices().iter().map(|m| inner(x, &m.matvec(x)).norm_sqr()).sum::<f64>()
}

fn relative_error(fd: f64, an: f64) -> f64 {
    (fd - an).abs() / an.abs().max(1.0)
}

fn gradients(config: &SuiteConfig, out: &mut Outcome) -> Result<()> {
    let t = &config.tolerances;
    let count = config.counts.gradient;
    let h = 1e-6;
    let runs = map_indexed(count, |i| -> Result<_> {
        let mut rng = instance_rng(config, 12, i);
        // distance objective, resampled until the top eigenvalue is simple enough
        let mut f_err = None;
        for _ in 0..100 {
            let n = rng.random_range(2..=6);
            let d = rng.random_range(1..=3);
            let a = random_tuple(&mut rng, n, d);
            let z: Vec<Complex64> = (0..d).map(|_| complex_gaussian(&mut rng)).collect();
            let obj = dist_objective(&a, &Shift(z.clone()))?;
            if obj.eigen_gap < t.eigen_gap_filter {
                continue;
            }
            let zr = Shift(z).to_real();
            let mut worst: f64 = 0.0;
            for k in 0..zr.len() {
                let mut p = zr.clone();
                let mut m = zr.clone();
                p[k] += h;
                m[k] -= h;
                let fd = (dist_objective(&a, &Shift::from_real(&p))?.value
                    - dist_objective(&a, &Shift::from_real(&m))?.value)
                    / (2.0 * h);
                worst = worst.max(relative_error(fd, obj.gradient[k]));
            }
            f_err = Some(worst);
            break;
        }

        let n = rng.random_range(2..=8);
        let d = rng.random_range(1..=3);
        let a = random_tuple(&mut rng, n, d);
        let g = gram(&a);
        let x = unit_vector(n, &mut rng);
        let grad = variance_gradient(&a, &x);
        let mut v_err: f64 = 0.0;
        for k in 0..n {
            for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                let mut p = x.clone();
                let mut m = x.clone();
                p[k] += dir * h;
                m[k] -= dir * h;
                let fd = (raw_variance(&g, &a, &p) - raw_variance(&g, &a, &m)) / (2.0 * h);
                v_err = v_err.max(relative_error(fd, (grad[k].conj() * dir).re));
            }
        }
        Ok((f_err, v_err))
    });
    let mut skipped = 0;
    for (i, r) in runs.into_iter().enumerate() {
        let (f_err, v_err) = r?;
        out.instances += 1;
        match f_err {
            Some(e) => out.check("objective_gradient", e, e <= t.gradient, || format!("point {i}: objective error {e:e}")),
            None => skipped += 1,
        }
        out.check("variance_gradient", v_err, v_err <= t.gradient, || format!("point {i}: variance error {v_err:e}"));
    }
    out.check("objective_points_skipped", skipped as f64, skipped == 0, || {
        format!("{skipped} objective points found no simple top eigenvalue")
    });
    Ok(())
}

/// Polynomials of degree up to 2 in one random matrix: commuting, usually not
/// doubly commuting.
fn exploratory_search(config: &SuiteConfig) -> ExploratoryReport {
    let runs = map_indexed(config.counts.exploratory, |i| {
        let mut rng = instance_rng(config, 100, i);
        let n = rng.random_range(2..=config.dims.exploratory_n_max.max(2));
        let d = rng.random_range(2..=config.dims.d_max.clamp(2, 3));
        let b = gaussian_matrix(n, n, &mut rng);
        let b2 = b.matmul(&b);
        let mats = (0..d)
            .map(|_| {
                let mut m = ComplexMatrix::identity(n).scale(complex_gaussian(&mut rng));
                m.axpy(complex_gaussian(&mut rng), &b);
                m.axpy(complex_gaussian(&mut rng), &b2);
                m
            })
            .collect();
        let a = OperatorTuple::new(mats).expect("equal sizes");
        let opts = SolverOptions { seed: i as u64, ..config.solver };
        (n, check_equality_with(&a, ExpectedClass::General, &opts, config.tolerances.tol_eq).map(|r| r.normalized_gap))
    });
    let mut rep = ExploratoryReport {
        label: "exploratory: commuting tuples, no pass/fail".into(),
        instances: runs.len(),
        max_gap: f64::NEG_INFINITY,
        max_gap_instance: 0,
        max_gap_n: 0,
        above_tol_eq: 0,
        convergence_failures: 0,
    };
    for (i, (n, r)) in runs.into_iter().enumerate() {
        match r {
            Ok(g) => {
                if g > rep.max_gap {
                    rep.max_gap = g;
                    rep.max_gap_instance = i;
                    rep.max_gap_n = n;
                }
                rep.above_tol_eq += (g > config.tolerances.tol_eq) as usize;
            }
            Err(_) => rep.convergence_failures += 1,
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SuiteConfig {
        SuiteConfig {
            counts: SuiteCounts {
                doubly: 3,
                inequality: 5,
                normal: 3,
                single: 3,
                product: 2,
                block: 2,
                probe: 5,
                gradient: 3,
                exploratory: 2,
            },
            samples: 256,
            boundary_dirs: 32,
            probe_shifts: 200,
            toeplitz_sections: vec![4, 8],
            only: vec![4, 5, 6, 7, 10, 12],
            ..SuiteConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(SuiteConfig::default().validate().is_ok());
        let mut c = SuiteConfig::default();
        c.counts.probe = 0;
        assert!(matches!(c.validate(), Err(OtkError::Config(_))));
        let mut c = SuiteConfig::default();
        c.dims.general_n_max = 65;
        assert!(c.validate().is_err());
        let mut c = SuiteConfig::default();
        c.toeplitz_sections = vec![8, 4];
        assert!(c.validate().is_err());
        let mut c = SuiteConfig::default();
        c.tolerances.tol_eq = -1.0;
        assert!(c.validate().is_err());
        assert!(SuiteConfig::from_json(r#"{"counts": {"doubly": 0}}"#).is_err());
        assert!(SuiteConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert_eq!(SuiteConfig::from_json("{}").unwrap(), SuiteConfig::default());
    }

    #[test]
    fn small_suite_passes_and_repeats() {
        let c = small();
        let a = run_suite(&c).unwrap();
        assert!(a.passed, "{}", a.to_json());
        assert_eq!(a.to_json(), run_suite(&c).unwrap().to_json());
    }

    #[test]
    fn tight_section_tolerance_is_flagged_not_failed() {
        let mut c = small();
        c.only = vec![11];
        c.tolerances.tol_eq_sections = 1e-12;
        let s = run_suite(&c).unwrap();
        assert!(s.criteria[0].passed(), "{:?}", s.criteria[0]);
        assert!(section_note(16, 3e-9, 1e-12).unwrap().contains("approximation, not bug"));
        assert!(section_note(16, 0.0, 1e-12).is_none());
    }
}
