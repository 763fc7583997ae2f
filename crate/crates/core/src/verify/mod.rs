//! Checks of `sup_x var_x(A) <= dist(A, C^d I)²` and of its equality cases,
//! plus the reproducible suite that runs them at scale.

mod suite;

pub use suite::{
    run_criterion, run_suite, CriterionOutcome, CriterionStatus, ExploratoryReport, SuiteConfig, SuiteCounts, SuiteDims,
    SuiteSummary, SuiteTolerances,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{OtkError, Result};
use crate::geometry::{
    membership_zero_in_conv_v_with, membership_zero_in_v_with, ConvMembership, MembershipOptions, VMembership,
};
use crate::solvers::{dist_to_scalars, max_variance, SolverOptions};
use crate::tuple::{gen_toeplitz, is_doubly_commuting, shift, tuple_norm, CommutationReport, OperatorTuple, Shift, ToeplitzSymbol};

/// Equality tolerance on the gap after scaling the tuple to norm 1.
pub const TOL_EQ: f64 = 1e-5;
/// Slack allowed in `maxvar <= dist²`, again at norm 1.
pub const TOL_INEQ: f64 = 1e-9;
/// Tolerance for the doubly commuting relations before a class is trusted.
pub const COMMUTE_TOL: f64 = 1e-9;
/// How far above the dual value `f` may sit at an alternative center, at norm 1.
pub const CENTER_SLACK: f64 = 1e-8;
/// Membership options for `A⁰ = A - z⁰I`. The minimizer is only known to about
/// `sqrt(eps)`, which splits the top cluster of `G(z⁰)` at that order, so both
/// the cluster and the residual tolerance sit above it.
pub const CENTERED_MEMBERSHIP: MembershipOptions = MembershipOptions {
    rel_tol: 1e-6,
    tol_member: 1e-6,
    max_iter: crate::geometry::CONV_MAX_ITER,
    restarts: crate::geometry::DEFAULT_RESTARTS,
    seed: 0,
};

/// Structural class declared by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedClass {
    DoublyCommuting,
    ToeplitzSection,
    CommutingNormal,
    /// Commuting matrices of size 2 or 3, whose joint numerical range is convex.
    CommutingSmallDim,
    D1,
    General,
}

impl ExpectedClass {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::DoublyCommuting => "doubly_commuting",
            Self::ToeplitzSection => "toeplitz_section",
            Self::CommutingNormal => "commuting_normal",
            Self::CommutingSmallDim => "commuting_small_dim",
            Self::D1 => "d1",
            Self::General => "general",
        }
    }
}

impl fmt::Display for ExpectedClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExpectedClass {
    type Err = OtkError;

    /// Accepts the snake_case names and the short CLI forms `doubly`, `toeplitz`, `normal`, `small`.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "doubly" | "doubly_commuting" => Self::DoublyCommuting,
            "toeplitz" | "toeplitz_section" => Self::ToeplitzSection,
            "normal" | "commuting_normal" => Self::CommutingNormal,
            "small" | "commuting_small_dim" => Self::CommutingSmallDim,
            "d1" => Self::D1,
            "general" => Self::General,
            other => return Err(OtkError::InvalidInput(format!("unknown class {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InequalityReport {
    pub holds: bool,
    pub dist2: f64,
    pub maxvar: f64,
    /// `dist2 - maxvar`, in the units of the input.
    pub gap: f64,
    /// The same gap divided by `‖A‖²`.
    pub normalized_gap: f64,
    pub tol: f64,
}

/// `maxvar` is a value attained at a unit vector and `dist2` is attained at a
/// shift, so a violation beyond rounding would be a bug, not a hard instance.
pub fn check_inequality(a: &OperatorTuple, opts: &SolverOptions) -> Result<InequalityReport> {
    let dist = dist_to_scalars(a, opts)?;
    let var = max_variance(a, opts)?;
    Ok(inequality_from(dist.dist2, var.value, tuple_norm(a).powi(2), TOL_INEQ))
}

fn inequality_from(dist2: f64, maxvar: f64, scale: f64, tol: f64) -> InequalityReport {
    let gap = dist2 - maxvar;
    let normalized_gap = if scale > 0.0 { gap / scale } else { 0.0 };
    InequalityReport {
        holds: normalized_gap >= -tol,
        dist2,
        maxvar,
        gap,
        normalized_gap,
        tol,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EqualityReport {
    pub dist2: f64,
    pub maxvar: f64,
    pub gap: f64,
    pub normalized_gap: f64,
    pub equal: bool,
    pub tol_eq: f64,
    pub class: ExpectedClass,
    /// Whether the structural assumptions behind `class` were confirmed numerically.
    pub class_verified: bool,
    /// The class is verified and equality is known to hold for it.
    pub equality_expected: bool,
    pub commutation: Option<CommutationReport>,
    pub z0: Shift,
    pub dist_converged: bool,
    /// `0 ∈ V(A⁰)` on the normalized centered tuple.
    pub v_membership: VMembership,
    /// `0 ∈ conv V(A⁰)` on the normalized centered tuple.
    pub conv_membership: ConvMembership,
}

impl EqualityReport {
    /// Internal consistency: gap soundness, equality on guaranteed classes, a
    /// witness behind every reported equality, and conv-membership at the minimizer.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.normalized_gap < -self.tol_eq {
            out.push(format!("negative gap {:e}", self.normalized_gap));
        }
        if self.equality_expected && !self.equal {
            out.push(format!("{} instance with gap {:e}", self.class, self.normalized_gap));
        }
        if self.equal && !self.v_membership.is_member {
            out.push(format!("equality without a V witness (residual {:e})", self.v_membership.residual));
        }
        if !self.conv_membership.is_member {
            out.push(format!("minimizer not certified, conv distance {:e}", self.conv_membership.distance));
        }
        out
    }
}

/// Confirms the structural hypotheses of `class` on `a`.
fn verify_class(a: &OperatorTuple, class: ExpectedClass) -> (bool, Option<CommutationReport>) {
    let commuting = |a: &OperatorTuple| {
        let m = a.matrices();
        let scale = 1.0 + tuple_norm(a).powi(2);
        (0..m.len()).all(|i| {
            (i + 1..m.len()).all(|j| (&m[i].matmul(&m[j]) - &m[j].matmul(&m[i])).frobenius_norm() <= COMMUTE_TOL * scale)
        })
    };
    match class {
        ExpectedClass::DoublyCommuting => {
            let r = is_doubly_commuting(a, COMMUTE_TOL);
            (r.doubly_commuting, Some(r))
        }
        ExpectedClass::CommutingNormal => {
            // commuting normal matrices are doubly commuting (Fuglede), and the
            // doubly commuting relations with i = j are exactly normality
            let r = is_doubly_commuting(a, COMMUTE_TOL);
            let scale = 1.0 + tuple_norm(a).powi(2);
            let normal = a
                .matrices()
                .iter()
                .all(|m| (&m.adjoint_mul(m) - &m.matmul(&m.adjoint())).frobenius_norm() <= COMMUTE_TOL * scale);
            (r.doubly_commuting && normal, Some(r))
        }
        ExpectedClass::CommutingSmallDim => (a.n() <= 3 && commuting(a), None),
        ExpectedClass::D1 => (a.d() == 1, None),
        ExpectedClass::ToeplitzSection | ExpectedClass::General => (true, None),
    }
}

/// Runs both solvers and attaches the membership certificates for `A⁰`.
pub fn check_equality(a: &OperatorTuple, class: ExpectedClass, opts: &SolverOptions) -> Result<EqualityReport> {
    check_equality_with(a, class, opts, TOL_EQ)
}

pub fn check_equality_with(
    a: &OperatorTuple,
    class: ExpectedClass,
    opts: &SolverOptions,
    tol_eq: f64,
) -> Result<EqualityReport> {
    let (class_verified, commutation) = verify_class(a, class);
    let equality_expected = class_verified
        && matches!(
            class,
            ExpectedClass::DoublyCommuting | ExpectedClass::CommutingNormal | ExpectedClass::CommutingSmallDim | ExpectedClass::D1
        );

    let scale = tuple_norm(a);
    let unit = if scale > 0.0 { a.scale(1.0 / scale) } else { a.clone() };
    let dist = dist_to_scalars(&unit, opts)?;
    let var = max_variance(&unit, opts)?;
    let mopts = MembershipOptions {
        seed: opts.seed,
        ..CENTERED_MEMBERSHIP
    };
    // The dual z is only accurate to about sqrt(gap). At equality the mean of
    // the variance maximizer estimates the same minimizer, often more sharply,
    // so it is tried as a center whenever its f is within CENTER_SLACK.
    let mut z0 = dist.z0.clone();
    let mut centered = shift(&unit, &z0)?;
    let mut v_membership = membership_zero_in_v_with(&centered, &mopts);
    let zv = Shift(unit.expectations(&var.argmax));
    let shifted_v = shift(&unit, &zv)?;
    if tuple_norm(&shifted_v).powi(2) <= dist.dist2 + CENTER_SLACK {
        let alt = membership_zero_in_v_with(&shifted_v, &mopts);
        if alt.residual < v_membership.residual {
            z0 = zv;
            centered = shifted_v;
            v_membership = alt;
        }
    }
    let conv_membership = membership_zero_in_conv_v_with(&centered, &mopts)?;

    let s2 = scale * scale;
    let normalized_gap = dist.dist2 - var.value;
    Ok(EqualityReport {
        dist2: dist.dist2 * s2,
        maxvar: var.value * s2,
        gap: normalized_gap * s2,
        normalized_gap,
        equal: normalized_gap <= tol_eq,
        tol_eq,
        class,
        class_verified,
        equality_expected,
        commutation,
        z0: Shift(z0.0.iter().map(|z| z * scale).collect()),
        dist_converged: dist.converged,
        v_membership,
        conv_membership,
    })
}

/// One row of a Toeplitz finite-section sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectionReport {
    pub n: usize,
    pub report: EqualityReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToeplitzSweep {
    pub sections: Vec<SectionReport>,
    /// Gaps never increase along the sweep.
    pub monotone: bool,
}

/// Equality reports for the `n x n` sections, `n_list` ascending.
pub fn toeplitz_section_sweep(
    symbols: &[ToeplitzSymbol],
    n_list: &[usize],
    opts: &SolverOptions,
    tol_eq: f64,
) -> Result<ToeplitzSweep> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(OtkError::InvalidInput("section sizes must be strictly ascending".into()));
    }
    let class = if symbols.len() == 1 {
        ExpectedClass::D1
    } else {
        ExpectedClass::ToeplitzSection
    };
    let sections = n_list
        .iter()
        .map(|&n| {
            let a = gen_toeplitz(symbols, n)?;
            Ok(SectionReport {
                n,
                report: check_equality_with(&a, class, opts, tol_eq)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = sections
        .windows(2)
        .all(|w| w[1].report.normalized_gap <= w[0].report.normalized_gap + 1e-9);
    Ok(ToeplitzSweep { sections, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, rng_for};
    use crate::tuple::{gallery, gen_doubly, FactorSpec, GalleryName};
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inequality_examples() {
        let o = SolverOptions::default();
        let p = check_inequality(&gallery(GalleryName::Pauli), &o).unwrap();
        assert!(p.holds && (p.gap - 1.0).abs() < 1e-6);
        let e = check_inequality(&gallery(GalleryName::Ex2), &o).unwrap();
        assert!(e.holds && e.gap.abs() < 1e-6);
        let mut rng = rng_for(5, 0);
        let a = OperatorTuple::new((0..3).map(|_| gaussian_matrix(8, 8, &mut rng)).collect()).unwrap();
        assert!(check_inequality(&a, &o).unwrap().holds);
    }

    #[test]
    fn equality_on_doubly_commuting() {
        let (a, _) = gen_doubly(&FactorSpec::gaussian(&[vec![2, 2], vec![2, 2]]), 7).unwrap();
        let r = check_equality(&a, ExpectedClass::DoublyCommuting, &SolverOptions::default()).unwrap();
        assert!(r.class_verified && r.equal, "{r:?}");
        assert!(r.v_membership.is_member && r.v_membership.residual <= 1e-6);
        assert!(r.violations().is_empty(), "{:?}", r.violations());
    }

    #[test]
    fn d2_gallery_is_strict() {
        let r = check_equality(&gallery(GalleryName::D2), ExpectedClass::General, &SolverOptions::default()).unwrap();
        assert!(!r.equal);
        assert!((r.gap - 11.0 / 48.0).abs() < 1e-6, "{}", r.gap);
        assert!(r.violations().is_empty());
    }

    #[test]
    fn pauli_conv_member_but_not_v_member() {
        let r = check_equality(&gallery(GalleryName::Pauli), ExpectedClass::General, &SolverOptions::default()).unwrap();
        assert!(!r.equal && r.conv_membership.is_member && !r.v_membership.is_member);
    }

    #[test]
    fn single_operator_is_equal() {
        let mut rng = rng_for(12, 0);
        for n in [1, 3, 9] {
            let a = OperatorTuple::new(vec![gaussian_matrix(n, n, &mut rng)]).unwrap();
            let r = check_equality(&a, ExpectedClass::D1, &SolverOptions::default()).unwrap();
            assert!(r.equal && r.violations().is_empty(), "{n}: {:?}", r.violations());
        }
    }

    #[test]
    fn false_class_is_not_trusted() {
        let r = check_equality(&gallery(GalleryName::Pauli), ExpectedClass::DoublyCommuting, &SolverOptions::default()).unwrap();
        assert!(!r.class_verified && !r.equality_expected);
    }

    #[test]
    fn toeplitz_sweeps() {
        let o = SolverOptions::default();
        let one = toeplitz_section_sweep(&[ToeplitzSymbol::single(1, c(1.0, 0.0))], &[2, 4, 8], &o, TOL_EQ).unwrap();
        assert!(one.sections.iter().all(|s| s.report.equal));
        let flat = [ToeplitzSymbol::single(0, c(2.0, 1.0)), ToeplitzSymbol::single(0, c(-1.0, 0.0))];
        let s = toeplitz_section_sweep(&flat, &[3, 5], &o, TOL_EQ).unwrap();
        assert!(s.sections.iter().all(|r| r.report.gap.abs() < 1e-9 && r.report.dist2 < 1e-12));
        assert!(toeplitz_section_sweep(&flat, &[5, 3], &o, TOL_EQ).is_err());
    }

    #[test]
    fn class_names_parse() {
        for name in ["doubly", "toeplitz", "normal", "d1", "general", "commuting_small_dim"] {
            assert!(name.parse::<ExpectedClass>().is_ok());
        }
        assert!("nope".parse::<ExpectedClass>().is_err());
    }
}
