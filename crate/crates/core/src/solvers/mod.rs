//! The optimization engines: distance to the scalar tuples `C^d I`, maximal
//! variance over the unit sphere, and the Chebyshev radius of a commuting
//! normal tuple.

mod chebyshev;
mod distance;
mod oracle;
mod variance;

pub use chebyshev::{chebyshev_radius_normal, ChebyshevResult};
pub use distance::{dist_objective, dist_to_scalars, dist_to_scalars_from, DistanceResult, Objective};
pub use oracle::{grid_refine_dist2, GRID_MAX_D};
pub use variance::{max_variance, orthopair_sup, variance_gradient, VarianceResult};

use serde::{Deserialize, Serialize};

/// Iteration caps, tolerances, restarts and seed; stored next to every result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Relative duality gap at which the distance solver stops.
    pub tol_gap: f64,
    /// Relative gap still reported as converged when progress stalls.
    pub tol_accept: f64,
    pub max_iter: usize,
    /// Restarts for the variance ascent.
    pub restarts: usize,
    pub seed: u64,
    /// Iteration cap per variance restart.
    pub ascent_iter: usize,
    /// Riemannian gradient norm at which a variance restart stops.
    pub tol_grad: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_gap: 1e-16,
            tol_accept: 1e-9,
            max_iter: 50_000,
            restarts: 64,
            seed: 0,
            ascent_iter: 5_000,
            tol_grad: 1e-10,
        }
    }
}
