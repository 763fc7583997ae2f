//! Brute-force reference for `min_z ‖A - zI‖²`: a box grid in `R^{2d}`
//! followed by shrinking-box refinement around the best node. Exponential in
//! `d`, meant for small gallery tuples only.

use crate::error::{OtkError, Result};
use crate::tuple::{shift, tuple_norm, OperatorTuple, Shift};

/// Largest `d` accepted: `per^{2d}` evaluations per level.
pub const GRID_MAX_D: usize = 3;

/// Grid with spacing `step` over `[-half, half]^{2d}`, then `levels` rounds of
/// a grid with half-width equal to the previous step and half its spacing.
/// Returns the best node and its value.
pub fn grid_refine_dist2(a: &OperatorTuple, half: f64, step: f64, levels: usize) -> Result<(Shift, f64)> {
    if a.d() > GRID_MAX_D || step.is_nan() || step <= 0.0 || half.is_nan() || half < 0.0 {
        return Err(OtkError::InvalidInput(format!(
            "grid oracle needs d <= {GRID_MAX_D} and a positive step"
        )));
    }
    let f = |z: &[f64]| -> Result<f64> { Ok(tuple_norm(&shift(a, &Shift::from_real(z))?).powi(2)) };
    let k = 2 * a.d();
    let mut center = vec![0.0; k];
    let (mut half, mut step) = (half, step);
    let mut best = (center.clone(), f(&center)?);
    for _ in 0..=levels {
        let per = (2.0 * half / step).round() as usize + 1;
        for idx in 0..per.pow(k as u32) {
            let mut rest = idx;
            let z: Vec<f64> = (0..k)
                .map(|t| {
                    let i = rest % per;
                    rest /= per;
                    center[t] - half + i as f64 * step
                })
                .collect();
            let v = f(&z)?;
            if v < best.1 {
                best = (z, v);
            }
        }
        center = best.0.clone();
        half = step;
        step /= 2.0;
    }
    Ok((Shift::from_real(&best.0), best.1))
}
