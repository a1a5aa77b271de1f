use serde::Serialize;

use super::params::Params;
use crate::error::{check_len, Error, Result};

/// Relative errors are measured against `max(|analytic|, |numeric|, FLOOR)`,
/// so near-zero gradients are judged by absolute error.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, Serialize)]
pub struct BlockReport {
    pub name: String,
    pub max_relative_error: f64,
    pub worst_index: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_relative_error).fold(0.0, f64::max)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Compares `analytic` against central differences of `loss` around `params`.
pub fn finite_difference_check<P, F>(loss: F, params: &P, analytic: &P, step: f64, tolerance: f64) -> Result<GradCheckReport>
where
    P: Params + Clone,
    F: Fn(&P) -> f64,
{
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {step}")));
    }
    let names = params.block_names();
    let analytic_blocks = analytic.blocks();
    check_len("finite_difference_check blocks", params.blocks().len(), analytic_blocks.len())?;

    let mut probe = params.clone();
    let mut blocks = Vec::with_capacity(names.len());
    for (b, name) in names.into_iter().enumerate() {
        let len = params.blocks()[b].len();
        check_len("finite_difference_check block", len, analytic_blocks[b].len())?;
        let mut worst = (0.0, 0);
        for j in 0..len {
            let original = params.blocks()[b][j];
            probe.blocks_mut()[b][j] = original + step;
            let up = loss(&probe);
            probe.blocks_mut()[b][j] = original - step;
            let down = loss(&probe);
            probe.blocks_mut()[b][j] = original;
            let numeric = (up - down) / (2.0 * step);
            let err = relative_error(analytic_blocks[b][j], numeric);
            // NaN must fail the check rather than be ignored by the comparison.
            if err > worst.0 || err.is_nan() {
                worst = (if err.is_nan() { f64::INFINITY } else { err }, j);
            }
        }
        blocks.push(BlockReport {
            name,
            max_relative_error: worst.0,
            worst_index: worst.1,
        });
    }
    let passed = blocks.iter().all(|b| b.max_relative_error <= tolerance);
    Ok(GradCheckReport {
        blocks,
        tolerance,
        passed,
    })
}
