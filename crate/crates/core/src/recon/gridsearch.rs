//! Grid search over `(lambda, w_t)` pairs for the proximal-gradient solver.

use rayon::prelude::*;

use super::proxgrad::prox_gradient_solve;
use crate::error::{invalid_config, Result};
use crate::metrics::{loss_eval, LossWeights};
use crate::sampling::SamplingMask;
use crate::volume::{ImageStack, KSpaceVolume};

/// One validation sequence: undersampled k-space, its mask and the
/// fully sampled reference image.
#[derive(Clone, Debug)]
pub struct ValidationCase {
    pub y_u: KSpaceVolume,
    pub mask: SamplingMask,
    pub reference: ImageStack,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridRow {
    pub lambda: f64,
    pub w_t: f64,
    /// Mean loss over the validation cases.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSearchResult {
    pub best_index: usize,
    pub table: Vec<GridRow>,
}

impl GridSearchResult {
    pub fn best(&self) -> GridRow {
        self.table[self.best_index]
    }
}

/// Scores every candidate by its mean loss; ties go to the earliest
/// candidate.
pub fn grid_search_weights(
    candidates: &[(f64, f64)],
    cases: &[ValidationCase],
    n_outer: usize,
    weights: &LossWeights,
) -> Result<GridSearchResult> {
    if candidates.is_empty() {
        return Err(invalid_config("grid search needs at least one candidate"));
    }
    if cases.is_empty() {
        return Err(invalid_config("grid search needs at least one validation case"));
    }
    weights.validate()?;
    let table = candidates
        .par_iter()
        .map(|&(lambda, w_t)| {
            let mut total = 0.0;
            for case in cases {
                let r = prox_gradient_solve(&case.y_u, &case.mask, lambda, w_t, n_outer)?;
                total += loss_eval(&r.image, &case.reference, weights)?;
            }
            Ok(GridRow { lambda, w_t, score: total / cases.len() as f64 })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best_index = 0;
    for (i, row) in table.iter().enumerate() {
        if row.score < table[best_index].score {
            best_index = i;
        }
    }
    Ok(GridSearchResult { best_index, table })
}
