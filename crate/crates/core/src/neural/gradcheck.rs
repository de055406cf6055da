use rand::Rng;

use super::tensor::Tensor;
use crate::error::Result;
use crate::util::seeded_rng;

/// Central-difference step.
pub const STEP: f64 = 1e-6;

/// Gradients smaller than this are compared absolutely rather than
/// relatively, since the central difference itself carries roundoff near
/// `1e-10`.
const RELATIVE_FLOOR: f64 = 1e-6;

/// One-sided slopes that disagree by more than this fraction mark a kink
/// (a relu or max switching inside the step); such probes are redrawn.
const KINK_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub probes: usize,
    pub kinks_skipped: usize,
}

/// Compares the analytic gradient returned by `loss_fn` against central
/// differences at `probes` coordinates drawn uniformly over all parameters.
pub fn gradient_check<F>(params: &[Tensor], mut loss_fn: F, probes: usize, seed: u64) -> Result<GradientCheck>
where
    F: FnMut(&[Tensor]) -> Result<(f64, Vec<Tensor>)>,
{
    let (f0, analytic) = loss_fn(params)?;
    let total: usize = params.iter().map(Tensor::len).sum();
    let mut rng = seeded_rng(seed, 3);
    let mut work = params.to_vec();
    let mut result = GradientCheck {
        max_relative_error: 0.0,
        probes: 0,
        kinks_skipped: 0,
    };
    let max_attempts = probes.saturating_mul(20).max(1);
    let mut attempts = 0;

    while result.probes < probes && attempts < max_attempts && total > 0 {
        attempts += 1;
        let mut flat = rng.gen_range(0..total);
        let mut p = 0;
        while flat >= work[p].len() {
            flat -= work[p].len();
            p += 1;
        }
        let original = work[p].data()[flat];
        // Divide by the steps actually represented, not the nominal one.
        let (up, down) = (original + STEP, original - STEP);
        work[p].data_mut()[flat] = up;
        let (f_plus, _) = loss_fn(&work)?;
        work[p].data_mut()[flat] = down;
        let (f_minus, _) = loss_fn(&work)?;
        work[p].data_mut()[flat] = original;

        let forward = (f_plus - f0) / (up - original);
        let backward = (f0 - f_minus) / (original - down);
        let scale = forward.abs().max(backward.abs()).max(RELATIVE_FLOOR);
        if (forward - backward).abs() > KINK_TOLERANCE * scale {
            result.kinks_skipped += 1;
            continue;
        }

        let numeric = (f_plus - f_minus) / (up - down);
        let exact = analytic[p].data()[flat];
        let err = (exact - numeric).abs() / exact.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
        result.max_relative_error = result.max_relative_error.max(err);
        result.probes += 1;
    }
    Ok(result)
}
