use alloc::vec::Vec;

use super::DrnnError;
use crate::bits::BitVector;

/// Accumulated squared error over a set of patterns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    /// Σ_q ‖D_q − Z_q‖² over all patterns.
    pub sum: f64,
    /// `sum` divided by the number of scored output values.
    pub mse: f64,
}

/// Squared error of predictions against 0/1 targets.
pub fn loss(predictions: &[Vec<f64>], targets: &[BitVector]) -> Result<LossValue, DrnnError> {
    if predictions.len() != targets.len() {
        return Err(DrnnError::ShapeMismatch("prediction and target counts differ".into()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (z, d) in predictions.iter().zip(targets) {
        if z.len() != d.len() {
            return Err(DrnnError::ShapeMismatch("prediction and target widths differ".into()));
        }
        for (q, &zq) in z.iter().enumerate() {
            let dq = if d.get(q) { 1.0 } else { 0.0 };
            sum += (dq - zq) * (dq - zq);
        }
        count += z.len();
    }
    let mse = if count == 0 { 0.0 } else { sum / count as f64 };
    Ok(LossValue { sum, mse })
}

/// Squared error of one pattern; writes `∂E/∂z = 2(z − d)` into `dz`.
/// Outputs with a `false` mask entry contribute neither error nor gradient.
pub fn output_error(z: &[f64], target: &[f64], mask: Option<&[bool]>, dz: &mut [f64]) -> f64 {
    let mut e = 0.0;
    for q in 0..z.len() {
        if mask.is_some_and(|m| !m[q]) {
            dz[q] = 0.0;
            continue;
        }
        let diff = z[q] - target[q];
        e += diff * diff;
        dz[q] = 2.0 * diff;
    }
    e
}
