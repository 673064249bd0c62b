//! Central finite-difference check of [`Model::loss_and_gradient`].

use super::model::{Batch, Masks, Model};
use crate::Result;

/// Denominator floor for relative errors, so gradients that are zero up to
/// finite-difference noise do not count as mismatches.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    /// Tensor name and element of the worst entry.
    pub worst: Option<(String, usize)>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares every analytic gradient entry to `(L(p + h) - L(p - h)) / 2h`
/// under the same fixed dropout masks.
pub fn check_gradients(
    model: &Model,
    batch: &Batch,
    masks: Option<&Masks>,
    step: f64,
) -> Result<GradCheckReport> {
    let (_, analytic) = model.loss_and_gradient(batch, masks)?;
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        checked: 0,
        max_relative_error: 0.0,
        worst: None,
    };
    for (i, &a) in analytic.iter().enumerate() {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + step;
        let up = probe.loss(batch, masks)?;
        probe.params_mut()[i] = orig - step;
        let down = probe.loss(batch, masks)?;
        probe.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let err = relative_error(a, numeric);
        report.checked += 1;
        if err > report.max_relative_error || report.worst.is_none() {
            report.max_relative_error = report.max_relative_error.max(err);
            let (spec, pos) = model.layout().locate(i).expect("index inside layout");
            report.worst = Some((spec.name.clone(), pos));
        }
    }
    Ok(report)
}
