//! Numeric verification of the analytic gradients by fourth-order central
//! finite differences. This harness is the safety net under every training
//! run: if it passes, the backward pass computes the true derivative.
//!
//! The five-point stencil with a comparatively large step keeps both error
//! sources small at once: truncation falls as h^4 while f64 cancellation
//! noise falls as 1/h, so even parameters whose gradients have shrunk to
//! ~1e-6 through a deep stack are measured to several significant digits.

use super::{backward, loss, LstmGradients, LstmModel};
use crate::dataset::SequenceSample;

const FD_STEP: f64 = 1e-3;

/// Maximum over all parameters of the relative disagreement between the
/// analytic gradient and a central finite difference:
/// |analytic - numeric| / max(|analytic| + |numeric|, 1e-8).
pub fn grad_check(model: &LstmModel, sample: &SequenceSample) -> f64 {
    let (_, cache) = model.forward(&sample.inputs).expect("sample shaped for model");
    let grads = backward(model, &cache, &sample.target).expect("target shaped for model");
    max_rel_error_against_numeric(model, sample, &grads)
}

/// Compares a supplied gradient set against finite differences. Split out of
/// [`grad_check`] so tests can feed deliberately corrupted gradients and
/// confirm the harness notices.
pub(crate) fn max_rel_error_against_numeric(
    model: &LstmModel,
    sample: &SequenceSample,
    grads: &LstmGradients,
) -> f64 {
    let analytic = grads.flatten();
    let mut work = model.clone();
    let n = analytic.len();
    let mut max_rel: f64 = 0.0;
    for k in 0..n {
        let h = FD_STEP;
        let p2 = loss_with_perturbed_param(&mut work, k, 2.0 * h, sample);
        let p1 = loss_with_perturbed_param(&mut work, k, h, sample);
        let m1 = loss_with_perturbed_param(&mut work, k, -h, sample);
        let m2 = loss_with_perturbed_param(&mut work, k, -2.0 * h, sample);
        let numeric = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
        let a = analytic[k];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
    }
    max_rel
}

/// Evaluates the loss with parameter `k` shifted by `delta`, restoring the
/// parameter afterwards.
fn loss_with_perturbed_param(model: &mut LstmModel, k: usize, delta: f64, sample: &SequenceSample) -> f64 {
    set_param_offset(model, k, delta);
    let (pred, _) = model.forward(&sample.inputs).expect("sample shaped for model");
    let value = loss(&pred, &sample.target);
    set_param_offset(model, k, -delta);
    value
}

fn set_param_offset(model: &mut LstmModel, k: usize, delta: f64) {
    let mut idx = 0;
    model.for_each_param_mut(&mut |p| {
        if idx == k {
            *p += delta;
        }
        idx += 1;
    });
}
