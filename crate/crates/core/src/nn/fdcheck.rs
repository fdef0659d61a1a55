//! Central finite-difference verification of analytic gradients.

use super::params::{GradSet, ParamSet};

/// Compare analytic gradients against central finite differences of a scalar
/// loss, returning the worst relative error over all parameter scalars.
pub fn finite_diff_check(
    loss_fn: impl Fn(&ParamSet) -> f64,
    params: &ParamSet,
    analytic: &GradSet,
    step: f64,
) -> f64 {
    assert!(params.shapes_match(analytic), "analytic grads must mirror params");
    let mut worst = 0.0f64;
    let mut p = params.clone();
    for i in 0..params.len() {
        let n = params.at(i).1.len();
        for k in 0..n {
            let orig = p.at(i).1.data()[k];
            p.at_mut(i).data_mut()[k] = orig + step;
            let up = loss_fn(&p);
            p.at_mut(i).data_mut()[k] = orig - step;
            let down = loss_fn(&p);
            p.at_mut(i).data_mut()[k] = orig;
            let fd = (up - down) / (2.0 * step);
            let an = analytic.at(i).1.data()[k];
            let denom = fd.abs().max(an.abs()).max(1e-6);
            worst = worst.max((fd - an).abs() / denom);
        }
    }
    worst
}
