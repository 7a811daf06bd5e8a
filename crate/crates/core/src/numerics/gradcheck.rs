//! Central finite-difference check of tape gradients.

use super::params::BoundParams;
use super::{ParamStore, Tape, TensorError, Var};

/// Outcome of [`check_gradients`].
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst element.
    pub worst: Option<(String, usize)>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

/// Relative error with a floor so that gradients near zero are compared
/// on an absolute scale.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-5);
    (analytic - numeric).abs() / scale
}

/// Compares reverse-mode gradients of `loss_fn` with central differences of
/// step `h`. At most `max_per_param` evenly spaced elements of each parameter
/// are perturbed.
pub fn check_gradients<F>(
    store: &ParamStore,
    h: f64,
    max_per_param: usize,
    mut loss_fn: F,
) -> Result<GradCheckReport, TensorError>
where
    F: FnMut(&ParamStore) -> Result<(Tape, Var, BoundParams), TensorError>,
{
    let (tape, loss, bound) = loss_fn(store)?;
    let grads = tape.backward(loss)?;
    let mut analytic = store.clone();
    analytic.zero_grad();
    analytic.accumulate(&bound, &grads)?;

    let mut probe = store.clone();
    let mut report = GradCheckReport { checked: 0, max_rel_error: 0.0, worst: None };
    for id in store.ids() {
        let n = store.get(id).value.len();
        let stride = (n / max_per_param.max(1)).max(1);
        for i in (0..n).step_by(stride) {
            let orig = store.get(id).value.data()[i];
            probe.get_mut(id).value.data_mut()[i] = orig + h;
            let (t, l, _) = loss_fn(&probe)?;
            let up = t.value(l).item();
            probe.get_mut(id).value.data_mut()[i] = orig - h;
            let (t, l, _) = loss_fn(&probe)?;
            let down = t.value(l).item();
            probe.get_mut(id).value.data_mut()[i] = orig;

            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(analytic.get(id).grad.data()[i], numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                if err >= report.max_rel_error {
                    report.worst = Some((store.get(id).name.clone(), i));
                }
            }
        }
    }
    Ok(report)
}
