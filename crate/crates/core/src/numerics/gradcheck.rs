use super::graph::{Graph, NodeId};
use super::params::{Grads, ParamStore};
use crate::error::{Error, Result};

/// Outcome of a central-difference gradient comparison.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// `max |analytic - numeric| / max(|analytic|, |numeric|, 1e-12)`.
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst element.
    pub worst: Option<(String, usize)>,
    /// Worst relative error per parameter.
    pub per_param: Vec<(String, f64)>,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Compares autodiff gradients of the scalar built by `f` against central
/// differences with step `h`, over every element of every trainable parameter.
///
/// Uses the fourth-order five-point stencil
/// `(8 (f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h`, whose truncation error
/// is small enough at `h ~ 1e-3` that roundoff stays far below the gradient
/// even for elements many orders of magnitude smaller than the objective.
///
/// `f` must be deterministic: it is re-run once per perturbation.
pub fn fd_check<F>(store: &ParamStore, h: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> Result<NodeId>,
{
    fd_check_sampled(store, h, None, f)
}

/// Like [`fd_check`], checking at most `max_per_param` evenly spaced elements
/// of each parameter.
pub fn fd_check_sampled<F>(store: &ParamStore, h: f64, max_per_param: Option<usize>, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> Result<NodeId>,
{
    let analytic = {
        let mut g = Graph::new(store);
        let out = f(&mut g)?;
        g.backward(out)?
    };
    let value = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new(s);
        let out = f(&mut g)?;
        Ok(g.value(out).item())
    };
    fd_check_with(store, &analytic, h, max_per_param, value)
}

/// Checks a supplied gradient against central differences of `value`.
pub fn fd_check_with<V>(
    store: &ParamStore,
    analytic: &Grads,
    h: f64,
    max_per_param: Option<usize>,
    value: V,
) -> Result<GradCheckReport>
where
    V: Fn(&ParamStore) -> Result<f64>,
{
    if h <= 0.0 {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let mut work = store.clone();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, per_param: Vec::new(), checked: 0 };
    for id in store.ids() {
        if store.is_frozen(id) {
            continue;
        }
        let n = store.value(id).len();
        let indices: Vec<usize> = match max_per_param {
            Some(m) if m < n => (0..m).map(|k| k * n / m).collect(),
            _ => (0..n).collect(),
        };
        let mut worst_here: f64 = 0.0;
        for i in indices {
            let x = store.value(id).data()[i];
            let mut at = |offset: f64| -> Result<f64> {
                work.value_mut(id).data_mut()[i] = x + offset;
                let v = value(&work)?;
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("objective at {}[{i}] is not finite", store.name(id))));
                }
                Ok(v)
            };
            let (p1, m1, p2, m2) = (at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?);
            work.value_mut(id).data_mut()[i] = x;
            let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
            let err = rel_error(analytic.by_id(id).data()[i], numeric);
            report.checked += 1;
            worst_here = worst_here.max(err);
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                if err >= report.max_rel_error {
                    report.worst = Some((store.name(id).to_string(), i));
                }
            }
        }
        report.per_param.push((store.name(id).to_string(), worst_here));
    }
    Ok(report)
}
