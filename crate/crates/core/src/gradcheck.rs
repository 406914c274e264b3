//! Gradient verification against central finite differences.
//!
//! Runs in the f64 instantiation only: analytic gradients come from one
//! backward pass, numeric ones from (f(x+h) - f(x-h)) / 2h with
//! h = 1e-4 * max(1, |x|) per entry. The reported relative error is
//! |a - n| / max(|a|, |n|, 1e-4), which degrades to a scaled absolute error
//! for near-zero gradients.

use crate::error::Result;
use crate::params::{ParamId, ParamStore};
use crate::tensor::{Tape, Tensor};

pub const DEFAULT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst: Option<GradCheckEntry>,
    pub failures: Vec<GradCheckEntry>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-4)
}

/// Evaluate `build` to a scalar loss value on a fresh tape.
fn eval_loss<F>(store: &mut ParamStore<f64>, build: &mut F) -> Result<f64>
where
    F: for<'t> FnMut(&'t Tape<f64>, &mut ParamStore<f64>) -> Result<Tensor<'t, f64>>,
{
    let tape = Tape::new();
    let loss = build(&tape, store)?;
    Ok(loss.item())
}

/// Full gradient check: analytic pass plus two finite-difference evaluations
/// per sampled weight entry.
pub fn gradcheck_loss<F>(
    store: &mut ParamStore<f64>,
    stride: usize,
    tolerance: f64,
    mut build: F,
) -> Result<GradCheckReport>
where
    F: for<'t> FnMut(&'t Tape<f64>, &mut ParamStore<f64>) -> Result<Tensor<'t, f64>>,
{
    let stride = stride.max(1);

    // Analytic gradients.
    store.zero_grads();
    {
        let tape = Tape::new();
        let loss = build(&tape, store)?;
        let grads = tape.backward(loss)?;
        store.accumulate_grads(&tape, &grads);
    }
    let analytic: Vec<(ParamId, Vec<f64>)> = store
        .iter()
        .filter(|(_, e)| e.is_weight())
        .map(|(id, e)| (id, e.grad.clone()))
        .collect();

    let mut report = GradCheckReport {
        checked: 0,
        max_rel_err: 0.0,
        worst: None,
        failures: Vec::new(),
        tolerance,
    };

    for (pid, grad) in analytic {
        let name = store.entry(pid).name.clone();
        let n = grad.len();
        let mut idx = (pid.0 * 7) % stride; // fixed phase, varies across params
        while idx < n {
            let x0 = store.entry(pid).data[idx];
            let h = 1e-4 * x0.abs().max(1.0);

            store.entry_mut(pid).data[idx] = x0 + h;
            let f_plus = eval_loss(store, &mut build)?;
            store.entry_mut(pid).data[idx] = x0 - h;
            let f_minus = eval_loss(store, &mut build)?;
            store.entry_mut(pid).data[idx] = x0;

            let numeric = (f_plus - f_minus) / (2.0 * h);
            let a = grad[idx];
            let e = rel_err(a, numeric);
            report.checked += 1;
            if e > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = report.max_rel_err.max(e);
                report.worst = Some(GradCheckEntry {
                    param: name.clone(),
                    index: idx,
                    analytic: a,
                    numeric,
                    rel_err: e,
                });
            }
            if e > tolerance || !a.is_finite() || !numeric.is_finite() {
                report.failures.push(GradCheckEntry {
                    param: name.clone(),
                    index: idx,
                    analytic: a,
                    numeric,
                    rel_err: e,
                });
            }
            idx += stride;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{EntryKind, Init, ParamStore};
    use crate::rng;

    #[test]
    fn quadratic_gradient_matches() {
        // f(x) = sum(x^2), df/dx = 2x; at x = 3 the gradient is 6.
        let mut store = ParamStore::<f64>::new();
        let mut r = rng::seeded(0, rng::Stream::Init);
        let pid = store.register("x", &[1], Init::Const(3.0), EntryKind::Weight, &mut r).unwrap();
        let report = gradcheck_loss(&mut store, 1, 1e-6, |tape, store| {
            let x = tape.param(store, pid);
            Ok(x.mul(&x)?.sum_all())
        })
        .unwrap();
        assert!(report.passed(), "worst: {:?}", report.worst);
        assert!((store.entry(pid).grad[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_sum_gradient_is_zero() {
        // sum(softmax(x)) is constant 1, so the gradient vanishes.
        let mut store = ParamStore::<f64>::new();
        let mut r = rng::seeded(1, rng::Stream::Init);
        let pid = store
            .register("x", &[5], Init::Uniform { lo: -2.0, hi: 2.0 }, EntryKind::Weight, &mut r)
            .unwrap();
        let report = gradcheck_loss(&mut store, 1, 1e-6, |tape, store| {
            let x = tape.param(store, pid);
            Ok(x.softmax(0)?.sum_all())
        })
        .unwrap();
        assert!(report.passed(), "worst: {:?}", report.worst);
        for &g in &store.entry(pid).grad {
            assert!(g.abs() < 1e-10);
        }
    }
}
