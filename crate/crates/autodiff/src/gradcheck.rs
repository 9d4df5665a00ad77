//! Central finite-difference verification of tape gradients.

use crate::error::{AutodiffError, Result};
use crate::params::{Graph, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Worst disagreement found by [`grad_check_report`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter index, element index)` of the worst element, if any.
    pub worst: Option<(usize, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub evaluations: usize,
}

fn evaluate<F>(f: &F, params: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let value = tape.value(out);
    if !value.is_scalar() {
        return Err(AutodiffError::NonScalarLoss(value.shape().to_vec()));
    }
    Ok(value.item())
}

/// Relative error as `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares backward-pass gradients of `f` with central differences.
pub fn grad_check_report<F>(f: F, params: &[Tensor], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(eps > 0.0) {
        return Err(AutodiffError::InvalidArgument {
            op: "grad_check",
            reason: format!("eps must be positive, got {eps}"),
        });
    }
    let first = evaluate(&f, params)?;
    let second = evaluate(&f, params)?;
    if first.to_bits() != second.to_bits() {
        return Err(AutodiffError::NonDeterministic { first, second });
    }

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let analytic: Vec<Tensor> = if tape.requires_grad(out) {
        let grads = tape.backward(out)?;
        vars.iter().zip(params).map(|(&v, p)| grads.get_or_zeros(v, p.shape())).collect()
    } else {
        params.iter().map(|p| Tensor::zeros(p.shape())).collect()
    };

    compare(&analytic, params.to_vec(), eps, 2, |work| evaluate(&f, work))
}

fn compare(
    analytic: &[Tensor],
    mut work: Vec<Tensor>,
    eps: f64,
    evaluations: usize,
    mut eval: impl FnMut(&[Tensor]) -> Result<f64>,
) -> Result<GradCheckReport> {
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        evaluations,
    };
    for (pi, grad) in analytic.iter().enumerate() {
        for ei in 0..work[pi].len() {
            let orig = work[pi].data()[ei];
            work[pi].data_mut()[ei] = orig + eps;
            let plus = eval(&work)?;
            work[pi].data_mut()[ei] = orig - eps;
            let minus = eval(&work)?;
            work[pi].data_mut()[ei] = orig;
            report.evaluations += 2;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = grad.data()[ei];
            let err = relative_error(a, numeric);
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((pi, ei));
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

/// [`grad_check_report`] over every parameter of a store. `f` builds a scalar
/// loss on a graph that binds parameters from the store it is given.
pub fn grad_check_store<F, E>(store: &ParamStore, f: F, eps: f64) -> std::result::Result<GradCheckReport, E>
where
    F: Fn(&mut Graph) -> std::result::Result<Var, E>,
    E: From<AutodiffError>,
{
    if !(eps > 0.0) {
        return Err(AutodiffError::InvalidArgument {
            op: "grad_check",
            reason: format!("eps must be positive, got {eps}"),
        }
        .into());
    }
    let scalar = |g: &Graph, out: Var| -> Result<f64> {
        let value = g.value(out);
        if !value.is_scalar() {
            return Err(AutodiffError::NonScalarLoss(value.shape().to_vec()));
        }
        Ok(value.item())
    };
    let mut g = Graph::training(store);
    let out = f(&mut g)?;
    let first = scalar(&g, out)?;
    let analytic = g.backward(out)?;
    let mut probe = store.clone();
    let mut failure = None;
    let report = compare(&analytic, store.tensors().to_vec(), eps, 1, |work| {
        probe.tensors_mut().clone_from_slice(work);
        let mut g = Graph::inference(&probe);
        match f(&mut g) {
            Ok(out) => scalar(&g, out),
            Err(e) => {
                failure = Some(e);
                Err(AutodiffError::InvalidArgument { op: "grad_check", reason: "objective failed".into() })
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let report = report?;
    let mut g = Graph::inference(store);
    let out = f(&mut g)?;
    let second = scalar(&g, out)?;
    if first.to_bits() != second.to_bits() {
        return Err(AutodiffError::NonDeterministic { first, second }.into());
    }
    Ok(report)
}

/// Maximum elementwise relative error between analytic and numeric gradients.
pub fn grad_check<F>(f: F, params: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    grad_check_report(f, params, eps).map(|r| r.max_rel_error)
}
