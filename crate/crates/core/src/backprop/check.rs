//! Central-difference verification of [`super::backward`].

use crate::error::{Error, Result};
use crate::forward::{eval_ordered, Inputs};
use crate::graph::{self, CapsuleGraph, ParamKey};

use crate::forward::ValueMap;

use super::{backward, LossKind, LossSpec};

pub const DEFAULT_EPSILON: f64 = 1e-5;

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Outcome of a gradient check.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    /// Largest relative error over all parameter entries.
    pub max_rel_error: f64,
    /// Parameter and flat index where it occurred.
    pub worst: Option<(ParamKey, usize)>,
    /// Number of parameter entries compared.
    pub checked: usize,
}

/// Compares every analytic weight and bias gradient entry against
/// `(L(θ+ε) − L(θ−ε)) / 2ε`.
pub fn grad_check(g: &CapsuleGraph, inputs: &Inputs, loss: &LossSpec, epsilon: f64) -> Result<GradCheck> {
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1e-3], got {epsilon}")));
    }
    let report = graph::validate(g);
    if !report.is_ok() {
        return Err(Error::InvalidGraph(report));
    }
    let order = graph::topo_order(g)?;
    let values = eval_ordered(g, &order, inputs)?;
    let (_, grads) = backward(g, &values, loss)?;

    let mut probe = g.clone();
    let mut values_at = |key: &ParamKey, i: usize, value: f64, t: f64| -> Result<ValueMap> {
        probe.param_mut(key).expect("key from param_keys").set_flat(i, value);
        let v = eval_ordered(&probe, &order, inputs);
        probe.param_mut(key).expect("key from param_keys").set_flat(i, t);
        v
    };
    let mut out = GradCheck {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    for key in g.param_keys() {
        let theta = g.param(&key).expect("key from param_keys");
        let analytic = grads.get(&key).expect("gradient for every parameter");
        for (i, &t) in theta.data().iter().enumerate() {
            let plus = values_at(&key, i, t + epsilon, t)?;
            let minus = values_at(&key, i, t - epsilon, t)?;
            let numeric = loss_difference(&plus, &minus, loss)? / (2.0 * epsilon);
            let err = relative_error(analytic.data()[i], numeric);
            if !err.is_finite() {
                return Err(Error::NonFiniteValue(key.to_string()));
            }
            if err > out.max_rel_error || out.worst.is_none() {
                out.max_rel_error = err.max(out.max_rel_error);
                out.worst = Some((key.clone(), i));
            }
            out.checked += 1;
        }
    }
    Ok(out)
}

/// `L(plus) − L(minus)`, expanded per entry so the two nearly equal losses
/// are never subtracted: `½(a−b)(a+b−2t)` for squared error and
/// `−t·((u⁺−u⁻) − (lse⁺−lse⁻))` for cross-entropy.
fn loss_difference(plus: &ValueMap, minus: &ValueMap, loss: &LossSpec) -> Result<f64> {
    let mut total = 0.0;
    for (id, t) in &loss.targets {
        let missing = || Error::MissingTarget(id.to_string());
        match loss.kind {
            LossKind::Mse => {
                let a = plus.output(id).ok_or_else(missing)?;
                let b = minus.output(id).ok_or_else(missing)?;
                for ((&a, &b), &t) in a.data().iter().zip(b.data()).zip(t.data()) {
                    total += 0.5 * (a - b) * ((a - t) + (b - t));
                }
            }
            LossKind::SoftmaxCrossEntropy => {
                let a = plus.pre_activation(id).ok_or_else(missing)?;
                let b = minus.pre_activation(id).ok_or_else(missing)?;
                let (la, lb) = (log_sum_exp(a.data()), log_sum_exp(b.data()));
                for ((&a, &b), &t) in a.data().iter().zip(b.data()).zip(t.data()) {
                    total -= t * ((a - b) - (la - lb));
                }
            }
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFiniteValue("loss".into()));
    }
    Ok(total)
}

fn log_sum_exp(u: &[f64]) -> f64 {
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + u.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
