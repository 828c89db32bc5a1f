//! Adam with bias correction.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Real;
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamParams {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamParams {
            learning_rate,
            ..Default::default()
        }
    }
}

/// First/second moment estimates plus the step counter, aligned with the
/// parameter order of the model they were created for.
#[derive(Debug, Clone)]
pub struct AdamState<F> {
    pub step: u64,
    pub m: Vec<Array2<F>>,
    pub v: Vec<Array2<F>>,
}

impl<F: Real> AdamState<F> {
    pub fn new(params: &ModelParams<F>) -> Self {
        let zeros: Vec<Array2<F>> = params
            .entries()
            .iter()
            .map(|p| Array2::zeros(p.value.dim()))
            .collect();
        AdamState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One optimizer step. Gradients must align with the parameter order; a
/// non-finite gradient aborts with the offending tensor's name. Tensors
/// with an all-zero gradient and zero moments are left bit-identical.
pub fn adam_step<F: Real>(
    params: &mut ModelParams<F>,
    grads: &[Array2<F>],
    state: &mut AdamState<F>,
    hp: &AdamParams,
) -> Result<()> {
    if grads.len() != params.entries().len() {
        return Err(Error::MismatchedLengths {
            what: "gradients vs parameters",
            expected: params.entries().len(),
            got: grads.len(),
        });
    }
    for (p, g) in params.entries().iter().zip(grads) {
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient(p.name.clone()));
        }
    }

    state.step += 1;
    let t = state.step;
    let beta1 = F::from_f64(hp.beta1);
    let beta2 = F::from_f64(hp.beta2);
    let one = F::one();
    let eps = F::from_f64(hp.eps);
    let lr = F::from_f64(hp.learning_rate);
    let bc1 = F::from_f64(1.0 - hp.beta1.powi(t as i32));
    let bc2 = F::from_f64(1.0 - hp.beta2.powi(t as i32));

    for ((entry, grad), (m, v)) in params
        .entries_mut()
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        Zip::from(&mut entry.value)
            .and(grad)
            .and(m)
            .and(v)
            .for_each(|w, &g, m, v| {
                *m = beta1 * *m + (one - beta1) * g;
                *v = beta2 * *v + (one - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
            });
    }
    Ok(())
}
