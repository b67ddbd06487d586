use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::model::{EmbeddingStore, GradientBuffer};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper<F> {
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
}

impl<F: Scalar> Default for AdamHyper<F> {
    fn default() -> Self {
        Self {
            beta1: F::lit(0.9),
            beta2: F::lit(0.999),
            eps: F::lit(1e-8),
        }
    }
}

/// First and second moment accumulators of one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<F> {
    pub m: Vec<F>,
    pub v: Vec<F>,
}

impl<F: Scalar> Moments<F> {
    pub fn zeros(len: usize) -> Self {
        Self {
            m: vec![F::zero(); len],
            v: vec![F::zero(); len],
        }
    }
}

/// One bias-corrected Adam step at timestep `step` (1-based) on `params`.
/// `m` and `v` are the matching slices of the moment accumulators.
pub fn adam_update<F: Scalar>(
    hyper: &AdamHyper<F>,
    step: u64,
    params: &mut [F],
    m: &mut [F],
    v: &mut [F],
    grads: &[F],
    lr: F,
) {
    assert!(step >= 1, "Adam timestep is 1-based");
    assert!(params.len() == grads.len() && m.len() == grads.len() && v.len() == grads.len());
    let t = i32::try_from(step).unwrap_or(i32::MAX);
    let c1 = F::one() - hyper.beta1.powi(t);
    let c2 = F::one() - hyper.beta2.powi(t);
    for i in 0..grads.len() {
        let g = grads[i];
        m[i] = hyper.beta1 * m[i] + (F::one() - hyper.beta1) * g;
        v[i] = hyper.beta2 * v[i] + (F::one() - hyper.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + hyper.eps);
    }
}

/// Optimizer state for the entity matrix and relation parameters, sharing
/// one timestep. Updates are applied lazily: only rows present in a
/// gradient buffer move, and the timestep advances once per applied batch.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub hyper: AdamHyper<F>,
    step: u64,
    entities: Moments<F>,
    relations: Moments<F>,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(hyper: AdamHyper<F>, emb: &EmbeddingStore<F>) -> Self {
        Self {
            hyper,
            step: 0,
            entities: Moments::zeros(emb.entity_matrix().len()),
            relations: Moments::zeros(emb.relation_params().len()),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Applies `grads` to `emb`. Returns `Ok(false)` without touching
    /// anything when the buffer is empty.
    pub fn apply(
        &mut self,
        emb: &mut EmbeddingStore<F>,
        grads: &GradientBuffer<F>,
        lr: F,
    ) -> Result<bool, TrainError> {
        if grads.is_empty() {
            return Ok(false);
        }
        if !grads.all_finite() {
            return Err(TrainError::NonFinite("gradient".into()));
        }
        self.step += 1;
        let d = emb.dim();
        for (e, g) in grads.entities() {
            let r = e.index() * d..(e.index() + 1) * d;
            adam_update(
                &self.hyper,
                self.step,
                &mut emb.entities[r.clone()],
                &mut self.entities.m[r.clone()],
                &mut self.entities.v[r],
                g,
                lr,
            );
        }
        let n = emb.relation_len();
        for (rel, g) in grads.relations() {
            let r = rel.index() * n..(rel.index() + 1) * n;
            adam_update(
                &self.hyper,
                self.step,
                &mut emb.relations[r.clone()],
                &mut self.relations.m[r.clone()],
                &mut self.relations.v[r],
                g,
                lr,
            );
        }
        Ok(true)
    }
}
