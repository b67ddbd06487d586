//! Trainable entity/relation parameters, scoring functions and their
//! analytic gradients for TransE and RESCAL.

mod checkpoint;
mod gradient;

pub use checkpoint::{read_checkpoint, write_checkpoint, write_text_export, CheckpointError};
pub use gradient::GradientBuffer;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{EntityId, RelationId, Side, Triple};
use crate::scalar::{dot, l2_norm, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[serde(alias = "TransE")]
    TransE,
    #[serde(alias = "RESCAL")]
    Rescal,
}

/// Dissimilarity norm used by TransE. Ignored by RESCAL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    L1,
    L2,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("entity {0} has a zero embedding row; cosine similarity is undefined")]
    ZeroRow(u32),
}

/// Entity matrix (`|E| x d`, row-major) plus relation parameters: a `d`
/// vector per relation for TransE, a row-major `d x d` matrix for RESCAL.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore<F> {
    kind: ModelKind,
    norm: Norm,
    num_entities: usize,
    num_relations: usize,
    dim: usize,
    pub(crate) entities: Vec<F>,
    pub(crate) relations: Vec<F>,
    zero_rows_seen: usize,
}

impl<F: Scalar> EmbeddingStore<F> {
    /// Uniform `[-6/sqrt(d), 6/sqrt(d)]` draws; entity rows are then
    /// L2-normalized. Deterministic in `seed`.
    pub fn init(
        kind: ModelKind,
        norm: Norm,
        num_entities: usize,
        num_relations: usize,
        dim: usize,
        seed: u64,
    ) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 6.0 / (dim as f64).sqrt();
        let mut draw = |n: usize| -> Vec<F> {
            (0..n)
                .map(|_| F::lit(rng.random_range(-bound..bound)))
                .collect()
        };
        let entities = draw(num_entities * dim);
        let rel_len = match kind {
            ModelKind::TransE => dim,
            ModelKind::Rescal => dim * dim,
        };
        let relations = draw(num_relations * rel_len);
        let mut store = Self {
            kind,
            norm,
            num_entities,
            num_relations,
            dim,
            entities,
            relations,
            zero_rows_seen: 0,
        };
        store.normalize_entities();
        store
    }

    /// Builds a store from explicit parameter buffers.
    pub fn from_parts(
        kind: ModelKind,
        norm: Norm,
        dim: usize,
        entities: Vec<F>,
        relations: Vec<F>,
    ) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        assert_eq!(entities.len() % dim, 0, "entity buffer not a multiple of dim");
        let rel_len = match kind {
            ModelKind::TransE => dim,
            ModelKind::Rescal => dim * dim,
        };
        assert_eq!(relations.len() % rel_len, 0, "relation buffer has wrong shape");
        Self {
            kind,
            norm,
            num_entities: entities.len() / dim,
            num_relations: relations.len() / rel_len,
            dim,
            entities,
            relations,
            zero_rows_seen: 0,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    /// Length of one relation parameter block.
    pub fn relation_len(&self) -> usize {
        match self.kind {
            ModelKind::TransE => self.dim,
            ModelKind::Rescal => self.dim * self.dim,
        }
    }

    #[inline]
    pub fn entity(&self, e: EntityId) -> &[F] {
        let d = self.dim;
        &self.entities[e.index() * d..(e.index() + 1) * d]
    }

    #[inline]
    pub fn entity_mut(&mut self, e: EntityId) -> &mut [F] {
        let d = self.dim;
        &mut self.entities[e.index() * d..(e.index() + 1) * d]
    }

    #[inline]
    pub fn relation(&self, r: RelationId) -> &[F] {
        let n = self.relation_len();
        &self.relations[r.index() * n..(r.index() + 1) * n]
    }

    #[inline]
    pub fn relation_mut(&mut self, r: RelationId) -> &mut [F] {
        let n = self.relation_len();
        &mut self.relations[r.index() * n..(r.index() + 1) * n]
    }

    pub fn entity_matrix(&self) -> &[F] {
        &self.entities
    }

    pub fn relation_params(&self) -> &[F] {
        &self.relations
    }

    pub fn is_finite(&self) -> bool {
        self.entities
            .iter()
            .chain(&self.relations)
            .all(|x| x.is_finite())
    }

    /// Cumulative number of zero rows met by normalization passes.
    pub fn zero_rows_seen(&self) -> usize {
        self.zero_rows_seen
    }

    /// Rescales every entity row to unit L2 norm. Zero rows are left as they
    /// are; returns how many were found.
    pub fn normalize_entities(&mut self) -> usize {
        let rows: Vec<EntityId> = (0..self.num_entities as u32).map(EntityId).collect();
        self.normalize_rows(&rows)
    }

    /// Same as [`normalize_entities`](Self::normalize_entities) restricted to `rows`.
    pub fn normalize_rows(&mut self, rows: &[EntityId]) -> usize {
        let mut zeros = 0;
        for &e in rows {
            let row = self.entity_mut(e);
            let n = l2_norm(row);
            if n == F::zero() {
                zeros += 1;
                continue;
            }
            for x in row.iter_mut() {
                *x /= n;
            }
        }
        if zeros > 0 {
            log::warn!("normalization skipped {zeros} zero entity rows");
        }
        self.zero_rows_seen += zeros;
        zeros
    }

    /// Model score `f`; larger means more plausible.
    ///
    /// TransE: `-||e_h + w_r - e_t||` (L1 or L2). RESCAL: `e_h^T W_r e_t`.
    pub fn score(&self, t: &Triple) -> F {
        let h = self.entity(t.head);
        let tl = self.entity(t.tail);
        let r = self.relation(t.relation);
        match self.kind {
            ModelKind::TransE => {
                let diff = h.iter().zip(r).zip(tl).map(|((a, b), c)| *a + *b - *c);
                match self.norm {
                    Norm::L1 => -diff.map(F::abs).sum::<F>(),
                    Norm::L2 => -diff.map(|x| x * x).sum::<F>().sqrt(),
                }
            }
            ModelKind::Rescal => {
                let d = self.dim;
                let mut s = F::zero();
                for (i, hi) in h.iter().enumerate() {
                    s += *hi * dot(&r[i * d..(i + 1) * d], tl);
                }
                s
            }
        }
    }

    /// Scores of `triple` with `side` replaced by every entity, written into `out`.
    pub fn score_all(&self, t: &Triple, side: Side, out: &mut Vec<F>) {
        let d = self.dim;
        out.clear();
        out.reserve(self.num_entities);
        match self.kind {
            ModelKind::TransE => {
                let r = self.relation(t.relation);
                // Tail side: -||(h + r) - e||. Head side: -||e - (t - r)||.
                let anchor: Vec<F> = match side {
                    Side::Tail => self.entity(t.head).iter().zip(r).map(|(a, b)| *a + *b).collect(),
                    Side::Head => self.entity(t.tail).iter().zip(r).map(|(a, b)| *a - *b).collect(),
                };
                for row in self.entities.chunks_exact(d) {
                    let diff = anchor.iter().zip(row).map(|(a, e)| *a - *e);
                    let s = match self.norm {
                        Norm::L1 => diff.map(F::abs).sum::<F>(),
                        Norm::L2 => diff.map(|x| x * x).sum::<F>().sqrt(),
                    };
                    out.push(-s);
                }
            }
            ModelKind::Rescal => {
                let w = self.relation(t.relation);
                let probe: Vec<F> = match side {
                    // h^T W, contracted with each candidate tail.
                    Side::Tail => {
                        let h = self.entity(t.head);
                        (0..d)
                            .map(|j| (0..d).map(|i| h[i] * w[i * d + j]).sum())
                            .collect()
                    }
                    // W t, contracted with each candidate head.
                    Side::Head => {
                        let tl = self.entity(t.tail);
                        (0..d).map(|i| dot(&w[i * d..(i + 1) * d], tl)).collect()
                    }
                };
                for row in self.entities.chunks_exact(d) {
                    out.push(dot(&probe, row));
                }
            }
        }
    }

    /// Gradient of `max(0, margin + f(neg) - f(pos))` with respect to every
    /// parameter row involved. Empty when the hinge is inactive.
    pub fn grad_pair(&self, pos: &Triple, neg: &Triple, margin: F) -> GradientBuffer<F> {
        let mut buf = GradientBuffer::new(self.dim, self.relation_len());
        self.accumulate_pair(pos, neg, margin, &mut buf);
        buf
    }

    /// Adds the pair's hinge gradient into `buf` and returns the hinge value.
    pub fn accumulate_pair(
        &self,
        pos: &Triple,
        neg: &Triple,
        margin: F,
        buf: &mut GradientBuffer<F>,
    ) -> F {
        let loss = margin + self.score(neg) - self.score(pos);
        if loss <= F::zero() {
            return F::zero();
        }
        self.accumulate_score_grad(neg, F::one(), buf);
        self.accumulate_score_grad(pos, -F::one(), buf);
        loss
    }

    /// `buf += coeff * d f(t) / d params`.
    fn accumulate_score_grad(&self, t: &Triple, coeff: F, buf: &mut GradientBuffer<F>) {
        let d = self.dim;
        let h = self.entity(t.head);
        let tl = self.entity(t.tail);
        let r = self.relation(t.relation);
        match self.kind {
            ModelKind::TransE => {
                let diff: Vec<F> = h.iter().zip(r).zip(tl).map(|((a, b), c)| *a + *b - *c).collect();
                // df/d(diff): -sign(diff) for L1, -diff/||diff|| for L2.
                let g: Vec<F> = match self.norm {
                    Norm::L1 => diff.iter().map(|x| -sign(*x) * coeff).collect(),
                    Norm::L2 => {
                        let n = l2_norm(&diff);
                        if n == F::zero() {
                            return;
                        }
                        diff.iter().map(|x| -*x / n * coeff).collect()
                    }
                };
                add_into(buf.entity_row(t.head), &g, F::one());
                add_into(buf.relation_block(t.relation), &g, F::one());
                add_into(buf.entity_row(t.tail), &g, -F::one());
            }
            ModelKind::Rescal => {
                // df/dh = W t, df/dt = W^T h, df/dW = h t^T.
                let wt: Vec<F> = (0..d).map(|i| dot(&r[i * d..(i + 1) * d], tl)).collect();
                let wth: Vec<F> = (0..d)
                    .map(|j| (0..d).map(|i| h[i] * r[i * d + j]).sum())
                    .collect();
                add_into(buf.entity_row(t.head), &wt, coeff);
                add_into(buf.entity_row(t.tail), &wth, coeff);
                let wg = buf.relation_block(t.relation);
                for i in 0..d {
                    let hi = h[i] * coeff;
                    for j in 0..d {
                        wg[i * d + j] += hi * tl[j];
                    }
                }
            }
        }
    }

    /// Row-normalized copy of the entity matrix; zero rows stay zero and
    /// are flagged.
    pub fn unit_entities(&self) -> UnitRows<F> {
        let d = self.dim;
        let mut rows = self.entities.clone();
        let mut zero = vec![false; self.num_entities];
        for (i, row) in rows.chunks_exact_mut(d).enumerate() {
            let n = l2_norm(row);
            if n == F::zero() {
                zero[i] = true;
            } else {
                row.iter_mut().for_each(|x| *x /= n);
            }
        }
        UnitRows { dim: d, rows, zero }
    }

    /// Cosine similarity of entity `e` against every entity.
    pub fn cosine_row(&self, e: EntityId) -> Result<Vec<F>, ModelError> {
        self.unit_entities().cosine_row(e)
    }
}

/// Unit-normalized entity rows, shared read-only by samplers and diagnostics.
#[derive(Debug, Clone)]
pub struct UnitRows<F> {
    dim: usize,
    rows: Vec<F>,
    zero: Vec<bool>,
}

impl<F: Scalar> UnitRows<F> {
    pub fn len(&self) -> usize {
        self.zero.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zero.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, e: EntityId) -> &[F] {
        &self.rows[e.index() * self.dim..(e.index() + 1) * self.dim]
    }

    pub fn is_zero(&self, e: EntityId) -> bool {
        self.zero[e.index()]
    }

    /// Cosine between two entities, clamped to `[-1, 1]`; 0 if either row is zero.
    #[inline]
    pub fn cosine(&self, a: EntityId, b: EntityId) -> F {
        if a == b && !self.is_zero(a) {
            return F::one();
        }
        clamp_unit(dot(self.row(a), self.row(b)))
    }

    pub fn cosine_row(&self, e: EntityId) -> Result<Vec<F>, ModelError> {
        if self.is_zero(e) {
            return Err(ModelError::ZeroRow(e.0));
        }
        let q = self.row(e);
        let mut out: Vec<F> = self
            .rows
            .chunks_exact(self.dim)
            .map(|row| clamp_unit(dot(q, row)))
            .collect();
        out[e.index()] = F::one();
        Ok(out)
    }
}

#[inline]
fn clamp_unit<F: Scalar>(x: F) -> F {
    x.max(-F::one()).min(F::one())
}

#[inline]
fn sign<F: Scalar>(x: F) -> F {
    if x > F::zero() {
        F::one()
    } else if x < F::zero() {
        -F::one()
    } else {
        F::zero()
    }
}

#[inline]
fn add_into<F: Scalar>(dst: &mut [F], src: &[F], coeff: F) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s * coeff;
    }
}

#[cfg(test)]
mod tests;
