use std::collections::BTreeMap;

use crate::kg::{EntityId, RelationId};
use crate::scalar::Scalar;

/// Sparse per-row gradient accumulator for one batch. Rows that no pair
/// touched are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer<F> {
    dim: usize,
    relation_len: usize,
    entities: BTreeMap<u32, Vec<F>>,
    relations: BTreeMap<u32, Vec<F>>,
}

impl<F: Scalar> GradientBuffer<F> {
    pub fn new(dim: usize, relation_len: usize) -> Self {
        Self {
            dim,
            relation_len,
            entities: BTreeMap::new(),
            relations: BTreeMap::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.relations.is_empty()
    }

    pub fn clear(&mut self) {
        self.entities.clear();
        self.relations.clear();
    }

    pub fn entity_row(&mut self, e: EntityId) -> &mut [F] {
        let d = self.dim;
        self.entities.entry(e.0).or_insert_with(|| vec![F::zero(); d])
    }

    pub fn relation_block(&mut self, r: RelationId) -> &mut [F] {
        let n = self.relation_len;
        self.relations.entry(r.0).or_insert_with(|| vec![F::zero(); n])
    }

    pub fn entity(&self, e: EntityId) -> Option<&[F]> {
        self.entities.get(&e.0).map(Vec::as_slice)
    }

    pub fn relation(&self, r: RelationId) -> Option<&[F]> {
        self.relations.get(&r.0).map(Vec::as_slice)
    }

    /// Touched entity rows in ascending id order.
    pub fn entities(&self) -> impl Iterator<Item = (EntityId, &[F])> {
        self.entities.iter().map(|(k, v)| (EntityId(*k), v.as_slice()))
    }

    pub fn relations(&self) -> impl Iterator<Item = (RelationId, &[F])> {
        self.relations.iter().map(|(k, v)| (RelationId(*k), v.as_slice()))
    }

    /// Adds every row of `other` into `self`.
    pub fn merge(&mut self, other: &GradientBuffer<F>) {
        for (e, g) in other.entities() {
            self.entity_row(e).iter_mut().zip(g).for_each(|(a, b)| *a += *b);
        }
        for (r, g) in other.relations() {
            self.relation_block(r).iter_mut().zip(g).for_each(|(a, b)| *a += *b);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.entities
            .values()
            .chain(self.relations.values())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}
