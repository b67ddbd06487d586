use std::collections::HashSet;

use super::{KgError, RelationId, TripleStore};

/// Per-relation mapping statistics for Bernoulli side selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationStats {
    /// Mean number of tails per distinct head.
    pub tph: f64,
    /// Mean number of heads per distinct tail.
    pub hpt: f64,
    /// Probability of corrupting the head: `tph / (tph + hpt)`.
    pub p_head: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BernoulliStats {
    per_relation: Vec<Option<RelationStats>>,
}

impl BernoulliStats {
    /// Relations that never occur in `store` get no entry.
    pub fn from_store(store: &TripleStore, num_relations: usize) -> Self {
        let mut pairs = vec![0usize; num_relations];
        let mut heads: Vec<HashSet<u32>> = vec![HashSet::new(); num_relations];
        let mut tails: Vec<HashSet<u32>> = vec![HashSet::new(); num_relations];
        // The store is deduplicated, so each triple is one distinct (h, t) pair.
        for t in store.triples() {
            let r = t.relation.index();
            pairs[r] += 1;
            heads[r].insert(t.head.0);
            tails[r].insert(t.tail.0);
        }
        let per_relation = (0..num_relations)
            .map(|r| {
                (pairs[r] > 0).then(|| {
                    let tph = pairs[r] as f64 / heads[r].len() as f64;
                    let hpt = pairs[r] as f64 / tails[r].len() as f64;
                    RelationStats {
                        tph,
                        hpt,
                        p_head: tph / (tph + hpt),
                    }
                })
            })
            .collect();
        Self { per_relation }
    }

    /// Stats with explicit head probabilities, mostly for tests.
    pub fn from_p_head(p_head: &[f64]) -> Self {
        Self {
            per_relation: p_head
                .iter()
                .map(|&p| {
                    Some(RelationStats {
                        tph: p,
                        hpt: 1.0 - p,
                        p_head: p,
                    })
                })
                .collect(),
        }
    }

    pub fn get(&self, r: RelationId) -> Result<RelationStats, KgError> {
        self.per_relation
            .get(r.index())
            .copied()
            .flatten()
            .ok_or(KgError::UnknownRelation(r.0))
    }

    pub fn p_head(&self, r: RelationId) -> Result<f64, KgError> {
        self.get(r).map(|s| s.p_head)
    }

    pub fn num_relations(&self) -> usize {
        self.per_relation.len()
    }
}
