//! Random-hyperplane LSH over unit entity vectors with query-directed
//! multi-probing and exact cosine re-ranking of the collected candidates.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SamplerError;
use crate::kg::EntityId;
use crate::model::{EmbeddingStore, UnitRows};
use crate::rng::stream;
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LshParams {
    /// Number of independent hash tables (T).
    pub tables: usize,
    /// Hyperplanes, i.e. signature bits, per table (H).
    pub hyperplanes: usize,
    /// Buckets visited per table per query, home bucket included.
    pub probes: usize,
    pub seed: u64,
}

impl Default for LshParams {
    fn default() -> Self {
        Self {
            tables: 16,
            hyperplanes: 12,
            probes: 96,
            seed: 0,
        }
    }
}

impl LshParams {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.tables < 1 {
            return Err(SamplerError::Config("LSH needs at least one table".into()));
        }
        if self.hyperplanes > 63 {
            return Err(SamplerError::Config("at most 63 hyperplanes per table".into()));
        }
        if self.probes < 1 {
            return Err(SamplerError::Config("LSH needs at least one probe per table".into()));
        }
        Ok(())
    }
}

pub struct SimilarityIndex<F> {
    params: LshParams,
    dim: usize,
    /// `tables * hyperplanes` normal vectors of length `dim`.
    planes: Vec<F>,
    buckets: Vec<HashMap<u64, Vec<u32>>>,
    units: UnitRows<F>,
}

impl<F: Scalar> SimilarityIndex<F> {
    pub fn build(emb: &EmbeddingStore<F>, params: LshParams) -> Result<Self, SamplerError> {
        Self::from_units(emb.unit_entities(), params)
    }

    pub fn from_units(units: UnitRows<F>, params: LshParams) -> Result<Self, SamplerError> {
        params.validate()?;
        let dim = units.dim();
        let mut rng = stream(params.seed, &[0x15A]);
        let planes: Vec<F> = (0..params.tables * params.hyperplanes * dim)
            .map(|_| F::lit(StandardNormal.sample(&mut rng)))
            .collect();
        let mut index = Self {
            params,
            dim,
            planes,
            buckets: vec![HashMap::new(); params.tables],
            units,
        };
        for e in 0..index.units.len() as u32 {
            for table in 0..params.tables {
                let (code, _) = index.signature(table, index.units.row(EntityId(e)));
                index.buckets[table].entry(code).or_default().push(e);
            }
        }
        Ok(index)
    }

    pub fn params(&self) -> &LshParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Bucket code of `v` in `table` plus the raw projections.
    fn signature(&self, table: usize, v: &[F]) -> (u64, Vec<f64>) {
        let h = self.params.hyperplanes;
        let mut code = 0u64;
        let mut proj = Vec::with_capacity(h);
        for b in 0..h {
            let off = (table * h + b) * self.dim;
            let p = dot(&self.planes[off..off + self.dim], v).to_f64_lossy();
            if p > 0.0 {
                code |= 1 << b;
            }
            proj.push(p);
        }
        (code, proj)
    }

    /// Up to `k` distinct entities, most similar to `e` first. `e` itself is
    /// included when it lands in a probed bucket.
    pub fn query(&self, e: EntityId, k: usize) -> Vec<EntityId> {
        self.query_vector(self.units.row(e), k)
    }

    pub fn query_vector(&self, v: &[F], k: usize) -> Vec<EntityId> {
        self.query_with_candidates(v, k).0
    }

    /// Query result plus the number of distinct candidates that were re-ranked.
    pub fn query_with_candidates(&self, v: &[F], k: usize) -> (Vec<EntityId>, usize) {
        if k == 0 {
            return (Vec::new(), 0);
        }
        let mut cands: Vec<u32> = Vec::new();
        for table in 0..self.params.tables {
            let (code, proj) = self.signature(table, v);
            for probe in probe_sequence(code, &proj, self.params.probes) {
                if let Some(bucket) = self.buckets[table].get(&probe) {
                    cands.extend_from_slice(bucket);
                }
            }
        }
        cands.sort_unstable();
        cands.dedup();
        let n = cands.len();
        let mut scored: Vec<(F, u32)> = cands
            .into_iter()
            .map(|c| (dot(v, self.units.row(EntityId(c))), c))
            .collect();
        let by_score = |a: &(F, u32), b: &(F, u32)| {
            b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
        };
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, by_score);
            scored.truncate(k);
        }
        scored.sort_by(by_score);
        (scored.into_iter().map(|(_, c)| EntityId(c)).collect(), n)
    }

    /// Exact top-`k` by cosine over all indexed entities.
    pub fn exact_top_k(&self, v: &[F], k: usize) -> Vec<EntityId> {
        let mut scored: Vec<(F, u32)> = (0..self.units.len() as u32)
            .map(|c| (dot(v, self.units.row(EntityId(c))), c))
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
        scored.truncate(k);
        scored.into_iter().map(|(_, c)| EntityId(c)).collect()
    }

    /// Mean recall@k of the index against an exact scan over `probes`
    /// randomly chosen indexed entities, and the mean candidate count.
    pub fn measure_recall(&self, k: usize, probes: usize, seed: u64) -> RecallReport {
        let n = self.units.len();
        if n == 0 || k == 0 {
            return RecallReport::default();
        }
        let mut rng = stream(seed, &[0xEC]);
        let picks = sample(&mut rng, n, probes.min(n));
        let (mut recall, mut cand) = (0.0, 0.0);
        for p in picks.iter() {
            let v = self.units.row(EntityId(p as u32));
            let exact = self.exact_top_k(v, k);
            let (approx, c) = self.query_with_candidates(v, k);
            let hits = exact.iter().filter(|e| approx.contains(e)).count();
            recall += hits as f64 / exact.len() as f64;
            cand += c as f64;
        }
        let m = picks.len() as f64;
        RecallReport {
            recall: recall / m,
            mean_candidates: cand / m,
            probes: picks.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RecallReport {
    pub recall: f64,
    pub mean_candidates: f64,
    pub probes: usize,
}

/// Bucket codes to visit, in order of increasing perturbation cost: the
/// home bucket first, then codes obtained by flipping bit sets whose
/// projections sit closest to their hyperplanes (sum of squared margins).
fn probe_sequence(code: u64, proj: &[f64], probes: usize) -> Vec<u64> {
    let h = proj.len();
    let mut out = vec![code];
    if h == 0 || probes <= 1 {
        return out;
    }
    let mut order: Vec<usize> = (0..h).collect();
    order.sort_by(|&a, &b| proj[a].abs().total_cmp(&proj[b].abs()).then(a.cmp(&b)));
    let cost: Vec<f64> = order.iter().map(|&b| proj[b] * proj[b]).collect();

    #[derive(PartialEq)]
    struct Cand(f64, Vec<usize>);
    impl Eq for Cand {}
    impl PartialOrd for Cand {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Cand {
        // min-heap on cost
        fn cmp(&self, other: &Self) -> Ordering {
            other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
        }
    }

    let mut heap = BinaryHeap::new();
    heap.push(Cand(cost[0], vec![0]));
    while out.len() < probes {
        let Some(Cand(score, set)) = heap.pop() else {
            break;
        };
        let mask = set.iter().fold(0u64, |m, &i| m | (1 << order[i]));
        out.push(code ^ mask);
        let last = *set.last().unwrap();
        if last + 1 < h {
            let mut shifted = set.clone();
            *shifted.last_mut().unwrap() = last + 1;
            heap.push(Cand(score - cost[last] + cost[last + 1], shifted));
            let mut expanded = set;
            expanded.push(last + 1);
            heap.push(Cand(score + cost[last + 1], expanded));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_sequence_enumerates_all_codes_once_in_cost_order() {
        let proj = [0.3, -0.1, 0.7, -0.05];
        let code = 0b0101;
        let seq = probe_sequence(code, &proj, 100);
        assert_eq!(seq.len(), 16);
        let mut uniq = seq.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), 16);
        let cost = |c: u64| -> f64 {
            (0..4).filter(|b| (c ^ code) >> b & 1 == 1).map(|b| proj[b] * proj[b]).sum()
        };
        for w in seq.windows(2) {
            assert!(cost(w[0]) <= cost(w[1]) + 1e-15);
        }
        assert_eq!(seq[0], code);
        // cheapest flip is bit 3 (|-0.05|)
        assert_eq!(seq[1], code ^ 0b1000);
    }

    #[test]
    fn zero_hyperplanes_is_one_bucket() {
        assert_eq!(probe_sequence(0, &[], 10), vec![0]);
    }
}
