use rand::Rng;
use rayon::prelude::*;

use super::{choose_side, corrupt_rns, NegativeBatch, NegativeEntry, SamplerError, SimilarityIndex, EXPLORATION_FLOOR};
use crate::kg::{BernoulliStats, EntityId, Side, Triple, TripleStore};
use crate::model::UnitRows;
use crate::rng::stream;
use crate::scalar::{dot, Scalar};

/// Where DNS candidates come from.
#[derive(Clone, Copy)]
pub enum CandidateSource<'a, F> {
    /// Every entity.
    Exact,
    /// The `candidates` nearest entities according to an LSH index, plus an
    /// occasional uniform draw (see [`EXPLORATION_FLOOR`]).
    Approximate {
        index: &'a SimilarityIndex<F>,
        candidates: usize,
    },
}

/// Read-only state shared by every DNS call within a batch.
#[derive(Clone, Copy)]
pub struct DnsContext<'a, F> {
    /// Known-true triples; corruptions found here are never emitted.
    pub store: &'a TripleStore,
    /// Unit-normalized snapshot of the current entity embeddings.
    pub units: &'a UnitRows<F>,
    pub stats: &'a BernoulliStats,
    pub source: CandidateSource<'a, F>,
    /// Keep at most this many accepted negatives (uniform reservoir).
    pub cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DnsOutcome {
    pub entry: NegativeEntry,
    /// The replaced entity had a zero embedding; one uniform corruption was used instead.
    pub fallback: bool,
    /// Acceptances before the cap was applied.
    pub accepted: usize,
}

/// Distributional corruption of one positive.
///
/// Picks the slot by Bernoulli side selection, then walks the candidates:
/// a candidate whose corruption is in the store (including the replaced
/// entity itself) is skipped; otherwise it is accepted independently with
/// probability `max(0, cos(replaced, candidate))`.
pub fn corrupt_dns<F: Scalar, R: Rng + ?Sized>(
    triple: &Triple,
    ctx: &DnsContext<'_, F>,
    rng: &mut R,
) -> Result<DnsOutcome, SamplerError> {
    let side = choose_side(triple, ctx.stats, rng)?;
    let query = triple.entity(side);
    let units = ctx.units;
    if units.is_zero(query) {
        log::debug!("zero embedding for entity {}; uniform fallback", query.0);
        let entry = corrupt_rns(triple, 1, ctx.stats, units.len(), rng)?;
        return Ok(DnsOutcome {
            entry,
            fallback: true,
            accepted: 1,
        });
    }
    let known = ctx.store.known_replacements(triple, side);
    let qrow = units.row(query);
    let mut reservoir = Reservoir::new(ctx.cap);

    let mut consider = |cand: EntityId, rng: &mut R| {
        let m = dot(qrow, units.row(cand)).min(F::one());
        if m > F::zero() && rng.random::<f64>() < m.to_f64_lossy() {
            reservoir.offer(triple.with_entity(side, cand), rng);
        }
    };

    match ctx.source {
        CandidateSource::Exact => {
            let mut k = 0;
            for i in 0..units.len() as u32 {
                let cand = EntityId(i);
                while k < known.len() && known[k] < cand {
                    k += 1;
                }
                if cand == query || (k < known.len() && known[k] == cand) {
                    continue;
                }
                consider(cand, rng);
            }
        }
        CandidateSource::Approximate { index, candidates } => {
            let mut cands = index.query_vector(qrow, candidates);
            if rng.random::<f64>() < EXPLORATION_FLOOR {
                let extra = EntityId(rng.random_range(0..units.len() as u32));
                if !cands.contains(&extra) {
                    cands.push(extra);
                }
            }
            for cand in cands {
                if cand == query || known.binary_search(&cand).is_ok() {
                    continue;
                }
                consider(cand, rng);
            }
        }
    }

    let accepted = reservoir.seen;
    Ok(DnsOutcome {
        entry: NegativeEntry {
            index: 0,
            side,
            negatives: reservoir.items,
        },
        fallback: false,
        accepted,
    })
}

/// DNS over a batch; position `j` uses its own stream derived from `batch_seed`.
pub fn sample_dns<F: Scalar>(
    batch: &[Triple],
    ctx: &DnsContext<'_, F>,
    batch_seed: u64,
) -> Result<NegativeBatch, SamplerError> {
    let outcomes = batch
        .par_iter()
        .enumerate()
        .map(|(j, t)| {
            let mut rng = stream(batch_seed, &[j as u64]);
            corrupt_dns(t, ctx, &mut rng).map(|mut o| {
                o.entry.index = j;
                o
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let fallbacks = outcomes.iter().filter(|o| o.fallback).count();
    if fallbacks > 0 {
        log::info!("DNS fell back to uniform corruption for {fallbacks} positives");
    }
    Ok(NegativeBatch {
        entries: outcomes.into_iter().map(|o| o.entry).collect(),
        fallbacks,
    })
}

/// Exact mean of the number of DNS negatives for `triple` when corrupting
/// `side`: the sum of `max(0, cos)` over the non-filtered candidates.
pub fn expected_negatives<F: Scalar>(
    units: &UnitRows<F>,
    store: &TripleStore,
    triple: &Triple,
    side: Side,
) -> f64 {
    let query = triple.entity(side);
    if units.is_zero(query) {
        return 0.0;
    }
    let known = store.known_replacements(triple, side);
    (0..units.len() as u32)
        .map(EntityId)
        .filter(|&c| c != query && known.binary_search(&c).is_err())
        .map(|c| {
            dot(units.row(query), units.row(c))
                .min(F::one())
                .max(F::zero())
                .to_f64_lossy()
        })
        .sum()
}

struct Reservoir {
    cap: Option<usize>,
    items: Vec<Triple>,
    seen: usize,
}

impl Reservoir {
    fn new(cap: Option<usize>) -> Self {
        Self {
            cap,
            items: Vec::new(),
            seen: 0,
        }
    }

    fn offer<R: Rng + ?Sized>(&mut self, t: Triple, rng: &mut R) {
        self.seen += 1;
        match self.cap {
            Some(cap) if self.items.len() >= cap => {
                let j = rng.random_range(0..self.seen);
                if j < cap {
                    self.items[j] = t;
                }
            }
            _ => self.items.push(t),
        }
    }
}
