use rand::Rng;
use rayon::prelude::*;

use super::{choose_side, NegativeBatch, NegativeEntry, SamplerError};
use crate::kg::{BernoulliStats, EntityId, Triple};
use crate::rng::stream;

/// `negatives` corruptions of one side of `triple`, each replacement drawn
/// uniformly from all entities. Known-true corruptions are not filtered.
pub fn corrupt_rns<R: Rng + ?Sized>(
    triple: &Triple,
    negatives: usize,
    stats: &BernoulliStats,
    num_entities: usize,
    rng: &mut R,
) -> Result<NegativeEntry, SamplerError> {
    let side = choose_side(triple, stats, rng)?;
    let negatives = (0..negatives)
        .map(|_| triple.with_entity(side, EntityId(rng.random_range(0..num_entities as u32))))
        .collect();
    Ok(NegativeEntry {
        index: 0,
        side,
        negatives,
    })
}

/// Uniform corruption of every positive in `batch`. Position `j` draws from
/// its own stream derived from `batch_seed`, so output does not depend on
/// thread scheduling.
pub fn sample_rns(
    batch: &[Triple],
    negatives: usize,
    stats: &BernoulliStats,
    num_entities: usize,
    batch_seed: u64,
) -> Result<NegativeBatch, SamplerError> {
    if negatives < 1 {
        return Err(SamplerError::Config("RNS needs at least one negative per positive".into()));
    }
    let entries = batch
        .par_iter()
        .enumerate()
        .map(|(j, t)| {
            let mut rng = stream(batch_seed, &[j as u64]);
            corrupt_rns(t, negatives, stats, num_entities, &mut rng).map(|mut e| {
                e.index = j;
                e
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NegativeBatch {
        entries,
        fallbacks: 0,
    })
}
