//! Negative sampling: uniform corruption (RNS) and distributional
//! corruption driven by cosine similarity of entity embeddings (DNS).

mod dns;
mod lsh;
mod rns;

pub use dns::{corrupt_dns, expected_negatives, sample_dns, CandidateSource, DnsContext, DnsOutcome};
pub use lsh::{LshParams, RecallReport, SimilarityIndex};
pub use rns::{corrupt_rns, sample_rns};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{BernoulliStats, KgError, Side, Triple};

/// Probability with which approximate DNS adds one uniformly drawn
/// candidate to the LSH candidate list.
pub const EXPLORATION_FLOOR: f64 = 0.05;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Stats(#[from] KgError),
    #[error("invalid sampler configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum DnsMode {
    /// Scan every entity as a candidate.
    Exact,
    /// Restrict candidates to the `candidates` nearest entities from an LSH index.
    Approximate { candidates: usize, lsh: LshParams },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SamplerKind {
    /// `negatives` uniform corruptions per positive.
    Rns { negatives: usize },
    Dns { mode: DnsMode, cap: Option<usize> },
}

impl SamplerKind {
    pub fn validate(&self) -> Result<(), SamplerError> {
        match *self {
            SamplerKind::Rns { negatives } if negatives < 1 => {
                Err(SamplerError::Config("RNS needs at least one negative per positive".into()))
            }
            SamplerKind::Dns { cap: Some(0), .. } => {
                Err(SamplerError::Config("DNS cap must be at least 1".into()))
            }
            SamplerKind::Dns {
                mode: DnsMode::Approximate { candidates, lsh },
                ..
            } => {
                if candidates < 1 {
                    return Err(SamplerError::Config("DNS candidate count must be at least 1".into()));
                }
                lsh.validate()
            }
            _ => Ok(()),
        }
    }
}

/// Corruptions generated for the positive at batch position `index`.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeEntry {
    pub index: usize,
    pub side: Side,
    pub negatives: Vec<Triple>,
}

/// Sampler output for one batch, aligned with the batch order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NegativeBatch {
    pub entries: Vec<NegativeEntry>,
    /// Positives whose query row was zero and fell back to one uniform corruption.
    pub fallbacks: usize,
}

impl NegativeBatch {
    pub fn total(&self) -> usize {
        self.entries.iter().map(|e| e.negatives.len()).sum()
    }

    pub fn max_per_positive(&self) -> usize {
        self.entries.iter().map(|e| e.negatives.len()).max().unwrap_or(0)
    }
}

/// Bernoulli choice of the slot to corrupt: head with probability `p_head(r)`.
pub fn choose_side<R: Rng + ?Sized>(
    triple: &Triple,
    stats: &BernoulliStats,
    rng: &mut R,
) -> Result<Side, SamplerError> {
    let p = stats.p_head(triple.relation)?;
    Ok(if rng.random::<f64>() < p {
        Side::Head
    } else {
        Side::Tail
    })
}
