//! Mini-batch optimization of the pairwise margin ranking loss with Adam,
//! epoch loop and early stopping on validation filtered MRR.

mod adam;

pub use adam::{adam_update, AdamHyper, AdamState, Moments};

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{evaluate, FilterSet};
use crate::kg::{BernoulliStats, EntityId, Triple, TripleStore};
use crate::model::{EmbeddingStore, GradientBuffer, ModelKind, Norm};
use crate::rng::{derive_seed, stream};
use crate::sampler::{
    sample_dns, sample_rns, CandidateSource, DnsContext, DnsMode, NegativeBatch, SamplerError,
    SamplerKind, SimilarityIndex,
};
use crate::scalar::Scalar;

// Stream labels for seed derivation.
const INIT: u64 = 1;
const SHUFFLE: u64 = 2;
const SAMPLE: u64 = 3;
const LSH: u64 = 4;

/// Positives per gradient-accumulation slice. Slices are fixed by position,
/// not by thread count, so merged gradients are reproducible.
const SLICE: usize = 64;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("non-finite {0} encountered; aborting")]
    NonFinite(String),
    #[error("observer failed: {0}")]
    Observer(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<F> {
    pub model: ModelKind,
    pub norm: Norm,
    pub dim: usize,
    /// Hinge margin; must be positive.
    pub margin: F,
    pub batch_size: usize,
    pub learning_rate: F,
    pub max_epochs: usize,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
    pub eval_every: usize,
    pub sampler: SamplerKind,
    pub adam: AdamHyper<F>,
    pub seed: u64,
}

impl<F: Scalar> TrainConfig<F> {
    /// Published settings: TransE d = 100, margin 10; RESCAL d = 200,
    /// margin 5; 1000-epoch cap, patience 20, exact DNS.
    pub fn for_model(model: ModelKind) -> Self {
        let (dim, margin) = match model {
            ModelKind::TransE => (100, 10.0),
            ModelKind::Rescal => (200, 5.0),
        };
        Self {
            model,
            norm: Norm::L1,
            dim,
            margin: F::lit(margin),
            batch_size: 512,
            learning_rate: F::lit(0.001),
            max_epochs: 1000,
            patience: 20,
            eval_every: 1,
            sampler: SamplerKind::Dns {
                mode: DnsMode::Exact,
                cap: None,
            },
            adam: AdamHyper::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_owned()));
        if !(self.margin > F::zero()) {
            return bad("margin must be > 0");
        }
        if !(self.learning_rate > F::zero()) {
            return bad("learning rate must be > 0");
        }
        if self.dim == 0 {
            return bad("dimension must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be >= 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1");
        }
        if self.patience == 0 {
            return bad("patience must be >= 1");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be >= 1");
        }
        let h = &self.adam;
        let unit = F::zero()..F::one();
        if !unit.contains(&h.beta1) || !unit.contains(&h.beta2) || !(h.eps > F::zero()) {
            return bad("Adam betas must lie in [0, 1) and eps must be > 0");
        }
        self.sampler.validate()?;
        Ok(())
    }
}

/// `max(0, margin + neg - pos)`.
#[inline]
pub fn hinge<F: Scalar>(pos: F, neg: F, margin: F) -> F {
    (margin + neg - pos).max(F::zero())
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BatchStats {
    /// Raw sum of hinge terms.
    pub loss: f64,
    pub pairs: usize,
    pub active: usize,
    pub updated: bool,
}

/// One optimization step: sums the hinge gradients of every positive
/// against each of its own negatives, applies one Adam update, then (for
/// TransE) renormalizes the touched entity rows.
pub fn train_batch<F: Scalar>(
    batch: &[Triple],
    negatives: &NegativeBatch,
    emb: &mut EmbeddingStore<F>,
    adam: &mut AdamState<F>,
    cfg: &TrainConfig<F>,
) -> Result<BatchStats, TrainError> {
    let margin = cfg.margin;
    let snapshot: &EmbeddingStore<F> = emb;
    let partial: Vec<(GradientBuffer<F>, BatchStats)> = negatives
        .entries
        .par_chunks(SLICE)
        .map(|chunk| {
            let mut buf = GradientBuffer::new(snapshot.dim(), snapshot.relation_len());
            let mut st = BatchStats::default();
            for entry in chunk {
                let pos = &batch[entry.index];
                for neg in &entry.negatives {
                    let l = snapshot.accumulate_pair(pos, neg, margin, &mut buf);
                    st.pairs += 1;
                    if l > F::zero() {
                        st.active += 1;
                        st.loss += l.to_f64_lossy();
                    }
                }
            }
            (buf, st)
        })
        .collect();

    let mut grads = GradientBuffer::new(emb.dim(), emb.relation_len());
    let mut stats = BatchStats::default();
    for (buf, st) in &partial {
        grads.merge(buf);
        stats.loss += st.loss;
        stats.pairs += st.pairs;
        stats.active += st.active;
    }
    if !stats.loss.is_finite() {
        return Err(TrainError::NonFinite("loss".into()));
    }
    stats.updated = adam.apply(emb, &grads, cfg.learning_rate)?;
    if stats.updated && cfg.model == ModelKind::TransE {
        let touched: Vec<EntityId> = grads.entities().map(|(e, _)| e).collect();
        emb.normalize_rows(&touched);
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationMetrics {
    pub mrr: f64,
    pub hits_at_1: f64,
    pub hits_at_10: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Hinge loss averaged over (positive, negative) pairs.
    pub mean_loss: f64,
    /// Raw sum of hinge terms, the optimized objective.
    pub total_loss: f64,
    pub pairs: usize,
    pub active_fraction: f64,
    pub mean_negatives: f64,
    pub max_negatives: usize,
    pub fallbacks: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub index_recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub valid: Option<ValidationMetrics>,
    /// Wall-clock seconds; not serialized so report files stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

/// Patience-based stopping rule on a metric where larger is better.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    stale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            stale: 0,
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    /// Records one evaluation. Only a strict improvement resets the counter.
    pub fn observe(&mut self, metric: f64) -> StopDecision {
        if self.best.is_none_or(|b| metric > b) {
            self.best = Some(metric);
            self.stale = 0;
            StopDecision::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }
}

/// Everything `fit` reads besides the configuration.
pub struct TrainingData<'a> {
    pub train: &'a TripleStore,
    pub valid: &'a TripleStore,
    /// Known-true triples for filtered validation ranking.
    pub filter: &'a FilterSet,
    pub num_entities: usize,
    pub num_relations: usize,
}

/// Callbacks for streaming reports and checkpoints out of `fit`.
pub trait FitObserver<F> {
    fn on_epoch(&mut self, _report: &EpochReport) -> std::io::Result<()> {
        Ok(())
    }

    fn on_improvement(&mut self, _epoch: usize, _emb: &EmbeddingStore<F>) -> std::io::Result<()> {
        Ok(())
    }
}

/// Observer that ignores everything.
pub struct Silent;

impl<F> FitObserver<F> for Silent {}

#[derive(Debug, Clone)]
pub struct FitResult<F> {
    /// Parameters at the best validation MRR (or after the last epoch when
    /// no validation triples exist).
    pub best: EmbeddingStore<F>,
    pub best_epoch: usize,
    pub best_mrr: Option<f64>,
    /// Parameters after the last trained epoch.
    pub last: EmbeddingStore<F>,
    pub reports: Vec<EpochReport>,
    pub stopped_early: bool,
}

pub fn fit<F: Scalar>(
    data: &TrainingData<'_>,
    cfg: &TrainConfig<F>,
    observer: &mut dyn FitObserver<F>,
) -> Result<FitResult<F>, TrainError> {
    cfg.validate()?;
    let emb = EmbeddingStore::init(
        cfg.model,
        cfg.norm,
        data.num_entities,
        data.num_relations,
        cfg.dim,
        derive_seed(cfg.seed, &[INIT]),
    );
    fit_from(data, cfg, emb, observer)
}

/// Like [`fit`], starting from given parameters.
pub fn fit_from<F: Scalar>(
    data: &TrainingData<'_>,
    cfg: &TrainConfig<F>,
    mut emb: EmbeddingStore<F>,
    observer: &mut dyn FitObserver<F>,
) -> Result<FitResult<F>, TrainError> {
    cfg.validate()?;
    let stats = BernoulliStats::from_store(data.train, data.num_relations);
    let mut adam = AdamState::new(cfg.adam, &emb);
    let mut order: Vec<Triple> = data.train.triples().to_vec();
    let mut reports = Vec::new();
    let mut best: Option<(usize, f64, EmbeddingStore<F>)> = None;
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut stream(cfg.seed, &[SHUFFLE, epoch as u64]));

        let index = match cfg.sampler {
            SamplerKind::Dns {
                mode: DnsMode::Approximate { lsh, .. },
                ..
            } => {
                let mut params = lsh;
                params.seed = derive_seed(cfg.seed, &[LSH, lsh.seed, epoch as u64]);
                Some(SimilarityIndex::build(&emb, params)?)
            }
            _ => None,
        };
        let index_recall = match (&index, cfg.sampler) {
            (
                Some(ix),
                SamplerKind::Dns {
                    mode: DnsMode::Approximate { candidates, .. },
                    ..
                },
            ) => {
                let r = ix.measure_recall(candidates, 32, derive_seed(cfg.seed, &[LSH, epoch as u64]));
                log::info!(
                    "epoch {epoch}: LSH recall@{candidates} = {:.3} ({:.0} candidates/query)",
                    r.recall,
                    r.mean_candidates
                );
                Some(r.recall)
            }
            _ => None,
        };

        let (mut loss, mut pairs, mut active) = (0.0, 0usize, 0usize);
        let (mut negs_total, mut negs_max, mut fallbacks) = (0usize, 0usize, 0usize);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let batch_seed = derive_seed(cfg.seed, &[SAMPLE, epoch as u64, b as u64]);
            let negatives = match cfg.sampler {
                SamplerKind::Rns { negatives } => {
                    sample_rns(batch, negatives, &stats, data.num_entities, batch_seed)?
                }
                SamplerKind::Dns { mode, cap } => {
                    let units = emb.unit_entities();
                    let source = match (mode, &index) {
                        (DnsMode::Approximate { candidates, .. }, Some(index)) => {
                            CandidateSource::Approximate { index, candidates }
                        }
                        _ => CandidateSource::Exact,
                    };
                    let ctx = DnsContext {
                        store: data.train,
                        units: &units,
                        stats: &stats,
                        source,
                        cap,
                    };
                    sample_dns(batch, &ctx, batch_seed)?
                }
            };
            negs_total += negatives.total();
            negs_max = negs_max.max(negatives.max_per_positive());
            fallbacks += negatives.fallbacks;
            let st = train_batch(batch, &negatives, &mut emb, &mut adam, cfg).map_err(|e| {
                log::error!("epoch {epoch}, batch {b}: {e}");
                e
            })?;
            loss += st.loss;
            pairs += st.pairs;
            active += st.active;
        }

        let valid = (epoch % cfg.eval_every == 0 && !data.valid.is_empty()).then(|| {
            let r = evaluate(&emb, data.valid.triples(), data.filter);
            ValidationMetrics {
                mrr: r.mrr,
                hits_at_1: r.hits_at_1,
                hits_at_10: r.hits_at_10,
            }
        });
        let n = data.train.len().max(1) as f64;
        let report = EpochReport {
            epoch,
            mean_loss: if pairs > 0 { loss / pairs as f64 } else { 0.0 },
            total_loss: loss,
            pairs,
            active_fraction: if pairs > 0 { active as f64 / pairs as f64 } else { 0.0 },
            mean_negatives: negs_total as f64 / n,
            max_negatives: negs_max,
            fallbacks,
            index_recall,
            valid,
            wall_time: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: loss {:.4} active {:.3} |N| {:.1}{}",
            report.mean_loss,
            report.active_fraction,
            report.mean_negatives,
            valid.map(|v| format!(" valid MRR {:.4}", v.mrr)).unwrap_or_default()
        );
        observer.on_epoch(&report)?;
        reports.push(report);

        if let Some(v) = valid {
            match stopper.observe(v.mrr) {
                StopDecision::Improved => {
                    observer.on_improvement(epoch, &emb)?;
                    best = Some((epoch, v.mrr, emb.clone()));
                }
                StopDecision::Continue => {}
                StopDecision::Stop => {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    let last_epoch = reports.last().map_or(0, |r| r.epoch);
    let (best_epoch, best_mrr, best_emb) = match best {
        Some((e, m, b)) => (e, Some(m), b),
        None => (last_epoch, None, emb.clone()),
    };
    Ok(FitResult {
        best: best_emb,
        best_epoch,
        best_mrr,
        last: emb,
        reports,
        stopped_early,
    })
}

#[cfg(test)]
mod tests;
