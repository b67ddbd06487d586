//! Independent oracles shared by the integration and acceptance tests.
//! Nothing here calls the code paths it is used to check.
#![allow(dead_code)]

use std::collections::HashSet;

use kbc_core::kg::{EntityId, RelationId, Side, Triple};
use kbc_core::model::{EmbeddingStore, ModelKind, Norm};

/// Score recomputed from raw parameter slices.
pub fn score_oracle(emb: &EmbeddingStore<f64>, t: &Triple) -> f64 {
    let h = emb.entity(t.head);
    let r = emb.relation(t.relation);
    let tl = emb.entity(t.tail);
    let d = emb.dim();
    match emb.kind() {
        ModelKind::TransE => {
            let diffs = (0..d).map(|i| h[i] + r[i] - tl[i]);
            match emb.norm() {
                Norm::L1 => -diffs.map(f64::abs).sum::<f64>(),
                Norm::L2 => -diffs.map(|x| x * x).sum::<f64>().sqrt(),
            }
        }
        ModelKind::Rescal => {
            let mut s = 0.0;
            for i in 0..d {
                for j in 0..d {
                    s += h[i] * r[i * d + j] * tl[j];
                }
            }
            s
        }
    }
}

pub fn hinge_oracle(emb: &EmbeddingStore<f64>, pos: &Triple, neg: &Triple, margin: f64) -> f64 {
    (margin - score_oracle(emb, pos) + score_oracle(emb, neg)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Entity(EntityId, usize),
    Relation(RelationId, usize),
}

fn param_mut(emb: &mut EmbeddingStore<f64>, p: Param) -> &mut f64 {
    match p {
        Param::Entity(e, i) => &mut emb.entity_mut(e)[i],
        Param::Relation(r, i) => &mut emb.relation_mut(r)[i],
    }
}

/// Central finite difference of the pair hinge with respect to one parameter.
pub fn finite_difference(
    emb: &mut EmbeddingStore<f64>,
    pos: &Triple,
    neg: &Triple,
    margin: f64,
    p: Param,
    step: f64,
) -> f64 {
    let orig = *param_mut(emb, p);
    *param_mut(emb, p) = orig + step;
    let up = hinge_oracle(emb, pos, neg, margin);
    *param_mut(emb, p) = orig - step;
    let down = hinge_oracle(emb, pos, neg, margin);
    *param_mut(emb, p) = orig;
    (up - down) / (2.0 * step)
}

/// True when moving `p` by `step` could cross a point where the TransE L1
/// score is not differentiable (a residual component near zero).
pub fn near_kink(emb: &EmbeddingStore<f64>, triples: &[&Triple], p: Param, step: f64) -> bool {
    if emb.kind() != ModelKind::TransE || emb.norm() != Norm::L1 {
        return false;
    }
    let coord = match p {
        Param::Entity(_, i) | Param::Relation(_, i) => i,
    };
    triples.iter().any(|t| {
        let x = emb.entity(t.head)[coord] + emb.relation(t.relation)[coord] - emb.entity(t.tail)[coord];
        x.abs() < 2.0 * step
    })
}

/// Relative error with an absolute floor so near-zero coordinates are
/// judged on absolute agreement.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Filtered rank by sorting: candidates other than the target that form
/// known triples are dropped, the rest sorted by score descending, and the
/// target placed in the middle of its tie group.
pub fn brute_force_rank(
    emb: &EmbeddingStore<f64>,
    t: &Triple,
    side: Side,
    known: &HashSet<(u32, u32, u32)>,
) -> usize {
    let target = t.entity(side);
    let mut scored: Vec<(f64, u32)> = (0..emb.num_entities() as u32)
        .filter_map(|e| {
            let c = t.with_entity(side, EntityId(e));
            let keep = EntityId(e) == target || !known.contains(&(c.head.0, c.relation.0, c.tail.0));
            keep.then(|| (score_oracle(emb, &c), e))
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let s = score_oracle(emb, t);
    let first = scored.iter().position(|x| x.0 == s).unwrap() + 1;
    let last = scored.iter().rposition(|x| x.0 == s).unwrap() + 1;
    first + (last - first) / 2
}

/// Standard deviation of a binomial count.
pub fn binomial_sd(n: f64, p: f64) -> f64 {
    (n * p * (1.0 - p)).sqrt()
}
