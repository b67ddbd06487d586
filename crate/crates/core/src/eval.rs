//! Filtered link-prediction evaluation.
//!
//! Every test triple yields a head query and a tail query. A query ranks
//! the target entity among all replacement candidates after removing those
//! whose triple is known to be true (train, valid or test), with ties
//! resolved to the middle of the tie block.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kg::{EntityId, Side, Split, Triple, TripleStore};
use crate::model::EmbeddingStore;
use crate::scalar::Scalar;

/// Union of known-true triples used to filter ranking candidates.
#[derive(Debug, Clone)]
pub struct FilterSet {
    known: TripleStore,
}

impl FilterSet {
    pub fn new<'a, I: IntoIterator<Item = &'a TripleStore>>(stores: I) -> Self {
        Self {
            known: TripleStore::union(Split::Train, stores),
        }
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.known.contains_triple(t)
    }

    pub fn len(&self) -> usize {
        self.known.len()
    }

    pub fn is_empty(&self) -> bool {
        self.known.is_empty()
    }

    fn excluded(&self, t: &Triple, side: Side) -> &[EntityId] {
        self.known.known_replacements(t, side)
    }
}

/// Rank of `target` among candidate `scores`, skipping ids in the sorted
/// `excluded` list other than the target:
/// `1 + #{score > target} + floor(#{non-target ties} / 2)`.
pub fn rank_among(scores: &[impl PartialOrd + Copy], target: EntityId, excluded: &[EntityId]) -> usize {
    let ts = scores[target.index()];
    let (mut greater, mut ties) = (0usize, 0usize);
    let mut k = 0;
    for (i, s) in scores.iter().enumerate() {
        let id = EntityId(i as u32);
        while k < excluded.len() && excluded[k] < id {
            k += 1;
        }
        if id == target || (k < excluded.len() && excluded[k] == id) {
            continue;
        }
        if *s > ts {
            greater += 1;
        } else if *s == ts {
            ties += 1;
        }
    }
    1 + greater + ties / 2
}

pub fn filtered_rank<F: Scalar>(
    emb: &EmbeddingStore<F>,
    triple: &Triple,
    side: Side,
    filter: &FilterSet,
) -> usize {
    let mut scores = Vec::new();
    emb.score_all(triple, side, &mut scores);
    rank_among(&scores, triple.entity(side), filter.excluded(triple, side))
}

/// Unfiltered rank: every entity competes.
pub fn raw_rank<F: Scalar>(emb: &EmbeddingStore<F>, triple: &Triple, side: Side) -> usize {
    let mut scores = Vec::new();
    emb.score_all(triple, side, &mut scores);
    rank_among(&scores, triple.entity(side), &[])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRank {
    pub triple: Triple,
    pub side: Side,
    pub rank: usize,
    pub raw_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub queries: Vec<QueryRank>,
    pub mrr: f64,
    pub hits_at_1: f64,
    pub hits_at_10: f64,
}

impl RankingReport {
    /// Aggregates in query order, so the result is independent of how the
    /// ranks were computed.
    pub fn from_queries(queries: Vec<QueryRank>) -> Self {
        let n = queries.len().max(1) as f64;
        let mut rr = 0.0;
        let (mut h1, mut h10) = (0usize, 0usize);
        for q in &queries {
            rr += 1.0 / q.rank as f64;
            h1 += usize::from(q.rank <= 1);
            h10 += usize::from(q.rank <= 10);
        }
        Self {
            mrr: rr / n,
            hits_at_1: h1 as f64 / n,
            hits_at_10: h10 as f64 / n,
            queries,
        }
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn hits_at(&self, k: usize) -> f64 {
        let n = self.queries.len().max(1) as f64;
        self.queries.iter().filter(|q| q.rank <= k).count() as f64 / n
    }

    /// Raw (unfiltered) MRR over the same queries.
    pub fn raw_mrr(&self) -> f64 {
        let n = self.queries.len().max(1) as f64;
        self.queries.iter().map(|q| 1.0 / q.raw_rank as f64).sum::<f64>() / n
    }

    /// `key = value` lines, metrics in percent with one decimal.
    pub fn to_key_value(&self) -> String {
        format!(
            "mrr = {:.1}\nhits@1 = {:.1}\nhits@10 = {:.1}\nqueries = {}\n",
            100.0 * self.mrr,
            100.0 * self.hits_at_1,
            100.0 * self.hits_at_10,
            self.queries.len()
        )
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>7}", "metric", "value");
        for (name, v) in [
            ("MRR", self.mrr),
            ("Hits@1", self.hits_at_1),
            ("Hits@10", self.hits_at_10),
        ] {
            let _ = writeln!(s, "{:<10} {:>7.1}", name, 100.0 * v);
        }
        let _ = writeln!(s, "{:<10} {:>7}", "queries", self.queries.len());
        s
    }

    /// One tab-separated line per query: `head relation tail side rank raw_rank`.
    pub fn ranks_tsv(&self) -> String {
        let mut s = String::from("head\trelation\ttail\tside\trank\traw_rank\n");
        for q in &self.queries {
            let side = match q.side {
                Side::Head => "head",
                Side::Tail => "tail",
            };
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{side}\t{}\t{}",
                q.triple.head.0, q.triple.relation.0, q.triple.tail.0, q.rank, q.raw_rank
            );
        }
        s
    }
}

/// Ranks both sides of every test triple. Read-only on `emb`.
pub fn evaluate<F: Scalar>(
    emb: &EmbeddingStore<F>,
    test: &[Triple],
    filter: &FilterSet,
) -> RankingReport {
    let queries: Vec<QueryRank> = test
        .par_iter()
        .map_init(Vec::new, |scores, t| {
            [Side::Head, Side::Tail].map(|side| {
                emb.score_all(t, side, scores);
                let target = t.entity(side);
                QueryRank {
                    triple: *t,
                    side,
                    rank: rank_among(scores, target, filter.excluded(t, side)),
                    raw_rank: rank_among(scores, target, &[]),
                }
            })
        })
        .flat_map_iter(|pair| pair.into_iter())
        .collect();
    RankingReport::from_queries(queries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelKind, Norm};

    fn q(rank: usize) -> QueryRank {
        QueryRank {
            triple: Triple::new(0, 0, 0),
            side: Side::Tail,
            rank,
            raw_rank: rank,
        }
    }

    #[test]
    fn aggregates() {
        let r = RankingReport::from_queries(vec![q(1), q(4)]);
        assert_eq!(r.mrr, 0.625);
        assert_eq!(r.hits_at_1, 0.5);
        assert_eq!(r.hits_at_10, 1.0);
        let all = RankingReport::from_queries(vec![q(1); 5]);
        assert_eq!((all.mrr, all.hits_at_1, all.hits_at_10), (1.0, 1.0, 1.0));
        assert_eq!(r.to_key_value(), "mrr = 62.5\nhits@1 = 50.0\nhits@10 = 100.0\nqueries = 2\n");
    }

    #[test]
    fn tie_formula() {
        for k in 1..9 {
            let scores = vec![0.5; k];
            assert_eq!(rank_among(&scores, EntityId(0), &[]), 1 + (k - 1) / 2);
        }
    }

    #[test]
    fn strict_best_is_rank_one_and_filter_skips() {
        let scores = [3.0, 1.0, 5.0, 2.0];
        assert_eq!(rank_among(&scores, EntityId(2), &[]), 1);
        assert_eq!(rank_among(&scores, EntityId(0), &[]), 2);
        assert_eq!(rank_among(&scores, EntityId(0), &[EntityId(2)]), 1);
        // the target is never filtered out of its own query
        assert_eq!(rank_among(&scores, EntityId(1), &[EntityId(1), EntityId(2)]), 3);
    }

    #[test]
    fn evaluation_is_read_only() {
        let emb = EmbeddingStore::<f64>::init(ModelKind::Rescal, Norm::L1, 10, 2, 3, 5);
        let before = emb.clone();
        let test = TripleStore::from_triples(Split::Test, [Triple::new(0, 1, 2), Triple::new(3, 0, 4)]);
        let filter = FilterSet::new([&test]);
        let report = evaluate(&emb, test.triples(), &filter);
        assert_eq!(report.len(), 4);
        assert_eq!(emb, before);
        assert!(report.queries.iter().all(|q| q.rank >= 1 && q.rank <= q.raw_rank));
        let again = RankingReport::from_queries(report.queries.clone());
        assert_eq!(again, report);
    }
}
