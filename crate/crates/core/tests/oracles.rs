mod support;

use std::collections::HashSet;

use kbc_core::eval::{evaluate, filtered_rank, raw_rank, FilterSet};
use kbc_core::kg::{EntityId, Side, Split, Triple, TripleStore};
use kbc_core::model::{EmbeddingStore, ModelKind, Norm};
use kbc_core::synth::random_kb;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

fn random_pair(rng: &mut ChaCha8Rng, ne: u32, nr: u32) -> (Triple, Triple) {
    let pos = Triple::new(rng.random_range(0..ne), rng.random_range(0..nr), rng.random_range(0..ne));
    let side = if rng.random::<bool>() { Side::Head } else { Side::Tail };
    let neg = pos.with_entity(side, EntityId(rng.random_range(0..ne)));
    (pos, neg)
}

fn check_gradients(kind: ModelKind, norm: Norm, dim: usize, pairs: usize) {
    let (ne, nr) = (12u32, 3u32);
    let mut emb = EmbeddingStore::<f64>::init(kind, norm, ne as usize, nr as usize, dim, dim as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let margin = 4.0;
    let (mut checked, mut ok) = (0usize, 0usize);
    let mut done = 0;
    while done < pairs {
        let (pos, neg) = random_pair(&mut rng, ne, nr);
        if pos == neg || hinge_oracle(&emb, &pos, &neg, margin) <= 0.0 {
            continue;
        }
        done += 1;
        let g = emb.grad_pair(&pos, &neg, margin);
        let mut params = Vec::new();
        for e in [pos.head, pos.tail, neg.head, neg.tail] {
            for i in 0..dim {
                params.push(Param::Entity(e, i));
            }
        }
        for i in 0..emb.relation_len() {
            params.push(Param::Relation(pos.relation, i));
        }
        for _ in 0..12 {
            let p = params[rng.random_range(0..params.len())];
            if near_kink(&emb, &[&pos, &neg], p, 1e-5) {
                continue;
            }
            let analytic = match p {
                Param::Entity(e, i) => g.entity(e).map_or(0.0, |row| row[i]),
                Param::Relation(r, i) => g.relation(r).map_or(0.0, |row| row[i]),
            };
            let numeric = finite_difference(&mut emb, &pos, &neg, margin, p, 1e-5);
            checked += 1;
            if relative_error(analytic, numeric, 1e-3) < 1e-4 {
                ok += 1;
            }
        }
    }
    assert!(checked > 0);
    assert!(
        ok as f64 >= 0.99 * checked as f64,
        "{kind:?}/{norm:?} d={dim}: {ok}/{checked} coordinates agree"
    );
}

#[test]
fn transe_gradients_match_finite_differences() {
    for norm in [Norm::L1, Norm::L2] {
        for dim in [2, 10] {
            check_gradients(ModelKind::TransE, norm, dim, 100);
        }
    }
}

#[test]
fn rescal_gradients_match_finite_differences() {
    for dim in [2, 10] {
        check_gradients(ModelKind::Rescal, Norm::L1, dim, 100);
    }
}

/// Embeddings with small integer entries, so scores are exact and ties common.
fn integer_embeddings(kind: ModelKind, ne: usize, nr: usize, dim: usize, rng: &mut ChaCha8Rng) -> EmbeddingStore<f64> {
    let rel_len = match kind {
        ModelKind::TransE => dim,
        ModelKind::Rescal => dim * dim,
    };
    let ent: Vec<f64> = (0..ne * dim).map(|_| rng.random_range(-2..=2) as f64).collect();
    let rel: Vec<f64> = (0..nr * rel_len).map(|_| rng.random_range(-1..=1) as f64).collect();
    EmbeddingStore::from_parts(kind, Norm::L1, dim, ent, rel)
}

#[test]
fn filtered_ranks_match_sorting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for round in 0..30 {
        let ne = rng.random_range(2..=20);
        let nr = rng.random_range(1..=3);
        let n = rng.random_range(1..=3 * ne);
        let kb = TripleStore::from_triples(Split::Train, random_kb(ne, nr, n, &mut rng));
        let kind = if round % 2 == 0 { ModelKind::TransE } else { ModelKind::Rescal };
        let emb = integer_embeddings(kind, ne, nr, 2, &mut rng);
        let filter = FilterSet::new([&kb]);
        let known: HashSet<(u32, u32, u32)> = kb
            .triples()
            .iter()
            .map(|t| (t.head.0, t.relation.0, t.tail.0))
            .collect();
        for t in kb.triples() {
            for side in [Side::Head, Side::Tail] {
                let got = filtered_rank(&emb, t, side, &filter);
                assert_eq!(got, brute_force_rank(&emb, t, side, &known), "round {round} {t:?} {side:?}");
                assert!(got <= raw_rank(&emb, t, side));
            }
        }
        let report = evaluate(&emb, kb.triples(), &filter);
        let oracle_mrr = kb
            .triples()
            .iter()
            .flat_map(|t| [Side::Head, Side::Tail].map(|s| 1.0 / brute_force_rank(&emb, t, s, &known) as f64))
            .sum::<f64>()
            / (2 * kb.len()) as f64;
        assert!((report.mrr - oracle_mrr).abs() < 1e-12);
    }
}

#[test]
fn all_equal_scores_rank_in_the_middle() {
    // Every candidate ties; 5 entities, nothing filtered: rank 1 + floor(4/2).
    let emb = EmbeddingStore::from_parts(ModelKind::TransE, Norm::L1, 1, vec![0.0; 5], vec![0.0]);
    let t = Triple::new(0, 0, 3);
    let store = TripleStore::from_triples(Split::Train, [t]);
    let filter = FilterSet::new([&store]);
    assert_eq!(filtered_rank(&emb, &t, Side::Tail, &filter), 3);
    let known = HashSet::from([(0, 0, 3)]);
    assert_eq!(brute_force_rank(&emb, &t, Side::Tail, &known), 3);
}
