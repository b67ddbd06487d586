use super::*;
use proptest::prelude::*;

fn transe(entities: Vec<f64>, relations: Vec<f64>, dim: usize) -> EmbeddingStore<f64> {
    EmbeddingStore::from_parts(ModelKind::TransE, Norm::L1, dim, entities, relations)
}

#[test]
fn init_is_deterministic_and_normalized() {
    for kind in [ModelKind::TransE, ModelKind::Rescal] {
        let a = EmbeddingStore::<f64>::init(kind, Norm::L1, 30, 4, 100, 7);
        let b = EmbeddingStore::<f64>::init(kind, Norm::L1, 30, 4, 100, 7);
        let c = EmbeddingStore::<f64>::init(kind, Norm::L1, 30, 4, 100, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        for e in 0..30 {
            let n = l2_norm(a.entity(EntityId(e)));
            assert!((n - 1.0).abs() < 1e-6);
        }
        let bound = 6.0 / 10.0;
        assert!(a.relation_params().iter().all(|x| x.abs() <= bound));
        assert_eq!(a.relation_params().len(), 4 * a.relation_len());
    }
}

#[test]
fn transe_scores() {
    // e_h = e_t, w_r = 0 -> 0
    let emb = transe(vec![0.3, -0.2, 0.3, -0.2], vec![0.0, 0.0], 2);
    assert_eq!(emb.score(&Triple::new(0, 0, 1)), 0.0);
    // e_h=(1,0), w_r=(0,1), e_t=(0,0) -> -(|1| + |1|)
    let emb = transe(vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0], 2);
    assert_eq!(emb.score(&Triple::new(0, 0, 1)), -2.0);
    let l2 = EmbeddingStore::from_parts(ModelKind::TransE, Norm::L2, 2, vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0]);
    assert!((l2.score(&Triple::new(0, 0, 1)) + 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn rescal_identity_orthogonal_is_zero() {
    let emb = EmbeddingStore::from_parts(ModelKind::Rescal, Norm::L1, 2, vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0, 1.0]);
    assert_eq!(emb.score(&Triple::new(0, 0, 1)), 0.0);
    assert_eq!(emb.score(&Triple::new(0, 0, 0)), 1.0);
}

#[test]
fn inactive_hinge_gives_empty_buffer() {
    let emb = transe(vec![0.0, 0.0, 0.0, 0.0, 5.0, 5.0], vec![0.0, 0.0], 2);
    // f(pos) = 0, f(neg) = -10
    let buf = emb.grad_pair(&Triple::new(0, 0, 1), &Triple::new(0, 0, 2), 1.0);
    assert!(buf.is_empty());
    // gap exactly equal to the margin is still inactive
    let buf = emb.grad_pair(&Triple::new(0, 0, 1), &Triple::new(0, 0, 2), 10.0);
    assert!(buf.is_empty());
}

#[test]
fn rescal_hand_gradient_d2() {
    // h=(1,2), t+=(3,4), t-=(0,1), W=0.1 I
    let emb = EmbeddingStore::<f64>::from_parts(
        ModelKind::Rescal,
        Norm::L1,
        2,
        vec![1.0, 2.0, 3.0, 4.0, 0.0, 1.0],
        vec![0.1, 0.0, 0.0, 0.1],
    );
    let pos = Triple::new(0, 0, 1);
    let neg = Triple::new(0, 0, 2);
    assert!((emb.score(&pos) - 1.1).abs() < 1e-12);
    assert!((emb.score(&neg) - 0.2).abs() < 1e-12);
    let buf = emb.grad_pair(&pos, &neg, 5.0);
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
    // -h t+^T + h t-^T
    assert!(close(buf.relation(RelationId(0)).unwrap(), &[-3.0, -3.0, -6.0, -6.0]));
    assert!(close(buf.entity(EntityId(0)).unwrap(), &[-0.3, -0.3]));
    assert!(close(buf.entity(EntityId(1)).unwrap(), &[-0.1, -0.2]));
    assert!(close(buf.entity(EntityId(2)).unwrap(), &[0.1, 0.2]));
}

#[test]
fn normalize_examples() {
    let mut emb = transe(vec![3.0, 4.0, 0.6, 0.8, 0.0, 0.0], vec![0.0, 0.0], 2);
    let zeros = emb.normalize_entities();
    assert_eq!(zeros, 1);
    assert_eq!(emb.zero_rows_seen(), 1);
    let e = emb.entity_matrix();
    assert!((e[0] - 0.6).abs() < 1e-15 && (e[1] - 0.8).abs() < 1e-15);
    assert!((e[2] - 0.6).abs() < 1e-12 && (e[3] - 0.8).abs() < 1e-12);
    assert_eq!(&e[4..6], &[0.0, 0.0]);
}

#[test]
fn cosine_examples() {
    let emb = transe(vec![1.0, 0.0, 0.0, 2.0, -3.0, 0.0, 0.0, 0.0], vec![0.0, 0.0], 2);
    let row = emb.cosine_row(EntityId(0)).unwrap();
    assert!((row[0] - 1.0).abs() < 1e-12);
    assert!(row[1].abs() < 1e-12);
    assert!((row[2] + 1.0).abs() < 1e-12);
    assert_eq!(row[3], 0.0);
    assert_eq!(emb.cosine_row(EntityId(3)), Err(ModelError::ZeroRow(3)));
}

#[test]
fn score_all_matches_score() {
    for kind in [ModelKind::TransE, ModelKind::Rescal] {
        for norm in [Norm::L1, Norm::L2] {
            let emb = EmbeddingStore::<f64>::init(kind, norm, 12, 3, 5, 3);
            let t = Triple::new(4, 2, 9);
            let mut out = Vec::new();
            for side in [Side::Head, Side::Tail] {
                emb.score_all(&t, side, &mut out);
                for e in 0..12 {
                    let direct = emb.score(&t.with_entity(side, EntityId(e)));
                    assert!((out[e as usize] - direct).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn checkpoint_roundtrip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for kind in [ModelKind::TransE, ModelKind::Rescal] {
        let emb = EmbeddingStore::<f64>::init(kind, Norm::L2, 9, 2, 4, 11);
        let p = dir.path().join("ckpt.bin");
        write_checkpoint(&p, &emb).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[0..4], b"KBCE");
        assert_eq!(bytes.len(), 40 + 8 * (9 * 4 + 2 * emb.relation_len()));
        let back: EmbeddingStore<f64> = read_checkpoint(&p).unwrap();
        assert_eq!(back, emb);
        let narrow: EmbeddingStore<f32> = read_checkpoint(&p).unwrap();
        assert_eq!(narrow.kind(), kind);
    }
    std::fs::write(dir.path().join("junk"), b"nope").unwrap();
    assert!(matches!(
        read_checkpoint::<f64>(dir.path().join("junk")),
        Err(CheckpointError::BadMagic(_))
    ));
}

#[test]
fn text_export_lines() {
    let emb = transe(vec![1.0, 0.5, 0.0, -2.0], vec![0.0, 0.0], 2);
    let names = crate::kg::Interner::from_names(["x", "y"]).unwrap();
    let mut out = Vec::new();
    write_text_export(&mut out, &emb, &names).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "x\t1 0.5\ny\t0 -2\n");
}

proptest! {
    #[test]
    fn cosine_bounded(seed in any::<u64>(), q in 0u32..20) {
        let emb = EmbeddingStore::<f64>::init(ModelKind::Rescal, Norm::L1, 20, 1, 6, seed);
        let row = emb.cosine_row(EntityId(q)).unwrap();
        prop_assert!(row.iter().all(|c| (-1.0 - 1e-12..=1.0 + 1e-12).contains(c)));
        prop_assert_eq!(row[q as usize], 1.0);
    }

    #[test]
    fn scores_invariant_under_entity_relabeling(seed in any::<u64>(), kind_bit in any::<bool>()) {
        let kind = if kind_bit { ModelKind::TransE } else { ModelKind::Rescal };
        let n = 8;
        let emb = EmbeddingStore::<f64>::init(kind, Norm::L1, n, 2, 4, seed);
        // reversed ids
        let perm: Vec<u32> = (0..n as u32).rev().collect();
        let d = emb.dim();
        let mut ents = vec![0.0; n * d];
        for (old, &new) in perm.iter().enumerate() {
            ents[new as usize * d..(new as usize + 1) * d].copy_from_slice(emb.entity(EntityId(old as u32)));
        }
        let moved = EmbeddingStore::from_parts(kind, Norm::L1, d, ents, emb.relation_params().to_vec());
        for h in 0..n as u32 {
            for t in 0..n as u32 {
                let a = emb.score(&Triple::new(h, 1, t));
                let b = moved.score(&Triple::new(perm[h as usize], 1, perm[t as usize]));
                prop_assert_eq!(a, b);
            }
        }
    }
}
