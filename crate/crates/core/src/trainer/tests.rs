use super::*;
use crate::kg::Split;
use crate::sampler::NegativeEntry;
use crate::synth::{planted, PlantedConfig};

#[test]
fn hinge_examples() {
    assert_eq!(hinge(5.0, 1.0, 1.0), 0.0);
    assert!((hinge(0.5f64, 0.2, 1.0) - 0.7).abs() < 1e-15);
    for g in [0.1, 1.0, 7.5] {
        assert!((hinge(0.3f64, 0.3, g) - g).abs() < 1e-15);
    }
}

#[test]
fn config_validation() {
    let mut cfg = TrainConfig::<f64>::for_model(ModelKind::Rescal);
    assert!(cfg.validate().is_ok());
    assert_eq!((cfg.dim, cfg.margin), (200, 5.0));
    let te = TrainConfig::<f64>::for_model(ModelKind::TransE);
    assert_eq!((te.dim, te.margin, te.max_epochs, te.patience), (100, 10.0, 1000, 20));
    cfg.max_epochs = 0;
    assert!(matches!(cfg.validate(), Err(TrainError::Config(_))));
    cfg.max_epochs = 1;
    cfg.margin = 0.0;
    assert!(cfg.validate().is_err());
    cfg.margin = 1.0;
    cfg.patience = 0;
    assert!(cfg.validate().is_err());
}

#[test]
fn early_stopping_on_decreasing_metric() {
    let mut s = EarlyStopping::new(1);
    assert_eq!(s.observe(0.5), StopDecision::Improved);
    assert_eq!(s.observe(0.4), StopDecision::Stop);
    let mut s = EarlyStopping::new(3);
    assert_eq!(s.observe(0.5), StopDecision::Improved);
    assert_eq!(s.observe(0.5), StopDecision::Continue);
    assert_eq!(s.observe(0.6), StopDecision::Improved);
    assert_eq!(s.observe(0.1), StopDecision::Continue);
    assert_eq!(s.observe(0.1), StopDecision::Continue);
    assert_eq!(s.observe(0.1), StopDecision::Stop);
    assert_eq!(s.best(), Some(0.6));
}

fn two_pair_store() -> EmbeddingStore<f64> {
    // d = 2: e0 = (1, 0), e1 = (0, 0), e2 = (0, 1), w0 = (0, 1)
    EmbeddingStore::from_parts(
        ModelKind::TransE,
        Norm::L1,
        2,
        vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        vec![0.0, 1.0],
    )
}

fn single(neg: Triple) -> NegativeBatch {
    NegativeBatch {
        entries: vec![NegativeEntry {
            index: 0,
            side: Side::Tail,
            negatives: vec![neg],
        }],
        fallbacks: 0,
    }
}

use crate::kg::Side;

#[test]
fn satisfied_margins_leave_parameters_alone() {
    let mut emb = two_pair_store();
    let before = emb.clone();
    let mut adam = AdamState::new(AdamHyper::default(), &emb);
    let mut cfg = TrainConfig::for_model(ModelKind::TransE);
    cfg.margin = 0.5;
    // f(0,0,2) = -1, f(0,0,1) = -2: gap 1 >= 0.5
    let pos = Triple::new(0, 0, 2);
    let st = train_batch(&[pos], &single(Triple::new(0, 0, 1)), &mut emb, &mut adam, &cfg).unwrap();
    assert_eq!(st.loss, 0.0);
    assert!(!st.updated);
    assert_eq!(emb, before);
    assert_eq!(adam.step(), 0);
}

#[test]
fn single_pair_loss_is_hinge_of_scores() {
    let mut emb = two_pair_store();
    let mut adam = AdamState::new(AdamHyper::default(), &emb);
    let cfg = TrainConfig::<f64>::for_model(ModelKind::TransE);
    let pos = Triple::new(0, 0, 1);
    let neg = Triple::new(0, 0, 2);
    let expected = hinge(emb.score(&pos), emb.score(&neg), cfg.margin);
    // f(pos) = -2, f(neg) = -(1 + 0) = -1 -> 10 - 1 + 2
    assert_eq!(expected, 11.0);
    let st = train_batch(&[pos], &single(neg), &mut emb, &mut adam, &cfg).unwrap();
    assert_eq!(st.loss, expected);
    assert!(st.updated);
    assert_eq!(adam.step(), 1);
    // TransE rows touched by the update are renormalized; e1 was zero and stays counted
    assert!((crate::scalar::l2_norm(emb.entity(EntityId(2))) - 1.0).abs() < 1e-12);
}

#[test]
fn empty_negative_sets_do_nothing() {
    let mut emb = two_pair_store();
    let before = emb.clone();
    let mut adam = AdamState::new(AdamHyper::default(), &emb);
    let cfg = TrainConfig::<f64>::for_model(ModelKind::TransE);
    let nb = NegativeBatch {
        entries: vec![NegativeEntry {
            index: 0,
            side: Side::Head,
            negatives: vec![],
        }],
        fallbacks: 0,
    };
    let st = train_batch(&[Triple::new(0, 0, 1)], &nb, &mut emb, &mut adam, &cfg).unwrap();
    assert_eq!((st.loss, st.pairs, st.updated), (0.0, 0, false));
    assert_eq!(emb, before);
}

fn toy_kb() -> crate::synth::SyntheticKb {
    planted(&PlantedConfig {
        entities: 20,
        relations: 1,
        triples: 100,
        types: 2,
        subgroups: 1,
        valid_fraction: 0.1,
        test_fraction: 0.1,
        seed: 3,
    })
}

fn toy_cfg(model: ModelKind, sampler: SamplerKind) -> TrainConfig<f64> {
    let mut cfg = TrainConfig::for_model(model);
    cfg.dim = 8;
    cfg.margin = 1.0;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 30;
    cfg.patience = 30;
    cfg.sampler = sampler;
    cfg.seed = 5;
    cfg
}

#[test]
fn toy_training_learns_planted_structure() {
    let kb = toy_kb();
    let filter = FilterSet::new([&kb.train, &kb.valid, &kb.test]);
    let data = TrainingData {
        train: &kb.train,
        valid: &kb.valid,
        filter: &filter,
        num_entities: kb.num_entities(),
        num_relations: kb.num_relations(),
    };
    for model in [ModelKind::TransE, ModelKind::Rescal] {
        for sampler in [
            SamplerKind::Rns { negatives: 4 },
            SamplerKind::Dns { mode: DnsMode::Exact, cap: None },
        ] {
            let res = fit(&data, &toy_cfg(model, sampler), &mut Silent).unwrap();
            let first = res.reports.first().unwrap().mean_loss;
            let last = res.reports.last().unwrap().mean_loss;
            assert!(last < first, "{model:?} {sampler:?}: {first} -> {last}");
            let best = res.best_mrr.unwrap();
            assert!(best > 2.0 / 20.0, "{model:?} {sampler:?}: MRR {best}");
            let final_mrr = res.reports.last().unwrap().valid.unwrap().mrr;
            assert!(best >= final_mrr);
        }
    }
}

#[test]
fn fit_is_deterministic() {
    let kb = toy_kb();
    let filter = FilterSet::new([&kb.train, &kb.valid]);
    let data = TrainingData {
        train: &kb.train,
        valid: &kb.valid,
        filter: &filter,
        num_entities: kb.num_entities(),
        num_relations: kb.num_relations(),
    };
    let cfg = toy_cfg(ModelKind::TransE, SamplerKind::Dns { mode: DnsMode::Exact, cap: Some(3) });
    let a = fit(&data, &cfg, &mut Silent).unwrap();
    let b = fit(&data, &cfg, &mut Silent).unwrap();
    assert_eq!(a.best, b.best);
    let strip = |r: &[EpochReport]| r.iter().map(|e| serde_json::to_string(e).unwrap()).collect::<Vec<_>>();
    assert_eq!(strip(&a.reports), strip(&b.reports));
}

#[test]
fn empty_validation_returns_last_parameters() {
    let kb = toy_kb();
    let empty = TripleStore::from_triples(Split::Valid, []);
    let filter = FilterSet::new([&kb.train]);
    let data = TrainingData {
        train: &kb.train,
        valid: &empty,
        filter: &filter,
        num_entities: kb.num_entities(),
        num_relations: kb.num_relations(),
    };
    let mut cfg = toy_cfg(ModelKind::Rescal, SamplerKind::Rns { negatives: 1 });
    cfg.max_epochs = 3;
    let res = fit(&data, &cfg, &mut Silent).unwrap();
    assert_eq!(res.best_mrr, None);
    assert_eq!(res.best_epoch, 3);
    assert_eq!(res.best, res.last);
}
