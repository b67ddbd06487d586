//! DNS vs RNS on a planted-structure knowledge base.
//!
//! Usage: `cargo run --release --example compare_samplers -- <model> <dim> <rns-negatives> <epochs> <seeds> [lr] [margin] [cap]`

use kbc_core::eval::{evaluate, FilterSet};
use kbc_core::model::ModelKind;
use kbc_core::sampler::{DnsMode, SamplerKind};
use kbc_core::synth::{planted, PlantedConfig};
use kbc_core::trainer::{fit, Silent, TrainConfig, TrainingData};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_owned());
    let model = match arg(0, "rescal").as_str() {
        "transe" => ModelKind::TransE,
        _ => ModelKind::Rescal,
    };
    let dim: usize = arg(1, "50").parse().unwrap();
    let c: usize = arg(2, "10").parse().unwrap();
    let epochs: usize = arg(3, "100").parse().unwrap();
    let seeds: u64 = arg(4, "3").parse().unwrap();
    let lr: f64 = arg(5, "0.001").parse().unwrap();
    let margin: Option<f64> = args.get(6).map(|m| m.parse().unwrap());
    let cap: Option<usize> = args.get(7).map(|m| m.parse().unwrap());

    for seed in 0..seeds {
        let subgroups = std::env::var("SUBGROUPS").ok().map_or(5, |v| v.parse().unwrap());
        let kb = planted(&PlantedConfig {
            seed,
            subgroups,
            ..Default::default()
        });
        let filter = FilterSet::new([&kb.train, &kb.valid, &kb.test]);
        let data = TrainingData {
            train: &kb.train,
            valid: &kb.valid,
            filter: &filter,
            num_entities: kb.num_entities(),
            num_relations: kb.num_relations(),
        };
        for sampler in [
            SamplerKind::Rns { negatives: c },
            SamplerKind::Dns { mode: DnsMode::Exact, cap },
        ] {
            let mut cfg = TrainConfig::<f64>::for_model(model);
            cfg.dim = dim;
            cfg.learning_rate = lr;
            if let Some(m) = margin {
                cfg.margin = m;
            }
            cfg.max_epochs = epochs;
            cfg.batch_size = std::env::var("BATCH").ok().map_or(512, |v| v.parse().unwrap());
            cfg.sampler = sampler;
            cfg.seed = seed;
            let start = std::time::Instant::now();
            let res = fit(&data, &cfg, &mut Silent).unwrap();
            let curve: Vec<String> = res
                .reports
                .iter()
                .map(|r| format!("{:.3}", r.valid.map_or(0.0, |v| v.mrr)))
                .collect();
            let test = evaluate(&res.best, kb.test.triples(), &filter);
            println!(
                "seed {seed} {:?}: best {:.4} @ {} (test {:.4}) epochs {} |N| {:.1} time {:.1?}\n  {}",
                sampler,
                res.best_mrr.unwrap(),
                res.best_epoch,
                test.mrr,
                res.reports.len(),
                res.reports.last().unwrap().mean_negatives,
                start.elapsed(),
                curve.join(" ")
            );
        }
    }
}
