//! Recall of the LSH index against an exact scan on random unit vectors.
//!
//! Usage: `cargo run --release --example lsh_recall -- [entities] [dim] [tables] [hyperplanes] [probes]`

use kbc_core::kg::EntityId;
use kbc_core::model::{ModelKind, Norm};
use kbc_core::sampler::{LshParams, SimilarityIndex};
use kbc_core::Embeddings;

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let get = |i: usize, d: usize| args.get(i).copied().unwrap_or(d);
    let (n, dim) = (get(0, 15_000), get(1, 100));
    let params = LshParams {
        tables: get(2, 16),
        hyperplanes: get(3, 12),
        probes: get(4, 64),
        seed: 1,
    };
    let emb = Embeddings::init(ModelKind::TransE, Norm::L1, n, 1, dim, 7);
    let start = std::time::Instant::now();
    let index = SimilarityIndex::build(&emb, params).expect("valid parameters");
    let built = start.elapsed();
    let start = std::time::Instant::now();
    let r = index.measure_recall(50, 1000, 3);
    let elapsed = start.elapsed();
    let _ = index.query(EntityId(0), 50);
    println!(
        "n={n} d={dim} T={} H={} probes={}: recall@50={:.3} candidates={:.0} ({:.1}% of n) build={:?} eval={:?}",
        params.tables,
        params.hyperplanes,
        params.probes,
        r.recall,
        r.mean_candidates,
        100.0 * r.mean_candidates / n as f64,
        built,
        elapsed
    );
}
