//! Synthetic knowledge bases with planted type structure, for tests,
//! benchmarks and smoke runs.
//!
//! Entities are split into `types` equal groups, each further split into
//! `subgroups` blocks. Relation `r` links type `r % types` to type
//! `(r + 1) % types`, and a head in block `s` only ever links to tails in
//! block `(s + r) % subgroups` of the target type. Triples are drawn
//! uniformly from the allowed pairs without replacement.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::kg::{Interner, Split, Triple, TripleStore, Vocabulary};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedConfig {
    pub entities: usize,
    pub relations: usize,
    pub triples: usize,
    pub types: usize,
    pub subgroups: usize,
    /// Fractions of the triples held out for validation and test.
    pub valid_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            entities: 500,
            relations: 5,
            triples: 5000,
            types: 5,
            subgroups: 5,
            valid_fraction: 0.1,
            test_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticKb {
    pub vocab: Vocabulary,
    pub train: TripleStore,
    pub valid: TripleStore,
    pub test: TripleStore,
    /// Type index of every entity.
    pub entity_type: Vec<usize>,
    /// Block index (within its type) of every entity.
    pub entity_block: Vec<usize>,
}

impl SyntheticKb {
    pub fn num_entities(&self) -> usize {
        self.vocab.num_entities()
    }

    pub fn num_relations(&self) -> usize {
        self.vocab.num_relations()
    }

    /// Writes `train.txt`, `valid.txt`, `test.txt`, `entities.dict` and
    /// `relations.dict` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        let name = |i: &Interner, id: u32| i.name(id).unwrap_or_default().to_owned();
        for store in [&self.train, &self.valid, &self.test] {
            let mut s = String::new();
            for t in store.triples() {
                let _ = writeln!(
                    s,
                    "{}\t{}\t{}",
                    name(&self.vocab.entities, t.head.0),
                    name(&self.vocab.relations, t.relation.0),
                    name(&self.vocab.entities, t.tail.0)
                );
            }
            std::fs::write(dir.join(format!("{}.txt", store.split().as_str())), s)?;
        }
        for (file, names) in [
            ("entities.dict", &self.vocab.entities),
            ("relations.dict", &self.vocab.relations),
        ] {
            let s: String = names
                .names()
                .iter()
                .enumerate()
                .map(|(i, n)| format!("{n}\t{i}\n"))
                .collect();
            std::fs::write(dir.join(file), s)?;
        }
        Ok(())
    }
}

pub fn planted(cfg: &PlantedConfig) -> SyntheticKb {
    assert!(cfg.types >= 1 && cfg.subgroups >= 1);
    assert!(cfg.entities >= cfg.types * cfg.subgroups, "every block needs an entity");
    let mut vocab = Vocabulary::new();
    for e in 0..cfg.entities {
        vocab.entities.intern(&format!("e{e}"));
    }
    for r in 0..cfg.relations {
        vocab.relations.intern(&format!("r{r}"));
    }
    let entity_type: Vec<usize> = (0..cfg.entities).map(|e| e * cfg.types / cfg.entities).collect();
    let members: Vec<Vec<usize>> = (0..cfg.types)
        .map(|ty| (0..cfg.entities).filter(|&e| entity_type[e] == ty).collect())
        .collect();
    let mut entity_block = vec![0; cfg.entities];
    for group in &members {
        for (i, &e) in group.iter().enumerate() {
            entity_block[e] = i * cfg.subgroups / group.len();
        }
    }
    let block_members = |ty: usize, block: usize| -> Vec<usize> {
        members[ty]
            .iter()
            .copied()
            .filter(|&e| entity_block[e] == block)
            .collect()
    };

    let mut allowed: Vec<Triple> = Vec::new();
    for r in 0..cfg.relations {
        let (src, dst) = (r % cfg.types, (r + 1) % cfg.types);
        for &h in &members[src] {
            let target = (entity_block[h] + r) % cfg.subgroups;
            for t in block_members(dst, target) {
                allowed.push(Triple::new(h as u32, r as u32, t as u32));
            }
        }
    }
    let mut rng = stream(cfg.seed, &[0x5E7]);
    allowed.shuffle(&mut rng);
    allowed.truncate(cfg.triples);

    let n = allowed.len();
    let n_valid = (n as f64 * cfg.valid_fraction).round() as usize;
    let n_test = (n as f64 * cfg.test_fraction).round() as usize;
    let test = allowed.split_off(n - n_test);
    let valid = allowed.split_off(n - n_test - n_valid);
    SyntheticKb {
        vocab,
        train: TripleStore::from_triples(Split::Train, allowed),
        valid: TripleStore::from_triples(Split::Valid, valid),
        test: TripleStore::from_triples(Split::Test, test),
        entity_type,
        entity_block,
    }
}

/// Uniform random triples over small vocabularies, deduplicated.
pub fn random_kb<R: Rng + ?Sized>(
    entities: usize,
    relations: usize,
    triples: usize,
    rng: &mut R,
) -> Vec<Triple> {
    let cap = entities * entities * relations;
    let target = triples.min(cap);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(target);
    while out.len() < target {
        let t = Triple::new(
            rng.random_range(0..entities as u32),
            rng.random_range(0..relations as u32),
            rng.random_range(0..entities as u32),
        );
        if seen.insert(t) {
            out.push(t);
        }
    }
    out
}

/// Keeps a seeded fraction of `store`'s triples.
pub fn subsample(store: &TripleStore, fraction: f64, seed: u64) -> TripleStore {
    let mut triples = store.triples().to_vec();
    triples.shuffle(&mut stream(seed, &[0x5AB]));
    triples.truncate((triples.len() as f64 * fraction).round() as usize);
    TripleStore::from_triples(store.split(), triples)
}
