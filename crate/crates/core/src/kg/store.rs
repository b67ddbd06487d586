use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{EntityId, RelationId, Side, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// A deduplicated list of triples with constant-time membership and sorted
/// per-slot neighbor lists (`(h, r) -> tails`, `(r, t) -> heads`).
///
/// Immutable once built.
#[derive(Debug, Clone)]
pub struct TripleStore {
    split: Split,
    triples: Vec<Triple>,
    members: HashSet<Triple>,
    tails: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    heads: HashMap<(RelationId, EntityId), Vec<EntityId>>,
    duplicates: usize,
    skipped: usize,
}

impl TripleStore {
    /// Builds a store, keeping the first occurrence of each distinct triple.
    pub fn from_triples<I: IntoIterator<Item = Triple>>(split: Split, triples: I) -> Self {
        let mut members = HashSet::new();
        let mut kept = Vec::new();
        let mut duplicates = 0;
        for t in triples {
            if members.insert(t) {
                kept.push(t);
            } else {
                duplicates += 1;
            }
        }
        if duplicates > 0 {
            log::info!("{}: dropped {duplicates} duplicate triples", split.as_str());
        }
        let mut tails: HashMap<_, Vec<_>> = HashMap::new();
        let mut heads: HashMap<_, Vec<_>> = HashMap::new();
        for t in &kept {
            tails.entry((t.head, t.relation)).or_default().push(t.tail);
            heads.entry((t.relation, t.tail)).or_default().push(t.head);
        }
        for v in tails.values_mut().chain(heads.values_mut()) {
            v.sort_unstable();
        }
        Self {
            split,
            triples: kept,
            members,
            tails,
            heads,
            duplicates,
            skipped: 0,
        }
    }

    /// Union of several stores; the resulting split tag is taken from `split`.
    pub fn union<'a, I: IntoIterator<Item = &'a TripleStore>>(split: Split, stores: I) -> Self {
        let all: Vec<Triple> = stores
            .into_iter()
            .flat_map(|s| s.triples.iter().copied())
            .collect();
        Self::from_triples(split, all)
    }

    pub(crate) fn set_skipped(&mut self, skipped: usize) {
        self.skipped = skipped;
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Number of input lines dropped as exact duplicates.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    /// Number of input lines skipped for naming unknown entities/relations.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    #[inline]
    pub fn contains(&self, head: EntityId, relation: RelationId, tail: EntityId) -> bool {
        self.members.contains(&Triple {
            head,
            relation,
            tail,
        })
    }

    #[inline]
    pub fn contains_triple(&self, t: &Triple) -> bool {
        self.members.contains(t)
    }

    /// Sorted tails `t` with `(head, relation, t)` in the store.
    pub fn tails_of(&self, head: EntityId, relation: RelationId) -> &[EntityId] {
        self.tails
            .get(&(head, relation))
            .map_or(&[], Vec::as_slice)
    }

    /// Sorted heads `h` with `(h, relation, tail)` in the store.
    pub fn heads_of(&self, relation: RelationId, tail: EntityId) -> &[EntityId] {
        self.heads
            .get(&(relation, tail))
            .map_or(&[], Vec::as_slice)
    }

    /// Sorted entities `e` for which replacing `side` of `triple` with `e`
    /// yields a triple in the store.
    pub fn known_replacements(&self, triple: &Triple, side: Side) -> &[EntityId] {
        match side {
            Side::Tail => self.tails_of(triple.head, triple.relation),
            Side::Head => self.heads_of(triple.relation, triple.tail),
        }
    }

    /// Occurrence count per relation id, sized to `num_relations`.
    pub fn relation_counts(&self, num_relations: usize) -> Vec<usize> {
        let mut counts = vec![0; num_relations];
        for t in &self.triples {
            counts[t.relation.index()] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> TripleStore {
        TripleStore::from_triples(
            Split::Train,
            [Triple::new(0, 0, 1), Triple::new(0, 0, 2), Triple::new(3, 1, 1)],
        )
    }

    #[test]
    fn loaded_triples_are_members() {
        let s = toy();
        for t in s.triples() {
            assert!(s.contains_triple(t));
        }
        assert!(!s.contains(EntityId(2), RelationId(0), EntityId(1)));
    }

    #[test]
    fn duplicates_collapse() {
        let t = Triple::new(0, 0, 1);
        let s = TripleStore::from_triples(Split::Train, [t, t, t]);
        assert_eq!(s.len(), 1);
        assert_eq!(s.duplicates(), 2);
        let twice = TripleStore::union(Split::Train, [&s, &s]);
        assert_eq!(twice.len(), 1);
        assert!(twice.contains_triple(&t));
    }

    #[test]
    fn neighbor_lists_are_sorted() {
        let s = toy();
        assert_eq!(s.tails_of(EntityId(0), RelationId(0)), &[EntityId(1), EntityId(2)]);
        assert_eq!(s.heads_of(RelationId(1), EntityId(1)), &[EntityId(3)]);
        assert!(s.heads_of(RelationId(1), EntityId(2)).is_empty());
        assert_eq!(s.relation_counts(2).iter().sum::<usize>(), s.len());
    }
}
