//! Knowledge-base storage: vocabularies, triple membership and the relation
//! statistics used to pick which side of a triple to corrupt.

mod bernoulli;
mod io;
mod store;
mod vocab;

pub use bernoulli::{BernoulliStats, RelationStats};
pub use io::{load_dictionary, load_split, load_split_from_reader, UnseenPolicy, VocabMode};
pub use store::{Split, TripleStore};
pub use vocab::{Interner, Vocabulary};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A fact `(head, relation, tail)` over dense ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: u32, relation: u32, tail: u32) -> Self {
        Self {
            head: EntityId(head),
            relation: RelationId(relation),
            tail: EntityId(tail),
        }
    }

    /// The entity sitting in `side`.
    pub fn entity(&self, side: Side) -> EntityId {
        match side {
            Side::Head => self.head,
            Side::Tail => self.tail,
        }
    }

    /// Copy of this triple with the entity in `side` replaced.
    pub fn with_entity(&self, side: Side, e: EntityId) -> Self {
        match side {
            Side::Head => Self { head: e, ..*self },
            Side::Tail => Self { tail: e, ..*self },
        }
    }
}

/// Which entity slot of a triple is replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Head,
    Tail,
}

#[derive(Debug, Error)]
pub enum KgError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}:{line}: unknown {kind} `{name}` under a frozen vocabulary")]
    UnseenName {
        path: String,
        line: usize,
        kind: &'static str,
        name: String,
    },
    #[error("relation {0} has no occurrences in the statistics source")]
    UnknownRelation(u32),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
