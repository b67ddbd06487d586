use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{Interner, KgError, Split, Triple, TripleStore, Vocabulary};

/// What to do with a name that is missing from a frozen vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnseenPolicy {
    #[default]
    Error,
    /// Drop the line and count it (`TripleStore::skipped`).
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VocabMode {
    /// Unseen names are appended to the vocabulary.
    Extend,
    Frozen(UnseenPolicy),
}

impl VocabMode {
    /// Training splits grow the vocabulary; evaluation splits never do.
    pub fn for_split(split: Split, unseen: UnseenPolicy) -> Self {
        match split {
            Split::Train => VocabMode::Extend,
            Split::Valid | Split::Test => VocabMode::Frozen(unseen),
        }
    }
}

/// Loads a `head<TAB>relation<TAB>tail` file.
pub fn load_split(
    path: impl AsRef<Path>,
    split: Split,
    vocab: &mut Vocabulary,
    mode: VocabMode,
) -> Result<TripleStore, KgError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| KgError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_split_from_reader(
        BufReader::new(file),
        &path.display().to_string(),
        split,
        vocab,
        mode,
    )
}

pub fn load_split_from_reader<R: BufRead>(
    reader: R,
    label: &str,
    split: Split,
    vocab: &mut Vocabulary,
    mode: VocabMode,
) -> Result<TripleStore, KgError> {
    let mut triples = Vec::new();
    let mut skipped = 0;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|source| KgError::Io {
            path: label.to_owned(),
            source,
        })?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [h, r, t] = fields[..] else {
            return Err(KgError::Parse {
                path: label.to_owned(),
                line: lineno,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        };
        let ids = match mode {
            VocabMode::Extend => Some((
                vocab.entities.intern(h),
                vocab.relations.intern(r),
                vocab.entities.intern(t),
            )),
            VocabMode::Frozen(policy) => {
                let lookup = [
                    ("entity", h, vocab.entities.get(h)),
                    ("relation", r, vocab.relations.get(r)),
                    ("entity", t, vocab.entities.get(t)),
                ];
                match lookup.iter().find(|(_, _, id)| id.is_none()) {
                    None => Some((
                        lookup[0].2.unwrap(),
                        lookup[1].2.unwrap(),
                        lookup[2].2.unwrap(),
                    )),
                    Some(&(kind, name, _)) => match policy {
                        UnseenPolicy::Skip => None,
                        UnseenPolicy::Error => {
                            return Err(KgError::UnseenName {
                                path: label.to_owned(),
                                line: lineno,
                                kind,
                                name: name.to_owned(),
                            })
                        }
                    },
                }
            }
        };
        match ids {
            Some((h, r, t)) => triples.push(Triple::new(h, r, t)),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{label}: skipped {skipped} triples with names outside the vocabulary");
    }
    let mut store = TripleStore::from_triples(split, triples);
    store.set_skipped(skipped);
    Ok(store)
}

/// Reads a `name<TAB>id` dictionary. Ids must cover `0..n` exactly once.
pub fn load_dictionary(path: impl AsRef<Path>) -> Result<Interner, KgError> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let io_err = |source| KgError::Io {
        path: label.clone(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut entries: Vec<(u32, String, usize)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| KgError::Parse {
            path: label.clone(),
            line: i + 1,
            msg,
        };
        let (name, id) = line
            .rsplit_once('\t')
            .ok_or_else(|| parse_err("expected `name<TAB>id`".into()))?;
        let id: u32 = id
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad id `{id}`: {e}")))?;
        entries.push((id, name.to_owned(), i + 1));
    }
    entries.sort_by_key(|e| e.0);
    for (expected, (id, _, line)) in entries.iter().enumerate() {
        if *id as usize != expected {
            return Err(KgError::Parse {
                path: label,
                line: *line,
                msg: format!("ids must be contiguous from 0; expected {expected}, found {id}"),
            });
        }
    }
    Interner::from_names(entries.into_iter().map(|e| e.1)).map_err(|msg| KgError::Parse {
        path: label,
        line: 0,
        msg,
    })
}
