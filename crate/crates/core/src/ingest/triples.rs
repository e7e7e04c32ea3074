use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::vocab::Vocabulary;
use crate::error::{Error, Result};

/// A KB fact `(h, r, t)` over KB-entity and relation ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub h: u32,
    pub r: u32,
    pub t: u32,
}

impl Triple {
    pub fn new(h: u32, r: u32, t: u32) -> Self {
        Triple { h, r, t }
    }

    /// Ordering key used when a deterministic "lowest" triple is needed.
    pub fn rht_key(&self) -> (u32, u32, u32) {
        (self.r, self.h, self.t)
    }

    pub fn touches(&self, e: u32) -> bool {
        self.h == e || self.t == e
    }
}

/// Deduplicated set of triples with lookup indexes.
///
/// Triples keep their insertion order. The store is append-only and every
/// index is updated on insert.
#[derive(Debug, Clone, Default)]
pub struct TripleStore {
    triples: Vec<Triple>,
    members: HashSet<Triple>,
    by_head_rel: BTreeMap<(u32, u32), BTreeSet<u32>>,
    by_tail_rel: BTreeMap<(u32, u32), BTreeSet<u32>>,
    by_entity: BTreeMap<u32, Vec<usize>>,
}

impl PartialEq for TripleStore {
    fn eq(&self, other: &Self) -> bool {
        self.triples == other.triples
    }
}

impl Eq for TripleStore {}

impl FromIterator<Triple> for TripleStore {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        let mut store = TripleStore::default();
        for t in iter {
            store.insert(t);
        }
        store
    }
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `t` unless already present; returns whether it was new.
    pub fn insert(&mut self, t: Triple) -> bool {
        if !self.members.insert(t) {
            return false;
        }
        let idx = self.triples.len();
        self.triples.push(t);
        self.by_head_rel.entry((t.h, t.r)).or_default().insert(t.t);
        self.by_tail_rel.entry((t.r, t.t)).or_default().insert(t.h);
        self.by_entity.entry(t.h).or_default().push(idx);
        if t.t != t.h {
            self.by_entity.entry(t.t).or_default().push(idx);
        }
        true
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.members.contains(t)
    }

    /// Tails `t` with `(h, r, t)` in the store.
    pub fn tails(&self, h: u32, r: u32) -> impl Iterator<Item = u32> + '_ {
        self.by_head_rel.get(&(h, r)).into_iter().flatten().copied()
    }

    /// Heads `h` with `(h, r, t)` in the store.
    pub fn heads(&self, r: u32, t: u32) -> impl Iterator<Item = u32> + '_ {
        self.by_tail_rel.get(&(r, t)).into_iter().flatten().copied()
    }

    /// Triples incident to entity `e` (as head or tail), in insertion order.
    pub fn incident(&self, e: u32) -> impl Iterator<Item = &Triple> + '_ {
        self.by_entity
            .get(&e)
            .into_iter()
            .flatten()
            .map(move |&i| &self.triples[i])
    }

    /// Undirected incidence count of `e`.
    pub fn degree(&self, e: u32) -> usize {
        self.by_entity.get(&e).map_or(0, Vec::len)
    }

    /// Keeps only triples satisfying `keep`, preserving order.
    pub fn retain(&self, mut keep: impl FnMut(&Triple) -> bool) -> TripleStore {
        self.triples.iter().copied().filter(|t| keep(t)).collect()
    }

    /// Loads a TAB-separated triples file, registering unseen names in
    /// `vocab` and counting KB-entity incidence and relation frequency for
    /// every newly inserted triple.
    pub fn load(path: &Path, vocab: &mut Vocabulary) -> Result<TripleStore> {
        let mut store = TripleStore::new();
        for_each_line(path, |_, [h, r, t]| {
            let h = vocab.kb_entities.intern(h);
            let r = vocab.relations.intern(r);
            let t = vocab.kb_entities.intern(t);
            if store.insert(Triple::new(h, r, t)) {
                vocab.kb_entities.bump(h, 1);
                vocab.kb_entities.bump(t, 1);
                vocab.relations.bump(r, 1);
            }
            Ok(())
        })?;
        Ok(store)
    }

    /// Loads a triples file whose names must already exist in `vocab`.
    /// Frequencies are left untouched.
    pub fn load_known(path: &Path, vocab: &Vocabulary) -> Result<TripleStore> {
        let mut store = TripleStore::new();
        for_each_line(path, |line_no, [h, r, t]| {
            let lookup = |ns: &super::vocab::Namespace, name: &str, what: &str| {
                ns.id(name).ok_or_else(|| {
                    Error::Mismatch(format!(
                        "{}:{line_no}: unknown {what} `{name}`",
                        path.display()
                    ))
                })
            };
            let triple = Triple::new(
                lookup(&vocab.kb_entities, h, "entity")?,
                lookup(&vocab.relations, r, "relation")?,
                lookup(&vocab.kb_entities, t, "entity")?,
            );
            store.insert(triple);
            Ok(())
        })?;
        Ok(store)
    }

    pub fn write(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        write_triples(path, &self.triples, vocab)
    }
}

/// Writes triples as `head<TAB>relation<TAB>tail` lines.
pub fn write_triples(path: &Path, triples: &[Triple], vocab: &Vocabulary) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for t in triples {
        writeln!(
            out,
            "{}\t{}\t{}",
            vocab.kb_entities.name(t.h),
            vocab.relations.name(t.r),
            vocab.kb_entities.name(t.t)
        )
        .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a triples file and hands each non-comment line's three fields to `f`.
fn for_each_line(
    path: &Path,
    mut f: impl FnMut(usize, [&str; 3]) -> Result<()>,
) -> Result<()> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line_no = i + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields[..] {
            [h, r, t] if !h.is_empty() && !r.is_empty() && !t.is_empty() => {
                f(line_no, [h, r, t])?
            }
            [_, _, _] => return Err(Error::parse(path, line_no, "empty field")),
            _ => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("expected 3 TAB-separated fields, found {}", fields.len()),
                ))
            }
        }
    }
    Ok(())
}
