use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::vocab::Vocabulary;
use crate::error::{Error, Result};

/// Bijection between a subset of KB entities and a subset of text entities.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SupportSet {
    pairs: Vec<(u32, u32)>,
    kb_to_text: HashMap<u32, u32>,
    text_to_kb: HashMap<u32, u32>,
}

/// Counts of seed pairs that did not make it into the support set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SupportStats {
    /// Pairs reusing a KB or text entity already paired earlier.
    pub conflicts: usize,
    /// Pairs naming an entity absent from the (filtered) vocabulary.
    pub unknown: usize,
}

impl SupportSet {
    /// Builds a support set from `(kb, text)` pairs, dropping any pair that
    /// reuses either side of an earlier one. Returns the number dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, u32)>) -> (SupportSet, usize) {
        let mut set = SupportSet::default();
        let mut dropped = 0;
        for (k, e) in pairs {
            if !set.insert(k, e) {
                dropped += 1;
            }
        }
        (set, dropped)
    }

    fn insert(&mut self, kb: u32, text: u32) -> bool {
        if self.kb_to_text.contains_key(&kb) || self.text_to_kb.contains_key(&text) {
            return false;
        }
        self.pairs.push((kb, text));
        self.kb_to_text.insert(kb, text);
        self.text_to_kb.insert(text, kb);
        true
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn text_of(&self, kb: u32) -> Option<u32> {
        self.kb_to_text.get(&kb).copied()
    }

    pub fn kb_of(&self, text: u32) -> Option<u32> {
        self.text_to_kb.get(&text).copied()
    }

    pub fn contains_kb(&self, kb: u32) -> bool {
        self.kb_to_text.contains_key(&kb)
    }

    pub fn contains_text(&self, text: u32) -> bool {
        self.text_to_kb.contains_key(&text)
    }

    /// Reads a `kb_entity<TAB>text_entity` seed map, keeping pairs whose
    /// entities both exist in `vocab`.
    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<(SupportSet, SupportStats)> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut set = SupportSet::default();
        let mut stats = SupportStats::default();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [kb, text] = fields[..] else {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected 2 TAB-separated fields, found {}", fields.len()),
                ));
            };
            match (vocab.kb_entities.id(kb), vocab.text_entities.id(text)) {
                (Some(k), Some(e)) => {
                    if !set.insert(k, e) {
                        stats.conflicts += 1;
                    }
                }
                _ => stats.unknown += 1,
            }
        }
        if stats.conflicts > 0 {
            log::warn!(
                "{}: dropped {} seed pairs violating one-to-one mapping",
                path.display(),
                stats.conflicts
            );
        }
        Ok((set, stats))
    }

    pub fn write(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for &(k, e) in &self.pairs {
            writeln!(
                out,
                "{}\t{}",
                vocab.kb_entities.name(k),
                vocab.text_entities.name(e)
            )
            .map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}
