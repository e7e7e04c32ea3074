use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Reserved word standing in for every word removed by the frequency filter.
pub const UNK: &str = "<unk>";
/// Id of [`UNK`]; it is registered first in every vocabulary.
pub const UNK_ID: u32 = 0;

/// One id namespace: dense ids `0..len`, their strings and frequencies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Namespace {
    names: Vec<String>,
    index: HashMap<String, u32>,
    freq: Vec<u64>,
}

impl Namespace {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn frequency(&self, id: u32) -> u64 {
        self.freq[id as usize]
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.freq
    }

    /// Returns the id of `name`, registering it with frequency 0 if new.
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        self.freq.push(0);
        id
    }

    pub fn bump(&mut self, id: u32, by: u64) {
        self.freq[id as usize] += by;
    }

    pub(crate) fn push_with_frequency(&mut self, name: &str, freq: u64) -> u32 {
        let id = self.intern(name);
        self.freq[id as usize] = freq;
        id
    }

    fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (name, freq) in self.names.iter().zip(&self.freq) {
            writeln!(out, "{name}\t{freq}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut ns = Namespace::default();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let (name, freq) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected `name<TAB>frequency`"))?;
            let freq = freq
                .parse::<u64>()
                .map_err(|_| Error::parse(path, i + 1, format!("bad frequency `{freq}`")))?;
            if ns.id(name).is_some() {
                return Err(Error::parse(path, i + 1, format!("duplicate entry `{name}`")));
            }
            ns.push_with_frequency(name, freq);
        }
        Ok(ns)
    }
}

/// Symbol tables for the four namespaces shared by the KB and the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub words: Namespace,
    pub text_entities: Namespace,
    pub kb_entities: Namespace,
    pub relations: Namespace,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

const FILES: [&str; 4] = [
    "words.tsv",
    "text_entities.tsv",
    "kb_entities.tsv",
    "relations.tsv",
];

impl Vocabulary {
    pub fn new() -> Self {
        let mut words = Namespace::default();
        words.intern(UNK);
        Vocabulary {
            words,
            text_entities: Namespace::default(),
            kb_entities: Namespace::default(),
            relations: Namespace::default(),
        }
    }

    /// Writes one `name<TAB>frequency` file per namespace into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        let tables = [
            &self.words,
            &self.text_entities,
            &self.kb_entities,
            &self.relations,
        ];
        for (ns, file) in tables.into_iter().zip(FILES) {
            ns.write(&dir.join(file))?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let words = Namespace::read(&dir.join(FILES[0]))?;
        if words.id(UNK) != Some(UNK_ID) {
            return Err(Error::Invariant(format!(
                "{}: first word must be `{UNK}`",
                dir.join(FILES[0]).display()
            )));
        }
        Ok(Vocabulary {
            words,
            text_entities: Namespace::read(&dir.join(FILES[1]))?,
            kb_entities: Namespace::read(&dir.join(FILES[2]))?,
            relations: Namespace::read(&dir.join(FILES[3]))?,
        })
    }
}
