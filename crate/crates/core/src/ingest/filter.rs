use super::corpus::{Corpus, Document, Token};
use super::triples::{Triple, TripleStore};
use super::vocab::{Namespace, Vocabulary, UNK, UNK_ID};

/// Minimum frequencies below which symbols are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Thresholds {
    pub entity_min: u64,
    pub relation_min: u64,
    pub word_min: u64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            entity_min: 10,
            relation_min: 5,
            word_min: 10,
        }
    }
}

impl Thresholds {
    pub const NONE: Thresholds = Thresholds {
        entity_min: 0,
        relation_min: 0,
        word_min: 0,
    };
}

#[derive(Debug, Clone)]
pub struct Filtered {
    pub store: TripleStore,
    pub corpus: Corpus,
    pub vocab: Vocabulary,
}

/// Keeps the ids whose recorded frequency passes `min`, in id order.
/// Returns the new namespace and the old→new id map.
fn keep_frequent(ns: &Namespace, min: u64) -> (Namespace, Vec<Option<u32>>) {
    let mut out = Namespace::default();
    let remap = (0..ns.len() as u32)
        .map(|id| {
            (ns.frequency(id) >= min).then(|| out.push_with_frequency(ns.name(id), ns.frequency(id)))
        })
        .collect();
    (out, remap)
}

/// Single-pass frequency filter.
///
/// Decisions use the frequencies recorded in `vocab` at load time, so the
/// removal of a triple never lowers another symbol's frequency and a second
/// application with the same thresholds changes nothing. KB entities and
/// relations below their threshold are dropped together with every triple
/// that mentions them; rare words collapse onto [`UNK`]. Text entities are
/// kept unconditionally.
pub fn apply_frequency_filters(
    store: &TripleStore,
    corpus: &Corpus,
    vocab: &Vocabulary,
    thresholds: Thresholds,
) -> Filtered {
    let (kb_entities, ent_map) = keep_frequent(&vocab.kb_entities, thresholds.entity_min);
    let (relations, rel_map) = keep_frequent(&vocab.relations, thresholds.relation_min);

    let store = store
        .triples()
        .iter()
        .filter_map(|t| {
            Some(Triple::new(
                ent_map[t.h as usize]?,
                rel_map[t.r as usize]?,
                ent_map[t.t as usize]?,
            ))
        })
        .collect();

    let mut words = Namespace::default();
    words.push_with_frequency(UNK, vocab.words.frequency(UNK_ID));
    let word_map: Vec<u32> = (0..vocab.words.len() as u32)
        .map(|id| {
            let freq = vocab.words.frequency(id);
            if id == UNK_ID {
                UNK_ID
            } else if freq >= thresholds.word_min {
                words.push_with_frequency(vocab.words.name(id), freq)
            } else {
                words.bump(UNK_ID, freq);
                UNK_ID
            }
        })
        .collect();

    let corpus = Corpus {
        documents: corpus
            .documents
            .iter()
            .map(|d| Document {
                page: d.page,
                tokens: d
                    .tokens
                    .iter()
                    .map(|t| match *t {
                        Token::Word(w) => Token::Word(word_map[w as usize]),
                        anchor => anchor,
                    })
                    .collect(),
            })
            .collect(),
    };

    Filtered {
        store,
        corpus,
        vocab: Vocabulary {
            words,
            text_entities: vocab.text_entities.clone(),
            kb_entities,
            relations,
        },
    }
}
