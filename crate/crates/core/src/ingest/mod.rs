//! Reading triples, corpora and seed maps; frequency filtering; the
//! support set and the few-shot train/test split.

mod corpus;
mod filter;
mod split;
mod support;
mod triples;
mod vocab;

pub use corpus::{Corpus, Document, Token};
pub use filter::{apply_frequency_filters, Filtered, Thresholds};
pub use split::{make_fewshot_split, restrict_to_support, FewShotSplit};
pub use support::{SupportSet, SupportStats};
pub use triples::{write_triples, Triple, TripleStore};
pub use vocab::{Namespace, Vocabulary, UNK, UNK_ID};
