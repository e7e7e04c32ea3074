//! Joint knowledge-base and text embeddings.
//!
//! A TransE model over KB triples and a skip-gram model over an anchored
//! corpus are trained alternately and coupled by one of four alignment
//! methods. Evaluation covers few-shot link prediction and analogical
//! reasoning.

pub mod alignment;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod kbe;
pub mod seeds;
pub mod skipgram;
pub mod space;
pub mod trainer;

pub use error::{Error, Result};
