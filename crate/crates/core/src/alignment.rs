//! Couplings between the KB space and the text space, and the combined
//! objective `L = L_KB + L_SG + λ·L_align`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::{SupportSet, TripleStore};
use crate::kbe::{Fact, Slot};
use crate::skipgram::{draw_negatives, negative_sampling_loss, NoiseDistribution};
use crate::space::{EmbeddingSpace, Gradients, ParamKey, SharedBinding, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum AlignMethod {
    /// Independent KB and text models.
    #[default]
    None,
    /// Support entities share one row between the two models.
    SameEmbedding,
    /// Affine map from text entity rows onto KB entity rows.
    Projection,
    /// Name-graph facts scored with text entity rows.
    EntityName,
    /// KB rows predict the words around their anchors.
    Anchors,
}

impl AlignMethod {
    pub const ALL: [AlignMethod; 5] = [
        AlignMethod::None,
        AlignMethod::SameEmbedding,
        AlignMethod::Projection,
        AlignMethod::EntityName,
        AlignMethod::Anchors,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlignMethod::None => "none",
            AlignMethod::SameEmbedding => "same_embedding",
            AlignMethod::Projection => "projection",
            AlignMethod::EntityName => "entity_name",
            AlignMethod::Anchors => "anchors",
        }
    }

    /// Methods with a separate alignment loss term.
    pub fn has_align_loss(self) -> bool {
        matches!(
            self,
            AlignMethod::Projection | AlignMethod::EntityName | AlignMethod::Anchors
        )
    }
}

impl FromStr for AlignMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlignMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown alignment method `{s}` (expected none, same_embedding, projection, entity_name or anchors)"
                ))
            })
    }
}

impl fmt::Display for AlignMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentConfig {
    pub method: AlignMethod,
    pub lambda: f64,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            method: AlignMethod::None,
            lambda: 1.0,
        }
    }
}

impl AlignmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// `W` (row-major, `dim × dim`) and `b` of the text-to-KB projection.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMap {
    pub dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl ProjectionMap {
    pub fn from_space(space: &EmbeddingSpace) -> Self {
        ProjectionMap {
            dim: space.dim(),
            w: space.table(Table::ProjW).to_vec(),
            b: space.table(Table::ProjB).to_vec(),
        }
    }

    /// `W x + b`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.w
            .chunks(self.dim)
            .zip(&self.b)
            .map(|(row, b)| row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }
}

/// Parameter-sharing map making each support entity's text input row the
/// same storage cell as its KB row.
pub fn bind_shared_embeddings(support: &SupportSet) -> SharedBinding {
    SharedBinding::new(support.pairs().iter().copied())
}

/// `‖W s + b − k‖²` for one support pair (`kb`, `text`), accumulating
/// `scale ×` its gradient with respect to `W`, `b`, the text input row and
/// the KB row. Returns the unscaled loss.
pub fn projection_pair_loss(
    space: &EmbeddingSpace,
    kb: u32,
    text: u32,
    scale: f64,
    grads: &mut Gradients,
) -> f64 {
    let dim = space.dim();
    let sk = ParamKey {
        table: Table::EntityIn,
        row: text,
    };
    let kk = ParamKey {
        table: Table::KbEntity,
        row: kb,
    };
    let mut s = vec![0.0; dim];
    let mut k = vec![0.0; dim];
    space.read(sk, &mut s);
    space.read(kk, &mut k);
    let w = space.table(Table::ProjW);
    let b = space.table(Table::ProjB);

    let mut wrow = vec![0.0; dim];
    let mut res = vec![0.0; dim];
    let mut ds = vec![0.0; dim];
    for i in 0..dim {
        w.read_row(i, &mut wrow);
        res[i] = wrow.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() + b.get(0, i) - k[i];
        for (d, wij) in ds.iter_mut().zip(&wrow) {
            *d += 2.0 * res[i] * wij;
        }
    }
    for i in 0..dim {
        let key = ParamKey {
            table: Table::ProjW,
            row: i as u32,
        };
        grads.add(key, scale * 2.0 * res[i], &s);
    }
    let brow = ParamKey {
        table: Table::ProjB,
        row: 0,
    };
    grads.add(brow, scale * 2.0, &res);
    grads.add(sk, scale, &ds);
    grads.add(kk, -2.0 * scale, &res);
    res.iter().map(|r| r * r).sum()
}

/// Summed projection loss over the support set and its exact gradient.
pub fn projection_align_loss_and_grads(
    support: &SupportSet,
    space: &EmbeddingSpace,
) -> (f64, Gradients) {
    let mut grads = Gradients::new();
    let loss = support
        .pairs()
        .iter()
        .map(|&(kb, text)| projection_pair_loss(space, kb, text, 1.0, &mut grads))
        .sum();
    (loss, grads)
}

/// Mean residual norm `‖W s + b − k‖` over the support set.
pub fn mean_projection_residual(support: &SupportSet, space: &EmbeddingSpace) -> f64 {
    if support.is_empty() {
        return 0.0;
    }
    let proj = ProjectionMap::from_space(space);
    let total: f64 = support
        .pairs()
        .iter()
        .map(|&(kb, text)| {
            let p = proj.apply(&space.table(Table::EntityIn).row(text as usize));
            let k = space.table(Table::KbEntity).row(kb as usize);
            p.iter().zip(&k).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        })
        .sum();
    total / support.len() as f64
}

/// Name-graph facts: for each triple, the copies with the head, the tail, or
/// both replaced by their text counterparts.
pub fn expand_name_graph(store: &TripleStore, support: &SupportSet) -> Vec<Fact> {
    let mut out = Vec::new();
    for t in store.triples() {
        let eh = support.text_of(t.h);
        let et = support.text_of(t.t);
        if let Some(eh) = eh {
            out.push(Fact {
                head: Slot::Text(eh),
                relation: t.r,
                tail: Slot::Kb(t.t),
            });
        }
        if let Some(et) = et {
            out.push(Fact {
                head: Slot::Kb(t.h),
                relation: t.r,
                tail: Slot::Text(et),
            });
        }
        if let (Some(eh), Some(et)) = (eh, et) {
            out.push(Fact {
                head: Slot::Text(eh),
                relation: t.r,
                tail: Slot::Text(et),
            });
        }
    }
    out
}

/// One anchor-alignment term: the KB row `kb` as center against the word
/// output row `word` and the given negative words. Returns the unscaled
/// loss.
pub fn anchor_pair_loss(
    space: &EmbeddingSpace,
    kb: u32,
    word: u32,
    negatives: &[u32],
    scale: f64,
    grads: &mut Gradients,
) -> f64 {
    let center = ParamKey {
        table: Table::KbEntity,
        row: kb,
    };
    let key = |w| ParamKey {
        table: Table::WordOut,
        row: w,
    };
    let negs: Vec<ParamKey> = negatives.iter().map(|&w| key(w)).collect();
    negative_sampling_loss(space, center, key(word), &negs, scale, grads)
}

/// Anchor alignment for one anchor occurrence and its context words. The
/// text entity's KB counterpart replaces its input row; an entity without
/// a counterpart contributes nothing.
pub fn anchor_align_loss_and_grads(
    anchor: (u32, &[u32]),
    support: &SupportSet,
    space: &EmbeddingSpace,
    k: usize,
    noise: &NoiseDistribution,
    rng: &mut impl Rng,
) -> (f64, Gradients) {
    let (entity, contexts) = anchor;
    let mut grads = Gradients::new();
    let Some(kb) = support.kb_of(entity) else {
        return (0.0, grads);
    };
    let mut loss = 0.0;
    for &w in contexts {
        let negatives = draw_negatives(k, noise, rng);
        loss += anchor_pair_loss(space, kb, w, &negatives, 1.0, &mut grads);
    }
    (loss, grads)
}

pub fn total_loss(l_kb: f64, l_sg: f64, l_align: f64, lambda: f64) -> f64 {
    l_kb + l_sg + lambda * l_align
}
