//! Skip-gram with negative sampling over word-word, word-entity and
//! entity-entity co-occurrences.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::Distribution;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;

use crate::error::{Error, Result};
use crate::ingest::{Corpus, Document, Token, Vocabulary};
use crate::kbe::{sigmoid, softplus};
use crate::space::{dot, EmbeddingSpace, Gradients, ParamKey, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairKind {
    /// Word predicts a nearby word.
    WordWord,
    /// Anchored entity predicts a nearby word.
    WordEntity,
    /// Entity predicts a page linking to it.
    EntityEntity,
}

impl PairKind {
    pub fn center_table(self) -> Table {
        match self {
            PairKind::WordWord => Table::WordIn,
            PairKind::WordEntity | PairKind::EntityEntity => Table::EntityIn,
        }
    }

    pub fn context_table(self) -> Table {
        match self {
            PairKind::WordWord | PairKind::WordEntity => Table::WordOut,
            PairKind::EntityEntity => Table::EntityOut,
        }
    }

    /// Namespace negatives are drawn from (that of the context).
    pub fn noise_namespace(self) -> NoiseNamespace {
        match self {
            PairKind::WordWord | PairKind::WordEntity => NoiseNamespace::Word,
            PairKind::EntityEntity => NoiseNamespace::TextEntity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CooccurrencePair {
    pub kind: PairKind,
    pub center: u32,
    pub context: u32,
}

impl CooccurrencePair {
    pub fn new(kind: PairKind, center: u32, context: u32) -> Self {
        CooccurrencePair {
            kind,
            center,
            context,
        }
    }
}

/// Appends the word-word and word-entity pairs of one document.
///
/// Word-word windows run over the document's words with anchors removed.
/// Each anchor pairs with every word within `window` token positions of it.
pub fn document_pairs(doc: &Document, window: usize, out: &mut Vec<CooccurrencePair>) {
    let words: Vec<u32> = doc
        .tokens
        .iter()
        .filter_map(|t| match *t {
            Token::Word(w) => Some(w),
            Token::Anchor(_) => None,
        })
        .collect();
    for (n, &center) in words.iter().enumerate() {
        let lo = n.saturating_sub(window);
        let hi = (n + window).min(words.len().saturating_sub(1));
        for (j, &ctx) in words.iter().enumerate().take(hi + 1).skip(lo) {
            if j != n {
                out.push(CooccurrencePair::new(PairKind::WordWord, center, ctx));
            }
        }
    }
    for (p, tok) in doc.tokens.iter().enumerate() {
        let Token::Anchor(e) = *tok else { continue };
        let lo = p.saturating_sub(window);
        let hi = (p + window).min(doc.tokens.len() - 1);
        for q in lo..=hi {
            if let Token::Word(w) = doc.tokens[q] {
                out.push(CooccurrencePair::new(PairKind::WordEntity, e, w));
            }
        }
    }
}

/// For each entity, the set of pages that link to it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkGraph {
    incoming: BTreeMap<u32, BTreeSet<u32>>,
}

impl LinkGraph {
    /// Each anchor in a page-owned document gains the page as an incoming
    /// link. Self-links are dropped.
    pub fn build(corpus: &Corpus) -> Self {
        let mut incoming: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        for doc in &corpus.documents {
            let Some(page) = doc.page else { continue };
            for tok in &doc.tokens {
                if let Token::Anchor(a) = *tok {
                    if a != page {
                        incoming.entry(a).or_default().insert(page);
                    }
                }
            }
        }
        LinkGraph { incoming }
    }

    pub fn incoming(&self, e: u32) -> impl Iterator<Item = u32> + '_ {
        self.incoming.get(&e).into_iter().flatten().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.incoming.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.incoming.is_empty()
    }

    /// One entity-entity pair per edge, ordered by entity then source page.
    pub fn pairs(&self) -> Vec<CooccurrencePair> {
        self.incoming
            .iter()
            .flat_map(|(&e, srcs)| {
                srcs.iter()
                    .map(move |&s| CooccurrencePair::new(PairKind::EntityEntity, e, s))
            })
            .collect()
    }
}

/// All co-occurrence pairs of one epoch: documents in order, then the link
/// graph.
pub fn extract_pairs(corpus: &Corpus, window: usize) -> Result<Vec<CooccurrencePair>> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be >= 1".into()));
    }
    let mut out = Vec::new();
    for doc in &corpus.documents {
        document_pairs(doc, window, &mut out);
    }
    out.extend(LinkGraph::build(corpus).pairs());
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseNamespace {
    Word,
    TextEntity,
}

/// Unigram^power sampling distribution for negatives.
#[derive(Debug, Clone)]
pub struct NoiseDistribution {
    namespace: NoiseNamespace,
    probs: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
}

impl NoiseDistribution {
    pub fn from_frequencies(
        namespace: NoiseNamespace,
        freqs: &[u64],
        power: f64,
    ) -> Result<Self> {
        if !(power >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise power {power} < 0")));
        }
        if freqs.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "empty {namespace:?} namespace for noise distribution"
            )));
        }
        let weights: Vec<f64> = freqs.iter().map(|&f| (f as f64).powf(power)).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{namespace:?} noise distribution has zero total weight"
            )));
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let alias = WeightedAliasIndex::new(weights)
            .map_err(|e| Error::InvalidArgument(format!("noise distribution: {e}")))?;
        Ok(NoiseDistribution {
            namespace,
            probs,
            alias,
        })
    }

    pub fn build(vocab: &Vocabulary, namespace: NoiseNamespace, power: f64) -> Result<Self> {
        let ns = match namespace {
            NoiseNamespace::Word => &vocab.words,
            NoiseNamespace::TextEntity => &vocab.text_entities,
        };
        Self::from_frequencies(namespace, ns.frequencies(), power)
    }

    pub fn namespace(&self) -> NoiseNamespace {
        self.namespace
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u32 {
        self.alias.sample(rng) as u32
    }
}

/// Noise distributions for both context namespaces.
#[derive(Debug, Clone)]
pub struct Noise {
    pub words: NoiseDistribution,
    pub entities: NoiseDistribution,
}

impl Noise {
    pub fn build(vocab: &Vocabulary, power: f64) -> Result<Self> {
        Ok(Noise {
            words: NoiseDistribution::build(vocab, NoiseNamespace::Word, power)?,
            entities: NoiseDistribution::build(vocab, NoiseNamespace::TextEntity, power)?,
        })
    }

    pub fn for_kind(&self, kind: PairKind) -> &NoiseDistribution {
        match kind.noise_namespace() {
            NoiseNamespace::Word => &self.words,
            NoiseNamespace::TextEntity => &self.entities,
        }
    }
}

/// Negative-sampling loss `−log σ(u·v⁺) − Σ log σ(−u·v⁻)` for the center
/// cell `center` against the positive and negative context cells.
/// Accumulates `scale ×` the exact gradient; returns the unscaled loss.
pub(crate) fn negative_sampling_loss(
    space: &EmbeddingSpace,
    center: ParamKey,
    positive: ParamKey,
    negatives: &[ParamKey],
    scale: f64,
    grads: &mut Gradients,
) -> f64 {
    let dim = space.dim();
    let mut u = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut grad_u = vec![0.0; dim];
    space.read(center, &mut u);

    space.read(positive, &mut v);
    let s = dot(&u, &v);
    let mut loss = softplus(-s);
    let g = -sigmoid(-s);
    grads.add(positive, scale * g, &u);
    for (gu, vi) in grad_u.iter_mut().zip(&v) {
        *gu += g * vi;
    }

    for &neg in negatives {
        space.read(neg, &mut v);
        let s = dot(&u, &v);
        loss += softplus(s);
        let g = sigmoid(s);
        grads.add(neg, scale * g, &u);
        for (gu, vi) in grad_u.iter_mut().zip(&v) {
            *gu += g * vi;
        }
    }
    grads.add(center, scale, &grad_u);
    loss
}

/// Loss and gradient of one pair against explicitly given negatives.
pub fn sg_pair_loss_with_negatives(
    pair: CooccurrencePair,
    space: &EmbeddingSpace,
    negatives: &[u32],
    scale: f64,
    grads: &mut Gradients,
) -> f64 {
    let ctx = pair.kind.context_table();
    let center = space.key(pair.kind.center_table(), pair.center);
    let positive = space.key(ctx, pair.context);
    let negs: Vec<ParamKey> = negatives.iter().map(|&n| space.key(ctx, n)).collect();
    negative_sampling_loss(space, center, positive, &negs, scale, grads)
}

/// Draws `k` negatives for `kind` from `noise`.
pub fn draw_negatives(k: usize, noise: &NoiseDistribution, rng: &mut impl Rng) -> Vec<u32> {
    (0..k).map(|_| noise.sample(rng)).collect()
}

/// Loss and exact gradient of one pair with `k` negatives drawn from `noise`.
pub fn sg_pair_loss_and_grads(
    pair: CooccurrencePair,
    space: &EmbeddingSpace,
    k: usize,
    noise: &NoiseDistribution,
    rng: &mut impl Rng,
) -> (f64, Gradients) {
    let negatives = draw_negatives(k, noise, rng);
    let mut grads = Gradients::new();
    let loss = sg_pair_loss_with_negatives(pair, space, &negatives, 1.0, &mut grads);
    (loss, grads)
}

/// Total skip-gram loss over every pair of one epoch, for monitoring.
pub fn sg_epoch_loss(
    corpus: &Corpus,
    space: &EmbeddingSpace,
    window: usize,
    k: usize,
    noise: &Noise,
    rng: &mut impl Rng,
) -> Result<f64> {
    let mut scratch = Gradients::new();
    let mut total = 0.0;
    for pair in extract_pairs(corpus, window)? {
        let negatives = draw_negatives(k, noise.for_kind(pair.kind), rng);
        scratch.clear();
        total += sg_pair_loss_with_negatives(pair, space, &negatives, 1.0, &mut scratch);
    }
    Ok(total)
}
