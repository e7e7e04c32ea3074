//! Alternating joint optimization: per epoch, one KB pass (Adagrad) then one
//! text pass (SGD), each optionally spread over lock-free worker threads.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::ops::AddAssign;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alignment::{
    anchor_pair_loss, bind_shared_embeddings, expand_name_graph, projection_pair_loss,
    AlignMethod, AlignmentConfig, ProjectionMap,
};
use crate::error::{Error, Result};
use crate::ingest::{Corpus, SupportSet, Token, TripleStore, Vocabulary};
use crate::kbe::{fact_loss_and_grads, sample_fact_negatives, Fact, KbeConfig, Label};
use crate::seeds::stage_seed;
use crate::skipgram::{
    document_pairs, draw_negatives, sg_pair_loss_with_negatives, CooccurrencePair, LinkGraph,
    NoiseDistribution, NoiseNamespace, PairKind,
};
use crate::space::{EmbeddingSpace, EmbeddingTable, Gradients, SpaceShape, Table};

pub const ADAGRAD_EPS: f64 = 1e-10;
/// Final skip-gram learning rate as a fraction of the initial one.
pub const MIN_LR_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr_kbe: f64,
    pub lr_sg: f64,
    pub threads: usize,
    pub serial_deterministic: bool,
    pub seed: u64,
    pub kbe: KbeConfig,
    pub window: usize,
    pub k_neg_sg: usize,
    pub noise_power: f64,
    pub align: AlignmentConfig,
    pub dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            lr_kbe: 0.1,
            lr_sg: 0.025,
            threads: 1,
            serial_deterministic: true,
            seed: 0,
            kbe: KbeConfig::default(),
            window: 5,
            k_neg_sg: 5,
            noise_power: 0.75,
            align: AlignmentConfig::default(),
            dim: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.lr_kbe > 0.0) || !(self.lr_sg > 0.0) {
            return bad(format!(
                "learning rates must be > 0 (lr_kbe {}, lr_sg {})",
                self.lr_kbe, self.lr_sg
            ));
        }
        if self.threads == 0 {
            return bad("threads must be >= 1".into());
        }
        if self.serial_deterministic && self.threads != 1 {
            return bad(format!(
                "serial deterministic mode needs threads = 1, got {}",
                self.threads
            ));
        }
        if self.window == 0 || self.k_neg_sg == 0 || self.dim == 0 {
            return bad("window, k_neg_sg and dim must be >= 1".into());
        }
        if !(self.noise_power >= 0.0) {
            return bad(format!("noise power {} < 0", self.noise_power));
        }
        self.kbe.validate()?;
        self.align.validate()
    }
}

/// Everything the trainer reads.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub vocab: &'a Vocabulary,
    pub train: &'a TripleStore,
    pub corpus: &'a Corpus,
    pub support: &'a SupportSet,
}

impl TrainData<'_> {
    pub fn shape(&self, dim: usize) -> SpaceShape {
        SpaceShape {
            kb_entities: self.vocab.kb_entities.len(),
            relations: self.vocab.relations.len(),
            words: self.vocab.words.len(),
            text_entities: self.vocab.text_entities.len(),
            dim,
        }
    }

    /// Checks that every id refers to the vocabulary.
    pub fn validate(&self) -> Result<()> {
        let (ne, nr) = (
            self.vocab.kb_entities.len() as u32,
            self.vocab.relations.len() as u32,
        );
        let (nw, nt) = (
            self.vocab.words.len() as u32,
            self.vocab.text_entities.len() as u32,
        );
        if let Some(t) = self
            .train
            .triples()
            .iter()
            .find(|t| t.h >= ne || t.t >= ne || t.r >= nr)
        {
            return Err(Error::Invariant(format!("triple {t:?} outside the vocabulary")));
        }
        for doc in &self.corpus.documents {
            if doc.page.is_some_and(|p| p >= nt) {
                return Err(Error::Invariant(format!("page {:?} outside the vocabulary", doc.page)));
            }
            for tok in &doc.tokens {
                let ok = match *tok {
                    Token::Word(w) => w < nw,
                    Token::Anchor(e) => e < nt,
                };
                if !ok {
                    return Err(Error::Invariant(format!("token {tok:?} outside the vocabulary")));
                }
            }
        }
        if let Some(p) = self.support.pairs().iter().find(|&&(k, e)| k >= ne || e >= nt) {
            return Err(Error::Invariant(format!("support pair {p:?} outside the vocabulary")));
        }
        Ok(())
    }
}

/// Losses of one epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub l_kb: f64,
    pub l_sg: f64,
    pub l_align: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Losses {
    kb: f64,
    sg: f64,
    align: f64,
}

impl AddAssign for Losses {
    fn add_assign(&mut self, o: Losses) {
        self.kb += o.kb;
        self.sg += o.sg;
        self.align += o.align;
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub space: EmbeddingSpace,
    /// Present when the method is projection.
    pub projection: Option<ProjectionMap>,
    pub log: Vec<EpochLog>,
}

/// `accum += g²; row −= lr·g/√(accum + ε)`.
pub fn adagrad_update(row: &mut [f64], grad: &[f64], accum: &mut [f64], lr: f64) {
    for ((x, g), a) in row.iter_mut().zip(grad).zip(accum.iter_mut()) {
        let prev = *a;
        *a += g * g;
        debug_assert!(*a >= prev, "adagrad accumulator decreased");
        *x -= lr * g / (*a + ADAGRAD_EPS).sqrt();
    }
}

/// `row −= lr·g`.
pub fn sgd_update(row: &mut [f64], grad: &[f64], lr: f64) {
    for (x, g) in row.iter_mut().zip(grad) {
        *x -= lr * g;
    }
}

/// Adagrad accumulators for the KB-side tables, shared by workers under the
/// same lock-free discipline as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    kb_entities: EmbeddingTable,
    relations: EmbeddingTable,
    proj_w: EmbeddingTable,
    proj_b: EmbeddingTable,
}

impl OptimizerState {
    pub fn new(space: &EmbeddingSpace) -> Self {
        let zeros = |t: Table| {
            let tab = space.table(t);
            EmbeddingTable::zeros(tab.rows(), tab.dim())
        };
        OptimizerState {
            kb_entities: zeros(Table::KbEntity),
            relations: zeros(Table::Relation),
            proj_w: zeros(Table::ProjW),
            proj_b: zeros(Table::ProjB),
        }
    }

    pub fn accumulator(&self, t: Table) -> Option<&EmbeddingTable> {
        match t {
            Table::KbEntity => Some(&self.kb_entities),
            Table::Relation => Some(&self.relations),
            Table::ProjW => Some(&self.proj_w),
            Table::ProjB => Some(&self.proj_b),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Policy {
    /// KB-side cells take Adagrad steps, text-side cells SGD steps.
    ByOwner,
    /// Every cell takes an SGD step.
    Sgd,
}

struct Stepper<'a> {
    space: &'a EmbeddingSpace,
    state: &'a OptimizerState,
    lr_kbe: f64,
    row: Vec<f64>,
    acc: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(space: &'a EmbeddingSpace, state: &'a OptimizerState, lr_kbe: f64) -> Self {
        let dim = space.dim();
        Stepper {
            space,
            state,
            lr_kbe,
            row: vec![0.0; dim],
            acc: vec![0.0; dim],
        }
    }

    fn apply(&mut self, grads: &Gradients, policy: Policy, lr_sg: f64) {
        for (key, g) in grads.iter() {
            let table = self.space.table(key.table);
            let r = key.row as usize;
            table.read_row(r, &mut self.row);
            match self.state.accumulator(key.table) {
                Some(acc) if policy == Policy::ByOwner => {
                    acc.read_row(r, &mut self.acc);
                    adagrad_update(&mut self.row, g, &mut self.acc, self.lr_kbe);
                    acc.write_row(r, &self.acc);
                }
                _ => sgd_update(&mut self.row, g, lr_sg),
            }
            table.write_row(r, &self.row);
        }
    }
}

/// Uniform initialization of every table for `vocab`.
pub fn initialize_space(vocab: &Vocabulary, dim: usize, seed: u64) -> Result<EmbeddingSpace> {
    EmbeddingSpace::initialize(
        SpaceShape {
            kb_entities: vocab.kb_entities.len(),
            relations: vocab.relations.len(),
            words: vocab.words.len(),
            text_entities: vocab.text_entities.len(),
            dim,
        },
        seed,
    )
}

/// Splits `items` into at most `threads` contiguous chunks and runs `f` on
/// each, on scoped threads when more than one. Results come back in chunk
/// order.
fn run_partitioned<T: Sync, R: Send>(
    items: &[T],
    threads: usize,
    f: impl Fn(usize, &[T]) -> R + Sync,
) -> Vec<R> {
    if threads <= 1 {
        return vec![f(0, items)];
    }
    let chunk = items.len().div_ceil(threads).max(1);
    let mut parts: Vec<&[T]> = items.chunks(chunk).collect();
    parts.resize(threads, &[]);
    std::thread::scope(|s| {
        let handles: Vec<_> = parts
            .into_iter()
            .enumerate()
            .map(|(w, part)| {
                let f = &f;
                s.spawn(move || f(w, part))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("trainer worker panicked"))
            .collect()
    })
}

/// Part of the input assigned to one worker in one pass.
fn split_evenly<T>(items: &[T], threads: usize, w: usize) -> &[T] {
    if threads <= 1 {
        return items;
    }
    let chunk = items.len().div_ceil(threads).max(1);
    let lo = (w * chunk).min(items.len());
    let hi = ((w + 1) * chunk).min(items.len());
    &items[lo..hi]
}

struct Trainer<'a> {
    data: TrainData<'a>,
    cfg: &'a TrainConfig,
    space: &'a EmbeddingSpace,
    state: OptimizerState,
    name_graph: Vec<Fact>,
    links: Vec<CooccurrencePair>,
    word_noise: Option<NoiseDistribution>,
    entity_noise: Option<NoiseDistribution>,
}

impl Trainer<'_> {
    fn rng(&self, stage: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(stage_seed(self.cfg.seed, stage))
    }

    fn lambda(&self) -> f64 {
        self.cfg.align.lambda
    }

    fn method(&self) -> AlignMethod {
        self.cfg.align.method
    }

    fn lr_sg(&self, frac: f64) -> f64 {
        self.cfg.lr_sg * (1.0 - frac).max(MIN_LR_FRACTION)
    }

    fn kb_pass(&self, epoch: usize) -> Losses {
        let n_entities = self.data.vocab.kb_entities.len();
        let mut triples = self.data.train.triples().to_vec();
        triples.shuffle(&mut self.rng(&format!("kb-shuffle/{epoch}")));
        let mut facts = self.name_graph.clone();
        facts.shuffle(&mut self.rng(&format!("name-shuffle/{epoch}")));
        let threads = self.cfg.threads;
        let apply_align = self.lambda() > 0.0;
        let lr_sg = self.lr_sg(0.0);

        let parts = run_partitioned(&triples, threads, |w, part| {
            let mut losses = Losses::default();
            let mut stepper = Stepper::new(self.space, &self.state, self.cfg.lr_kbe);
            let mut grads = Gradients::new();
            let mut batch = Vec::with_capacity(self.cfg.kbe.neg_per_pos + 1);

            let mut rng = self.rng(&format!("kb/{epoch}/{w}"));
            for &t in part {
                let fact = Fact::from(t);
                batch.clear();
                batch.push((fact, Label::Positive));
                for neg in sample_fact_negatives(fact, n_entities, &self.cfg.kbe, &mut rng) {
                    batch.push((neg, Label::Negative));
                }
                grads.clear();
                losses.kb +=
                    fact_loss_and_grads(&batch, self.space, self.cfg.kbe.gamma, 1.0, &mut grads);
                stepper.apply(&grads, Policy::ByOwner, lr_sg);
            }

            let mut rng = self.rng(&format!("name/{epoch}/{w}"));
            for &fact in split_evenly(&facts, threads, w) {
                batch.clear();
                batch.push((fact, Label::Positive));
                for neg in sample_fact_negatives(fact, n_entities, &self.cfg.kbe, &mut rng) {
                    batch.push((neg, Label::Negative));
                }
                grads.clear();
                losses.align += fact_loss_and_grads(
                    &batch,
                    self.space,
                    self.cfg.kbe.gamma,
                    self.lambda(),
                    &mut grads,
                );
                if apply_align {
                    stepper.apply(&grads, Policy::ByOwner, lr_sg);
                }
            }
            losses
        });
        let mut total = Losses::default();
        for p in parts {
            total += p;
        }

        if self.method() == AlignMethod::Projection {
            let mut stepper = Stepper::new(self.space, &self.state, self.cfg.lr_kbe);
            let mut grads = Gradients::new();
            for &(kb, text) in self.data.support.pairs() {
                grads.clear();
                total.align += projection_pair_loss(self.space, kb, text, self.lambda(), &mut grads);
                if apply_align {
                    stepper.apply(&grads, Policy::ByOwner, lr_sg);
                }
            }
        }
        total
    }

    fn text_pass(&self, epoch: usize) -> Losses {
        let Some(word_noise) = &self.word_noise else {
            return Losses::default();
        };
        let threads = self.cfg.threads;
        let docs = &self.data.corpus.documents;
        let anchors = self.method() == AlignMethod::Anchors;
        let apply_align = self.lambda() > 0.0;
        let k = self.cfg.k_neg_sg;

        let parts = run_partitioned(docs, threads, |w, part| {
            let mut losses = Losses::default();
            let mut stepper = Stepper::new(self.space, &self.state, self.cfg.lr_kbe);
            let mut rng = self.rng(&format!("text/{epoch}/{w}"));
            let mut align_rng = self.rng(&format!("anchor/{epoch}/{w}"));
            let links = split_evenly(&self.links, threads, w);
            let units = (part.len() + links.len()).max(1) as f64;
            let mut grads = Gradients::new();
            let mut pairs = Vec::new();

            for (i, doc) in part.iter().enumerate() {
                let lr = self.lr_sg(i as f64 / units);
                pairs.clear();
                document_pairs(doc, self.cfg.window, &mut pairs);
                for &pair in &pairs {
                    let negs = draw_negatives(k, word_noise, &mut rng);
                    grads.clear();
                    losses.sg += sg_pair_loss_with_negatives(pair, self.space, &negs, 1.0, &mut grads);
                    stepper.apply(&grads, Policy::Sgd, lr);

                    if !anchors || pair.kind != PairKind::WordEntity {
                        continue;
                    }
                    let Some(kb) = self.data.support.kb_of(pair.center) else {
                        continue;
                    };
                    let negs = draw_negatives(k, word_noise, &mut align_rng);
                    grads.clear();
                    losses.align +=
                        anchor_pair_loss(self.space, kb, pair.context, &negs, self.lambda(), &mut grads);
                    if apply_align {
                        stepper.apply(&grads, Policy::ByOwner, lr);
                    }
                }
            }

            if let Some(entity_noise) = &self.entity_noise {
                for (i, &pair) in links.iter().enumerate() {
                    let lr = self.lr_sg((part.len() + i) as f64 / units);
                    let negs = draw_negatives(k, entity_noise, &mut rng);
                    grads.clear();
                    losses.sg += sg_pair_loss_with_negatives(pair, self.space, &negs, 1.0, &mut grads);
                    stepper.apply(&grads, Policy::Sgd, lr);
                }
            }
            losses
        });
        let mut total = Losses::default();
        for p in parts {
            total += p;
        }
        total
    }
}

/// Trains a freshly initialized space.
pub fn train(data: TrainData<'_>, config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    data.validate()?;
    let space = initialize_space(data.vocab, config.dim, stage_seed(config.seed, "init"))?;
    train_space(space, data, config)
}

/// Trains `space` in place of a fresh initialization. A same-embedding
/// binding is installed here when the method asks for one.
pub fn train_space(
    mut space: EmbeddingSpace,
    data: TrainData<'_>,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    data.validate()?;
    if space.shape() != data.shape(config.dim) {
        return Err(Error::Mismatch(format!(
            "space shape {:?} does not match the vocabulary",
            space.shape()
        )));
    }
    if config.align.method == AlignMethod::SameEmbedding {
        space.bind(bind_shared_embeddings(data.support));
    }
    let method = config.align.method;

    let word_noise = if data.corpus.token_count() > 0 {
        Some(NoiseDistribution::build(
            data.vocab,
            NoiseNamespace::Word,
            config.noise_power,
        )?)
    } else {
        None
    };
    let graph = LinkGraph::build(data.corpus);
    let entity_noise = if graph.is_empty() {
        None
    } else {
        Some(NoiseDistribution::build(
            data.vocab,
            NoiseNamespace::TextEntity,
            config.noise_power,
        )?)
    };
    if !data.train.is_empty() && data.vocab.kb_entities.is_empty() {
        return Err(Error::Invariant("triples without KB entities".into()));
    }

    let trainer = Trainer {
        data,
        cfg: config,
        space: &space,
        state: OptimizerState::new(&space),
        name_graph: if method == AlignMethod::EntityName {
            expand_name_graph(data.train, data.support)
        } else {
            Vec::new()
        },
        links: graph.pairs(),
        word_noise,
        entity_noise,
    };

    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let start = Instant::now();
        let mut losses = trainer.kb_pass(epoch);
        losses += trainer.text_pass(epoch);
        if let Some(t) = space.first_non_finite() {
            return Err(Error::Diverged {
                epoch: epoch + 1,
                table: t.name(),
            });
        }
        let entry = EpochLog {
            epoch: epoch + 1,
            l_kb: losses.kb,
            l_sg: losses.sg,
            l_align: losses.align,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {}: l_kb {:.4} l_sg {:.4} l_align {:.4} ({:.2}s)",
            entry.epoch,
            entry.l_kb,
            entry.l_sg,
            entry.l_align,
            entry.wall_seconds
        );
        log.push(entry);
    }
    drop(trainer);

    let projection = (method == AlignMethod::Projection).then(|| ProjectionMap::from_space(&space));
    Ok(TrainOutput {
        space,
        projection,
        log,
    })
}

pub fn write_training_log(path: &Path, log: &[EpochLog]) -> Result<()> {
    let mut out = String::from("epoch\tl_kb\tl_sg\tl_align\twall_seconds\n");
    for e in log {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.3}\n",
            e.epoch, e.l_kb, e.l_sg, e.l_align, e.wall_seconds
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

const MAGIC: &[u8; 8] = b"KTEMB1\0\0";
pub const MANIFEST_FILE: &str = "embeddings.tsv";

fn vocab_file(t: Table) -> &'static str {
    match t {
        Table::KbEntity => "kb_entities.tsv",
        Table::Relation => "relations.tsv",
        Table::WordIn | Table::WordOut => "words.tsv",
        Table::EntityIn | Table::EntityOut => "text_entities.tsv",
        Table::ProjW | Table::ProjB => "-",
    }
}

/// Writes `rows × dim` values as a binary table file.
pub fn write_table(path: &Path, rows: usize, dim: usize, values: &[f64]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    let rows32 = u32::try_from(rows).map_err(|_| Error::InvalidArgument("too many rows".into()))?;
    let dim32 = u32::try_from(dim).map_err(|_| Error::InvalidArgument("dim too large".into()))?;
    write(MAGIC)?;
    write(&rows32.to_le_bytes())?;
    write(&dim32.to_le_bytes())?;
    for &v in values {
        write(&(v as f32).to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a binary table file as `(rows, dim, values)`.
pub fn read_table(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::parse(path, 1, "not an embedding table (bad header)"));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != rows * dim * 4 {
        return Err(Error::parse(
            path,
            1,
            format!("expected {} bytes of data for {rows}x{dim}, found {}", rows * dim * 4, body.len()),
        ));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok((rows, dim, values))
}

/// Writes one binary file per table, the vocabulary TSVs and a manifest
/// mapping tables to files. Text entity input rows are written after alias
/// resolution, so shared rows appear in both tables.
pub fn export_space(dir: &Path, space: &EmbeddingSpace, vocab: &Vocabulary) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    vocab.write_dir(dir)?;
    let mut manifest = String::from("table\tfile\tvocab\trows\tdim\n");
    for t in Table::ALL {
        let tab = space.table(t);
        let values = if t == Table::EntityIn {
            (0..tab.rows() as u32).flat_map(|e| space.text_entity(e)).collect()
        } else {
            tab.to_vec()
        };
        let file = format!("{}.bin", t.name());
        write_table(&dir.join(&file), tab.rows(), tab.dim(), &values)?;
        manifest.push_str(&format!(
            "{}\t{file}\t{}\t{}\t{}\n",
            t.name(),
            vocab_file(t),
            tab.rows(),
            tab.dim()
        ));
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

/// Reads an export back. Fails with a mismatch error when the tables do not
/// fit `vocab`.
pub fn import_space(dir: &Path, vocab: &Vocabulary) -> Result<EmbeddingSpace> {
    let path = dir.join(MANIFEST_FILE);
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut tables = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate().skip(1) {
        let line = line.map_err(|e| Error::io(&path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::parse(&path, i + 1, "expected 5 fields"));
        }
        let t = Table::from_name(fields[0])
            .ok_or_else(|| Error::parse(&path, i + 1, format!("unknown table `{}`", fields[0])))?;
        let (rows, dim, values) = read_table(&dir.join(fields[1]))?;
        tables.push((t, EmbeddingTable::from_vec(rows, dim, values)?));
    }
    let dim = tables
        .iter()
        .find(|(t, _)| *t == Table::KbEntity)
        .map(|(_, tab)| tab.dim())
        .ok_or_else(|| Error::Mismatch(format!("{} lists no kb_entities table", path.display())))?;
    let mut space = EmbeddingSpace::zeros(SpaceShape {
        kb_entities: vocab.kb_entities.len(),
        relations: vocab.relations.len(),
        words: vocab.words.len(),
        text_entities: vocab.text_entities.len(),
        dim,
    });
    for (t, tab) in tables {
        space.replace_table(t, tab)?;
    }
    Ok(space)
}
