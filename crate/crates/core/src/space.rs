//! Parameter tables shared by every objective.
//!
//! Values live in `AtomicU64` cells holding `f64` bits. Loads and stores are
//! `Relaxed`, so many trainer threads can read and write the same rows
//! without locks (Hogwild). A read-modify-write of a row is not atomic as a
//! whole: concurrent updates to one row may be lost, which asynchronous SGD
//! tolerates.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense `rows × dim` matrix of reals with lock-free row access.
pub struct EmbeddingTable {
    rows: usize,
    dim: usize,
    cells: Vec<AtomicU64>,
}

impl EmbeddingTable {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        let cells = (0..rows * dim).map(|_| AtomicU64::new(0f64.to_bits())).collect();
        EmbeddingTable { rows, dim, cells }
    }

    pub fn from_vec(rows: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * dim {
            return Err(Error::InvalidArgument(format!(
                "table of {rows}x{dim} needs {} values, got {}",
                rows * dim,
                values.len()
            )));
        }
        let cells = values.into_iter().map(|v| AtomicU64::new(v.to_bits())).collect();
        Ok(EmbeddingTable { rows, dim, cells })
    }

    pub fn identity(dim: usize) -> Self {
        let t = Self::zeros(dim, dim);
        for i in 0..dim {
            t.set(i, i, 1.0);
        }
        t
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        f64::from_bits(self.cells[row * self.dim + col].load(Ordering::Relaxed))
    }

    #[inline]
    pub fn set(&self, row: usize, col: usize, v: f64) {
        self.cells[row * self.dim + col].store(v.to_bits(), Ordering::Relaxed);
    }

    #[inline]
    pub fn read_row(&self, row: usize, out: &mut [f64]) {
        let base = row * self.dim;
        for (o, c) in out.iter_mut().zip(&self.cells[base..base + self.dim]) {
            *o = f64::from_bits(c.load(Ordering::Relaxed));
        }
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.read_row(row, &mut out);
        out
    }

    #[inline]
    pub fn write_row(&self, row: usize, values: &[f64]) {
        let base = row * self.dim;
        for (c, v) in self.cells[base..base + self.dim].iter().zip(values) {
            c.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.cells
            .iter()
            .map(|c| f64::from_bits(c.load(Ordering::Relaxed)))
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.cells
            .iter()
            .all(|c| f64::from_bits(c.load(Ordering::Relaxed)).is_finite())
    }

    /// Fills the table with independent draws from `U(-bound, bound)`.
    pub fn fill_uniform(&self, bound: f64, rng: &mut impl Rng) {
        for c in &self.cells {
            c.store(rng.random_range(-bound..=bound).to_bits(), Ordering::Relaxed);
        }
    }
}

impl Clone for EmbeddingTable {
    fn clone(&self) -> Self {
        EmbeddingTable::from_vec(self.rows, self.dim, self.to_vec()).unwrap()
    }
}

/// Bitwise equality, so `-0.0 != 0.0` and `NaN == NaN` for identical bits.
impl PartialEq for EmbeddingTable {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.dim == other.dim
            && self
                .cells
                .iter()
                .zip(&other.cells)
                .all(|(a, b)| a.load(Ordering::Relaxed) == b.load(Ordering::Relaxed))
    }
}

impl std::fmt::Debug for EmbeddingTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmbeddingTable")
            .field("rows", &self.rows)
            .field("dim", &self.dim)
            .finish()
    }
}

/// Identifies one parameter table of an [`EmbeddingSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Table {
    KbEntity,
    Relation,
    WordIn,
    WordOut,
    EntityIn,
    EntityOut,
    /// Rows of the projection matrix `W`.
    ProjW,
    /// The projection bias `b` (a single row).
    ProjB,
}

impl Table {
    pub const ALL: [Table; 8] = [
        Table::KbEntity,
        Table::Relation,
        Table::WordIn,
        Table::WordOut,
        Table::EntityIn,
        Table::EntityOut,
        Table::ProjW,
        Table::ProjB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Table::KbEntity => "kb_entities",
            Table::Relation => "relations",
            Table::WordIn => "words_in",
            Table::WordOut => "words_out",
            Table::EntityIn => "entities_in",
            Table::EntityOut => "entities_out",
            Table::ProjW => "projection_w",
            Table::ProjB => "projection_b",
        }
    }

    pub fn from_name(name: &str) -> Option<Table> {
        Table::ALL.into_iter().find(|t| t.name() == name)
    }

    /// Tables owned by the KB model (optimized with Adagrad).
    pub fn is_kb_side(self) -> bool {
        matches!(
            self,
            Table::KbEntity | Table::Relation | Table::ProjW | Table::ProjB
        )
    }
}

/// A storage cell: one row of one table, after alias resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamKey {
    pub table: Table,
    pub row: u32,
}

/// Declares text entities whose input row *is* a KB entity row.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SharedBinding {
    text_to_kb: HashMap<u32, u32>,
}

impl SharedBinding {
    pub fn new(pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        SharedBinding {
            text_to_kb: pairs.into_iter().map(|(k, e)| (e, k)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.text_to_kb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text_to_kb.is_empty()
    }

    pub fn kb_row(&self, text_entity: u32) -> Option<u32> {
        self.text_to_kb.get(&text_entity).copied()
    }
}

/// Table sizes for one vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceShape {
    pub kb_entities: usize,
    pub relations: usize,
    pub words: usize,
    pub text_entities: usize,
    pub dim: usize,
}

/// Every parameter of the joint model.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    dim: usize,
    kb_entities: EmbeddingTable,
    relations: EmbeddingTable,
    words_in: EmbeddingTable,
    words_out: EmbeddingTable,
    entities_in: EmbeddingTable,
    entities_out: EmbeddingTable,
    proj_w: EmbeddingTable,
    proj_b: EmbeddingTable,
    binding: SharedBinding,
}

impl EmbeddingSpace {
    /// All-zero tables except the projection, which starts at `W = I, b = 0`.
    pub fn zeros(shape: SpaceShape) -> Self {
        let d = shape.dim;
        EmbeddingSpace {
            dim: d,
            kb_entities: EmbeddingTable::zeros(shape.kb_entities, d),
            relations: EmbeddingTable::zeros(shape.relations, d),
            words_in: EmbeddingTable::zeros(shape.words, d),
            words_out: EmbeddingTable::zeros(shape.words, d),
            entities_in: EmbeddingTable::zeros(shape.text_entities, d),
            entities_out: EmbeddingTable::zeros(shape.text_entities, d),
            proj_w: EmbeddingTable::identity(d),
            proj_b: EmbeddingTable::zeros(1, d),
            binding: SharedBinding::default(),
        }
    }

    /// Uniform `[-6/√dim, 6/√dim]` initialization of the KB tables and the
    /// skip-gram input tables. Skip-gram output tables start at zero.
    pub fn initialize(shape: SpaceShape, seed: u64) -> Result<Self> {
        if shape.dim == 0 {
            return Err(Error::InvalidArgument("embedding dim must be >= 1".into()));
        }
        let space = Self::zeros(shape);
        let bound = 6.0 / (shape.dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in [
            &space.kb_entities,
            &space.relations,
            &space.words_in,
            &space.entities_in,
        ] {
            t.fill_uniform(bound, &mut rng);
        }
        Ok(space)
    }

    pub fn shape(&self) -> SpaceShape {
        SpaceShape {
            kb_entities: self.kb_entities.rows(),
            relations: self.relations.rows(),
            words: self.words_in.rows(),
            text_entities: self.entities_in.rows(),
            dim: self.dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn table(&self, t: Table) -> &EmbeddingTable {
        match t {
            Table::KbEntity => &self.kb_entities,
            Table::Relation => &self.relations,
            Table::WordIn => &self.words_in,
            Table::WordOut => &self.words_out,
            Table::EntityIn => &self.entities_in,
            Table::EntityOut => &self.entities_out,
            Table::ProjW => &self.proj_w,
            Table::ProjB => &self.proj_b,
        }
    }

    pub fn replace_table(&mut self, t: Table, table: EmbeddingTable) -> Result<()> {
        let old = self.table(t);
        if old.rows() != table.rows() || old.dim() != table.dim() {
            return Err(Error::Mismatch(format!(
                "table `{}` is {}x{}, replacement is {}x{}",
                t.name(),
                old.rows(),
                old.dim(),
                table.rows(),
                table.dim()
            )));
        }
        let slot = match t {
            Table::KbEntity => &mut self.kb_entities,
            Table::Relation => &mut self.relations,
            Table::WordIn => &mut self.words_in,
            Table::WordOut => &mut self.words_out,
            Table::EntityIn => &mut self.entities_in,
            Table::EntityOut => &mut self.entities_out,
            Table::ProjW => &mut self.proj_w,
            Table::ProjB => &mut self.proj_b,
        };
        *slot = table;
        Ok(())
    }

    /// Makes each bound text entity's input row an alias of its KB row.
    /// Must happen before training starts.
    pub fn bind(&mut self, binding: SharedBinding) {
        self.binding = binding;
    }

    pub fn binding(&self) -> &SharedBinding {
        &self.binding
    }

    /// Resolves `(table, row)` to its storage cell.
    #[inline]
    pub fn key(&self, table: Table, row: u32) -> ParamKey {
        if table == Table::EntityIn {
            if let Some(k) = self.binding.kb_row(row) {
                return ParamKey {
                    table: Table::KbEntity,
                    row: k,
                };
            }
        }
        ParamKey { table, row }
    }

    #[inline]
    pub fn read(&self, key: ParamKey, out: &mut [f64]) {
        self.table(key.table).read_row(key.row as usize, out)
    }

    /// Row of `table` after alias resolution.
    pub fn row(&self, table: Table, row: u32) -> Vec<f64> {
        let key = self.key(table, row);
        self.table(key.table).row(key.row as usize)
    }

    #[inline]
    pub fn write(&self, key: ParamKey, values: &[f64]) {
        self.table(key.table).write_row(key.row as usize, values)
    }

    /// Text-side entity vector (the skip-gram input representation).
    pub fn text_entity(&self, e: u32) -> Vec<f64> {
        self.row(Table::EntityIn, e)
    }

    /// First table holding a non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<Table> {
        Table::ALL.into_iter().find(|&t| !self.table(t).all_finite())
    }
}

/// Sparse gradient: one dense vector per touched storage cell, in first-touch
/// order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    rows: IndexMap<ParamKey, Vec<f64>>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `scale * v` to the gradient of `key`.
    pub fn add(&mut self, key: ParamKey, scale: f64, v: &[f64]) {
        let g = self
            .rows
            .entry(key)
            .or_insert_with(|| vec![0.0; v.len()]);
        for (gi, vi) in g.iter_mut().zip(v) {
            *gi += scale * vi;
        }
    }

    pub fn get(&self, key: &ParamKey) -> Option<&[f64]> {
        self.rows.get(key).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ParamKey, &[f64])> {
        self.rows.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn clear(&mut self) {
        self.rows.clear();
    }

    /// Adds every entry of `other` into `self`.
    pub fn merge(&mut self, other: &Gradients) {
        for (k, v) in other.iter() {
            self.add(*k, 1.0, v);
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
