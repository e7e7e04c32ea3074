//! Few-shot link prediction with filtered, slot-constrained candidates, and
//! analogical reasoning over text entity vectors.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::{SupportSet, Triple, TripleStore};
use crate::space::{dot, norm, EmbeddingSpace, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotKind {
    Head,
    Tail,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    pub relation: u32,
    pub slot: SlotKind,
    pub entities: Vec<u32>,
}

/// Entities observed at each `(relation, slot)` in a triple store.
#[derive(Debug, Clone, Default)]
pub struct SlotPools {
    pools: HashMap<(u32, SlotKind), Vec<u32>>,
}

impl SlotPools {
    pub fn build(train: &TripleStore) -> Self {
        let mut sets: HashMap<(u32, SlotKind), BTreeSet<u32>> = HashMap::new();
        for t in train.triples() {
            sets.entry((t.r, SlotKind::Head)).or_default().insert(t.h);
            sets.entry((t.r, SlotKind::Tail)).or_default().insert(t.t);
        }
        SlotPools {
            pools: sets
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().collect()))
                .collect(),
        }
    }

    pub fn pool(&self, relation: u32, slot: SlotKind) -> &[u32] {
        self.pools
            .get(&(relation, slot))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

fn sample_from(pool: &[u32], limit: usize, rng: &mut impl Rng) -> Vec<u32> {
    if pool.len() <= limit {
        return pool.to_vec();
    }
    let mut picked: Vec<u32> = index::sample(rng, pool.len(), limit)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Candidates for one query from precomputed pools. An unobserved
/// `(relation, slot)` falls back to all `n_entities` KB entities.
pub fn candidates_from_pools(
    relation: u32,
    slot: SlotKind,
    pools: &SlotPools,
    n_entities: usize,
    limit: usize,
    rng: &mut impl Rng,
) -> CandidateSet {
    let pool = pools.pool(relation, slot);
    let entities = if pool.is_empty() {
        let all: Vec<u32> = (0..n_entities as u32).collect();
        sample_from(&all, limit, rng)
    } else {
        sample_from(pool, limit, rng)
    };
    CandidateSet {
        relation,
        slot,
        entities,
    }
}

/// Up to `limit` distinct entities seen at `slot` of `relation` in `train`.
pub fn build_candidate_set(
    relation: u32,
    slot: SlotKind,
    train: &TripleStore,
    n_entities: usize,
    limit: usize,
    rng: &mut impl Rng,
) -> Result<CandidateSet> {
    if limit == 0 {
        return Err(Error::InvalidArgument("candidate limit must be >= 1".into()));
    }
    let pool: BTreeSet<u32> = train
        .triples()
        .iter()
        .filter(|t| t.r == relation)
        .map(|t| match slot {
            SlotKind::Head => t.h,
            SlotKind::Tail => t.t,
        })
        .collect();
    let mut pools = SlotPools::default();
    pools
        .pools
        .insert((relation, slot), pool.into_iter().collect());
    Ok(candidates_from_pools(relation, slot, &pools, n_entities, limit, rng))
}

fn kb_distance(space: &EmbeddingSpace, t: Triple, scratch: &mut [Vec<f64>; 3]) -> f64 {
    let [h, r, tt] = scratch;
    space.table(Table::KbEntity).read_row(t.h as usize, h);
    space.table(Table::Relation).read_row(t.r as usize, r);
    space.table(Table::KbEntity).read_row(t.t as usize, tt);
    h.iter()
        .zip(r.iter())
        .zip(tt.iter())
        .map(|((a, b), c)| (a + b - c) * (a + b - c))
        .sum::<f64>()
        .sqrt()
}

fn substitute(t: Triple, slot: SlotKind, e: u32) -> Triple {
    match slot {
        SlotKind::Head => Triple { h: e, ..t },
        SlotKind::Tail => Triple { t: e, ..t },
    }
}

/// `1 +` the number of candidates, not forming a known positive, whose
/// substituted triple is strictly closer than the true one.
pub fn filtered_rank(
    test: Triple,
    slot: SlotKind,
    candidates: &CandidateSet,
    space: &EmbeddingSpace,
    is_positive: impl Fn(&Triple) -> bool,
) -> usize {
    let dim = space.dim();
    let mut scratch = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    let truth = match slot {
        SlotKind::Head => test.h,
        SlotKind::Tail => test.t,
    };
    let d_true = kb_distance(space, test, &mut scratch);
    let better = candidates
        .entities
        .iter()
        .filter(|&&e| e != truth)
        .map(|&e| substitute(test, slot, e))
        .filter(|c| !is_positive(c))
        .filter(|&c| kb_distance(space, c, &mut scratch) < d_true)
        .count();
    1 + better
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mr: f64,
    pub hits1: f64,
    pub hits10: f64,
    pub n: usize,
}

impl Metrics {
    /// Metrics of `ranks`, summed in the given order.
    pub fn from_ranks(ranks: &[usize]) -> Self {
        let n = ranks.len();
        let nf = n as f64;
        Metrics {
            mr: ranks.iter().map(|&r| r as f64).sum::<f64>() / nf,
            hits1: ranks.iter().filter(|&&r| r <= 1).count() as f64 / nf,
            hits10: ranks.iter().filter(|&&r| r <= 10).count() as f64 / nf,
            n,
        }
    }
}

/// Per-relation metrics and their unweighted macro average.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub per_relation: BTreeMap<u32, Metrics>,
}

impl EvalReport {
    /// Groups ranks by relation, keeping each relation's query order.
    pub fn from_ranks(ranks: &[(u32, usize)]) -> Self {
        let mut by: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for &(r, rank) in ranks {
            by.entry(r).or_default().push(rank);
        }
        EvalReport {
            per_relation: by
                .into_iter()
                .map(|(r, v)| (r, Metrics::from_ranks(&v)))
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.per_relation.is_empty()
    }

    /// Unweighted mean over relations, in ascending relation order; `n` is
    /// the total query count. `None` for an empty report.
    pub fn macro_avg(&self) -> Option<Metrics> {
        if self.per_relation.is_empty() {
            return None;
        }
        let k = self.per_relation.len() as f64;
        let m = self.per_relation.values();
        Some(Metrics {
            mr: m.clone().map(|m| m.mr).sum::<f64>() / k,
            hits1: m.clone().map(|m| m.hits1).sum::<f64>() / k,
            hits10: m.clone().map(|m| m.hits10).sum::<f64>() / k,
            n: m.map(|m| m.n).sum(),
        })
    }

    pub fn to_tsv(&self, relation_name: impl Fn(u32) -> String) -> String {
        let mut out = String::from("relation\tn\tmr\thits1\thits10\n");
        let row = |name: &str, m: &Metrics| {
            format!("{name}\t{}\t{:.6}\t{:.6}\t{:.6}\n", m.n, m.mr, m.hits1, m.hits10)
        };
        for (&r, m) in &self.per_relation {
            out.push_str(&row(&relation_name(r), m));
        }
        if let Some(m) = self.macro_avg() {
            out.push_str(&row("__macro__", &m));
        }
        out
    }

    pub fn write_tsv(&self, path: &Path, relation_name: impl Fn(u32) -> String) -> Result<()> {
        fs::write(path, self.to_tsv(relation_name)).map_err(|e| Error::io(path, e))
    }
}

fn query_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Head and tail queries for every test triple, filtered against
/// `train ∪ test`. Each query samples its candidates from its own stream.
pub fn link_prediction_eval(
    test: &[Triple],
    train: &TripleStore,
    space: &EmbeddingSpace,
    limit: usize,
    seed: u64,
) -> Result<EvalReport> {
    if limit == 0 {
        return Err(Error::InvalidArgument("candidate limit must be >= 1".into()));
    }
    let pools = SlotPools::build(train);
    let test_set: HashSet<Triple> = test.iter().copied().collect();
    let is_positive = |t: &Triple| train.contains(t) || test_set.contains(t);
    let n_entities = space.table(Table::KbEntity).rows();
    let mut ranks = Vec::with_capacity(2 * test.len());
    for (i, &t) in test.iter().enumerate() {
        for (j, slot) in [SlotKind::Head, SlotKind::Tail].into_iter().enumerate() {
            let mut rng = query_rng(seed, (2 * i + j) as u64);
            let cands = candidates_from_pools(t.r, slot, &pools, n_entities, limit, &mut rng);
            ranks.push((t.r, filtered_rank(t, slot, &cands, space, is_positive)));
        }
    }
    Ok(EvalReport::from_ranks(&ranks))
}

/// Threshold on mean distinct tails per head for a relation to count as
/// one-to-one or many-to-one.
pub const MANY_TO_ONE_MAX_TAILS: f64 = 1.2;

/// The `n_rel` most frequent one-to-one / many-to-one relations of `train`,
/// ties broken by ascending id.
pub fn select_analogy_relations(train: &TripleStore, n_rel: usize) -> Vec<u32> {
    let mut heads: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    let mut count: BTreeMap<u32, usize> = BTreeMap::new();
    for t in train.triples() {
        heads.entry(t.r).or_default().insert(t.h);
        *count.entry(t.r).or_default() += 1;
    }
    let mut eligible: Vec<(u32, usize)> = count
        .into_iter()
        .filter(|(r, c)| *c as f64 / heads[r].len() as f64 <= MANY_TO_ONE_MAX_TAILS)
        .collect();
    eligible.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    eligible.into_iter().take(n_rel).map(|(r, _)| r).collect()
}

/// `(h1, t1)` from train and `(h2, t2)` from test under one relation, as
/// text entity ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AnalogyExample {
    pub relation: u32,
    pub h1: u32,
    pub t1: u32,
    pub h2: u32,
    pub t2: u32,
}

fn supported(t: &Triple, support: &SupportSet) -> Option<(u32, u32)> {
    Some((support.text_of(t.h)?, support.text_of(t.t)?))
}

/// Above this many train × test combinations per relation, pairs are drawn
/// by rejection instead of enumerated.
const ENUMERATION_LIMIT: usize = 1 << 22;

/// Up to `n_examples` distinct analogy examples per relation. Both triples
/// must have supported endpoints, with `h1 ≠ h2` and `t1 ≠ t2` (the target
/// would otherwise be excluded from ranking).
pub fn build_analogy_set(
    train: &TripleStore,
    test: &[Triple],
    support: &SupportSet,
    relations: &[u32],
    n_examples: usize,
    seed: u64,
) -> Vec<AnalogyExample> {
    let mut out = Vec::new();
    for &r in relations {
        let firsts: Vec<(u32, u32)> = train
            .triples()
            .iter()
            .filter(|t| t.r == r)
            .filter_map(|t| supported(t, support))
            .collect();
        let seconds: Vec<(u32, u32)> = test
            .iter()
            .filter(|t| t.r == r)
            .filter_map(|t| supported(t, support))
            .collect();
        let ok = |a: (u32, u32), b: (u32, u32)| a.0 != b.0 && a.1 != b.1;
        let make = |a: (u32, u32), b: (u32, u32)| AnalogyExample {
            relation: r,
            h1: a.0,
            t1: a.1,
            h2: b.0,
            t2: b.1,
        };
        let mut rng = query_rng(seed, r as u64);
        let total = firsts.len() * seconds.len();
        if total == 0 || n_examples == 0 {
            continue;
        }
        if total <= ENUMERATION_LIMIT {
            let valid: Vec<(usize, usize)> = (0..firsts.len())
                .flat_map(|i| (0..seconds.len()).map(move |j| (i, j)))
                .filter(|&(i, j)| ok(firsts[i], seconds[j]))
                .collect();
            let picks = index::sample(&mut rng, valid.len(), n_examples.min(valid.len()));
            let mut picks = picks.into_vec();
            picks.sort_unstable();
            out.extend(picks.into_iter().map(|p| {
                let (i, j) = valid[p];
                make(firsts[i], seconds[j])
            }));
        } else {
            let mut seen = HashSet::new();
            let mut attempts = 0;
            while seen.len() < n_examples && attempts < 50 * n_examples {
                attempts += 1;
                let i = rng.random_range(0..firsts.len());
                let j = rng.random_range(0..seconds.len());
                if ok(firsts[i], seconds[j]) && seen.insert((i, j)) {
                    out.push(make(firsts[i], seconds[j]));
                }
            }
        }
    }
    out
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let n = norm(a) * norm(b);
    if n == 0.0 {
        0.0
    } else {
        dot(a, b) / n
    }
}

/// Rank of `t2` by descending cosine similarity to `e_h2 + e_t1 − e_h1`
/// among `candidates` (which exclude h1, h2 and t1). Uses text entity input
/// rows.
pub fn analogy_rank(ex: &AnalogyExample, space: &EmbeddingSpace, candidates: &[u32]) -> usize {
    let (h1, t1, h2) = (
        space.text_entity(ex.h1),
        space.text_entity(ex.t1),
        space.text_entity(ex.h2),
    );
    let q: Vec<f64> = (0..space.dim()).map(|i| h2[i] + t1[i] - h1[i]).collect();
    if norm(&q) == 0.0 {
        log::debug!("analogy {ex:?}: zero query vector, all similarities are 0");
    }
    let s_true = cosine(&q, &space.text_entity(ex.t2));
    let excluded = [ex.t2, ex.h1, ex.h2, ex.t1];
    1 + candidates
        .iter()
        .filter(|c| !excluded.contains(c))
        .filter(|&&c| cosine(&q, &space.text_entity(c)) > s_true)
        .count()
}

/// Support-set text entities with their train degree (incidence count of
/// the KB counterpart), sorted by text id.
#[derive(Debug, Clone)]
pub struct AnalogySampler {
    entities: Vec<u32>,
    degrees: Vec<usize>,
}

impl AnalogySampler {
    pub fn new(support: &SupportSet, train: &TripleStore) -> Self {
        let mut pairs: Vec<(u32, usize)> = support
            .pairs()
            .iter()
            .map(|&(k, e)| (e, train.degree(k)))
            .collect();
        pairs.sort_unstable();
        AnalogySampler {
            entities: pairs.iter().map(|p| p.0).collect(),
            degrees: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// Samples `size` entities without replacement, proportional to degree,
    /// skipping `exclude`. When the remaining pool has at most `size`
    /// members it is returned whole; otherwise zero-degree entities are
    /// never drawn.
    pub fn sample(&self, size: usize, rng: &mut impl Rng, exclude: &HashSet<u32>) -> Vec<u32> {
        let pool: Vec<usize> = (0..self.entities.len())
            .filter(|&i| !exclude.contains(&self.entities[i]))
            .collect();
        if pool.len() <= size {
            return pool.into_iter().map(|i| self.entities[i]).collect();
        }
        let weighted: Vec<usize> = pool.into_iter().filter(|&i| self.degrees[i] > 0).collect();
        let amount = size.min(weighted.len());
        let picks = index::sample_weighted(
            rng,
            weighted.len(),
            |i| self.degrees[weighted[i]] as f64,
            amount,
        )
        .expect("positive weights");
        let mut out: Vec<u32> = picks.into_iter().map(|i| self.entities[weighted[i]]).collect();
        out.sort_unstable();
        out
    }
}

pub fn analogy_candidates(
    support: &SupportSet,
    train: &TripleStore,
    size: usize,
    rng: &mut impl Rng,
    exclude: &HashSet<u32>,
) -> Result<Vec<u32>> {
    if size == 0 {
        return Err(Error::InvalidArgument("candidate size must be >= 1".into()));
    }
    Ok(AnalogySampler::new(support, train).sample(size, rng, exclude))
}

/// Ranks every example against a fresh candidate sample drawn from the
/// example's own stream.
pub fn analogy_eval(
    examples: &[AnalogyExample],
    space: &EmbeddingSpace,
    sampler: &AnalogySampler,
    candidate_size: usize,
    seed: u64,
) -> Result<EvalReport> {
    if candidate_size == 0 {
        return Err(Error::InvalidArgument("candidate size must be >= 1".into()));
    }
    let ranks: Vec<(u32, usize)> = examples
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let mut rng = query_rng(seed, i as u64);
            let exclude: HashSet<u32> = [ex.h1, ex.h2, ex.t1].into_iter().collect();
            let cands = sampler.sample(candidate_size, &mut rng, &exclude);
            (ex.relation, analogy_rank(ex, space, &cands))
        })
        .collect();
    Ok(EvalReport::from_ranks(&ranks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::SpaceShape;
    use proptest::prelude::*;

    fn store(ts: &[(u32, u32, u32)]) -> TripleStore {
        ts.iter().map(|&(h, r, t)| Triple::new(h, r, t)).collect()
    }

    #[test]
    fn candidate_pool_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = store(&[(0, 0, 1), (2, 0, 3), (4, 0, 5)]);
        let c = build_candidate_set(0, SlotKind::Tail, &s, 3000, 1000, &mut rng).unwrap();
        assert_eq!(c.entities, vec![1, 3, 5]);

        let big: TripleStore = (0..2000).map(|i| Triple::new(i, 0, 2000 + i)).collect();
        let c = build_candidate_set(0, SlotKind::Head, &big, 4000, 1000, &mut rng).unwrap();
        let set: HashSet<u32> = c.entities.iter().copied().collect();
        assert_eq!(set.len(), 1000);
        assert!(c.entities.iter().all(|&e| e < 2000));

        let c = build_candidate_set(7, SlotKind::Head, &s, 6, 1000, &mut rng).unwrap();
        assert_eq!(c.entities, vec![0, 1, 2, 3, 4, 5]);
        assert!(build_candidate_set(0, SlotKind::Head, &s, 6, 0, &mut rng).is_err());
    }

    /// Space where entity `i` sits at `pos[i]` on the first axis and the
    /// relation is zero, so `d(h, r, t) = |pos[h] − pos[t]|`.
    fn line_space(pos: &[f64]) -> EmbeddingSpace {
        let s = EmbeddingSpace::zeros(SpaceShape {
            kb_entities: pos.len(),
            relations: 1,
            words: 1,
            text_entities: pos.len(),
            dim: 2,
        });
        for (i, &p) in pos.iter().enumerate() {
            s.table(Table::KbEntity).write_row(i, &[p, 0.0]);
        }
        s
    }

    #[test]
    fn filtered_rank_examples() {
        let s = line_space(&[0.0, 0.1, 0.05, 0.2, -0.2]);
        let t = Triple::new(0, 0, 1);
        let only_true = CandidateSet { relation: 0, slot: SlotKind::Tail, entities: vec![1] };
        assert_eq!(filtered_rank(t, SlotKind::Tail, &only_true, &s, |_| false), 1);

        let cands = CandidateSet { relation: 0, slot: SlotKind::Tail, entities: vec![2, 3, 4] };
        assert_eq!(filtered_rank(t, SlotKind::Tail, &cands, &s, |_| false), 2);
        let positive = Triple::new(0, 0, 2);
        assert_eq!(filtered_rank(t, SlotKind::Tail, &cands, &s, |c| *c == positive), 1);
    }

    #[test]
    fn empty_and_perfect_reports() {
        let s = line_space(&[0.0, 0.0]);
        let train = store(&[(0, 0, 1)]);
        assert!(link_prediction_eval(&[], &train, &s, 10, 0).unwrap().is_empty());
        let r = link_prediction_eval(&[Triple::new(1, 0, 0)], &train, &s, 10, 0).unwrap();
        let m = r.macro_avg().unwrap();
        assert_eq!((m.mr, m.hits1, m.hits10, m.n), (1.0, 1.0, 1.0, 2));
    }

    #[test]
    fn relation_selection() {
        let mut ts = vec![];
        // r0: functional, 3 triples; r1: 3 tails per head; r2: functional, 3 triples
        for h in 0..3 {
            ts.push((h, 0, 10));
            ts.push((h, 2, 11));
            for t in 0..3 {
                ts.push((h, 1, 20 + t));
            }
        }
        let s = store(&ts);
        assert_eq!(select_analogy_relations(&s, 5), vec![0, 2]);
        assert_eq!(select_analogy_relations(&s, 1), vec![0]);
    }

    #[test]
    fn analogy_set_pools() {
        let support = SupportSet::from_pairs((0..10).map(|k| (k, k + 100))).0;
        let train = store(&[(0, 0, 1)]);
        assert!(build_analogy_set(&train, &[], &support, &[0], 10, 0).is_empty());
        let ex = build_analogy_set(&train, &[Triple::new(2, 0, 3)], &support, &[0], 10, 0);
        assert_eq!(
            ex,
            vec![AnalogyExample { relation: 0, h1: 100, t1: 101, h2: 102, t2: 103 }]
        );
    }

    fn text_space(vecs: &[[f64; 2]]) -> EmbeddingSpace {
        let s = EmbeddingSpace::zeros(SpaceShape {
            kb_entities: 1,
            relations: 1,
            words: 1,
            text_entities: vecs.len(),
            dim: 2,
        });
        for (i, v) in vecs.iter().enumerate() {
            s.table(Table::EntityIn).write_row(i, v);
        }
        s
    }

    #[test]
    fn analogy_rank_examples() {
        // h1=0, t1=1, h2=2 give q = (1, 0); t2=3
        let s = text_space(&[[0.0, 1.0], [1.0, 1.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let ex = AnalogyExample { relation: 0, h1: 0, t1: 1, h2: 2, t2: 3 };
        assert_eq!(analogy_rank(&ex, &s, &[3, 4]), 1);

        // cosines: candidate 4 → 0.9, t2 → 0.5
        let c9 = [0.9, (1.0f64 - 0.81).sqrt()];
        let c5 = [0.5, (1.0f64 - 0.25).sqrt()];
        let s = text_space(&[[0.0, 1.0], [1.0, 1.0], [0.0, 0.0], c5, c9]);
        assert_eq!(analogy_rank(&ex, &s, &[3, 4]), 2);

        // zero query: everything ties at 0
        let s = text_space(&[[1.0, 0.0], [0.0, 0.0], [1.0, 0.0], [3.0, 1.0], [1.0, 1.0]]);
        assert_eq!(analogy_rank(&ex, &s, &[3, 4]), 1);
    }

    #[test]
    fn analogy_candidate_rules() {
        let support = SupportSet::from_pairs((0..5).map(|k| (k, k))).0;
        let train = store(&[(0, 0, 1), (2, 0, 3), (4, 0, 0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ex: HashSet<u32> = [1, 2].into_iter().collect();
        let c = analogy_candidates(&support, &train, 10, &mut rng, &ex).unwrap();
        assert_eq!(c, vec![0, 3, 4]);
        for _ in 0..100 {
            let c = analogy_candidates(&support, &train, 2, &mut rng, &ex).unwrap();
            assert_eq!(c.len(), 2);
            assert!(c.iter().all(|e| !ex.contains(e)));
        }
    }

    #[test]
    fn equal_degree_sampling_is_uniform() {
        // ring: every entity has degree 2
        let n = 20u32;
        let support = SupportSet::from_pairs((0..n).map(|k| (k, k))).0;
        let train: TripleStore = (0..n).map(|i| Triple::new(i, 0, (i + 1) % n)).collect();
        let sampler = AnalogySampler::new(&support, &train);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counts = vec![0usize; n as usize];
        let draws = 100_000;
        for _ in 0..draws {
            for e in sampler.sample(1, &mut rng, &HashSet::new()) {
                counts[e as usize] += 1;
            }
        }
        let expect = draws as f64 / n as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        // 19 degrees of freedom; 0.999 quantile is about 43.8
        assert!(chi2 < 43.8, "chi2 = {chi2}");
    }

    proptest! {
        #[test]
        fn rank_bounds_and_filtering(
            pos in proptest::collection::vec(-1.0f64..1.0, 6),
            cands in proptest::collection::btree_set(0u32..6, 1..6),
            pos_mask in proptest::collection::vec(any::<bool>(), 6),
        ) {
            let s = line_space(&pos);
            let t = Triple::new(0, 0, 1);
            let c = CandidateSet { relation: 0, slot: SlotKind::Tail, entities: cands.into_iter().collect() };
            let known = |x: &Triple| pos_mask[x.t as usize];
            let filtered = filtered_rank(t, SlotKind::Tail, &c, &s, known);
            let raw = filtered_rank(t, SlotKind::Tail, &c, &s, |_| false);
            prop_assert!(filtered >= 1 && filtered <= 1 + c.entities.len());
            prop_assert!(filtered <= raw);
        }

        #[test]
        fn hits_ordering(ranks in proptest::collection::vec((0u32..3, 1usize..30), 1..40)) {
            let r = EvalReport::from_ranks(&ranks);
            for m in r.per_relation.values().copied().chain(r.macro_avg()) {
                prop_assert!(0.0 <= m.hits1 && m.hits1 <= m.hits10 && m.hits10 <= 1.0);
                prop_assert!(m.mr >= 1.0);
            }
        }

        #[test]
        fn analogy_rank_scale_and_rotation_invariant(
            vecs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6),
            scale in 0.1f64..10.0,
            angle in 0.0f64..std::f64::consts::TAU,
        ) {
            let base: Vec<[f64; 2]> = vecs.iter().map(|&(a, b)| [a, b]).collect();
            let ex = AnalogyExample { relation: 0, h1: 0, t1: 1, h2: 2, t2: 3 };
            let cands = [3, 4, 5];
            let r0 = analogy_rank(&ex, &text_space(&base), &cands);
            let scaled: Vec<[f64; 2]> = base.iter().map(|v| [v[0] * scale, v[1] * scale]).collect();
            prop_assert_eq!(analogy_rank(&ex, &text_space(&scaled), &cands), r0);
            // rotation by a multiple of π/2 is exact in floating point
            let quarter = (angle / std::f64::consts::FRAC_PI_2) as usize % 4;
            let rot: Vec<[f64; 2]> = base
                .iter()
                .map(|v| match quarter {
                    0 => *v,
                    1 => [-v[1], v[0]],
                    2 => [-v[0], -v[1]],
                    _ => [v[1], -v[0]],
                })
                .collect();
            prop_assert_eq!(analogy_rank(&ex, &text_space(&rot), &cands), r0);
        }

        #[test]
        fn analogy_examples_satisfy_invariants(
            raw in proptest::collection::vec((0u32..12, 0u32..2, 0u32..12), 1..40),
            split in proptest::collection::vec(any::<bool>(), 40),
            member in proptest::collection::vec(any::<bool>(), 12),
        ) {
            let all: Vec<Triple> = raw.iter().map(|&(h, r, t)| Triple::new(h, r, t)).collect();
            let train: TripleStore = all.iter().zip(&split).filter(|(_, &s)| s).map(|(t, _)| *t).collect();
            let test: Vec<Triple> = all.iter().zip(&split).filter(|(t, &s)| !s && !train.contains(t)).map(|(t, _)| *t).collect();
            let support = SupportSet::from_pairs((0..12u32).filter(|&k| member[k as usize]).map(|k| (k, k + 50))).0;
            for ex in build_analogy_set(&train, &test, &support, &[0, 1], 20, 3) {
                let kb = |e: u32| support.kb_of(e).unwrap();
                prop_assert!(train.contains(&Triple::new(kb(ex.h1), ex.relation, kb(ex.t1))));
                prop_assert!(test.contains(&Triple::new(kb(ex.h2), ex.relation, kb(ex.t2))));
                prop_assert!(ex.h1 != ex.h2);
            }
        }
    }
}
