//! Deterministic synthetic worlds with planted relational structure shared
//! between a KB and an anchored corpus.
//!
//! Every entity belongs to a cluster. Link relations join each entity to a
//! few cluster mates (one-to-many). Every other relation picks one target
//! entity per cluster and maps each entity to its cluster's target, or to a
//! random target of the relation with probability `1 - cluster_fidelity`
//! (many-to-one). Each fact between two text-covered entities becomes a
//! sentence `[[h]] <rel words> [[t]] <name of t>` on both pages.

use std::fs;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::{Corpus, Document, SupportSet, Token, Triple, TripleStore, Vocabulary};
use crate::seeds::stage_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub n_entities: usize,
    pub n_relations: usize,
    /// Fraction of all true facts emitted as KB triples.
    pub kb_density: f64,
    /// Fraction of entities with a page (and a seed-map entry).
    pub text_coverage: f64,
    /// Fraction of all true facts kept out of the KB and expressed in text
    /// only.
    pub withheld_fraction: f64,
    /// Filler tokens opening each page.
    pub doc_length: usize,
    pub seed: u64,
    /// Entity clusters; members share most of their targets.
    pub n_clusters: usize,
    /// Probability that an entity takes its cluster's target for a relation.
    pub cluster_fidelity: f64,
    /// Size of the filler word vocabulary.
    pub filler_words: usize,
    /// Leading relations that link entities to cluster mates (one-to-many)
    /// instead of mapping them to targets.
    pub link_relations: usize,
    /// Cluster mates each entity links to per link relation.
    pub links_per_item: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            n_entities: 1000,
            n_relations: 20,
            kb_density: 0.9,
            text_coverage: 0.9,
            withheld_fraction: 0.1,
            doc_length: 10,
            seed: 0,
            n_clusters: 30,
            cluster_fidelity: 0.8,
            filler_words: 200,
            link_relations: 1,
            links_per_item: 2,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let ratios = [
            ("kb_density", self.kb_density),
            ("text_coverage", self.text_coverage),
            ("withheld_fraction", self.withheld_fraction),
            ("cluster_fidelity", self.cluster_fidelity),
        ];
        for (name, v) in ratios {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} = {v} outside [0, 1]")));
            }
        }
        let counts = [
            ("n_entities", self.n_entities),
            ("n_relations", self.n_relations),
            ("n_clusters", self.n_clusters),
            ("filler_words", self.filler_words),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }
}

/// A generated world in the ingest module's representation.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub vocab: Vocabulary,
    pub store: TripleStore,
    pub corpus: Corpus,
    pub support: SupportSet,
    /// True facts expressed only in text.
    pub withheld: Vec<Triple>,
}

pub const TRIPLES_FILE: &str = "triples.tsv";
pub const CORPUS_FILE: &str = "corpus.txt";
pub const SEEDS_FILE: &str = "seeds.tsv";
pub const WITHHELD_FILE: &str = "withheld.tsv";

impl World {
    /// Writes the triples, corpus, seed map and withheld facts into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.store.write(&dir.join(TRIPLES_FILE), &self.vocab)?;
        self.corpus.write(&dir.join(CORPUS_FILE), &self.vocab)?;
        self.support.write(&dir.join(SEEDS_FILE), &self.vocab)?;
        crate::ingest::write_triples(&dir.join(WITHHELD_FILE), &self.withheld, &self.vocab)
    }
}

fn entity_name(e: usize) -> String {
    format!("Q{e}")
}

fn relation_name(r: usize) -> String {
    format!("P{r}")
}

/// Interns names in the order and with the counts a loader of the written
/// files would produce.
struct Builder {
    vocab: Vocabulary,
    store: TripleStore,
}

impl Builder {
    fn triple(&mut self, h: usize, r: usize, t: usize) {
        let v = &mut self.vocab;
        let h = v.kb_entities.intern(&entity_name(h));
        let r = v.relations.intern(&relation_name(r));
        let t = v.kb_entities.intern(&entity_name(t));
        if self.store.insert(Triple::new(h, r, t)) {
            v.kb_entities.bump(h, 1);
            v.kb_entities.bump(t, 1);
            v.relations.bump(r, 1);
        }
    }

    fn word(&mut self, w: &str) -> Token {
        let id = self.vocab.words.intern(w);
        self.vocab.words.bump(id, 1);
        Token::Word(id)
    }

    fn entity(&mut self, e: usize) -> u32 {
        let id = self.vocab.text_entities.intern(&entity_name(e));
        self.vocab.text_entities.bump(id, 1);
        id
    }
}

pub fn generate_world(config: &WorldConfig) -> Result<World> {
    config.validate()?;
    if config.n_entities < config.n_clusters.max(2) {
        return Err(Error::Generation(format!(
            "{} entities cannot fill {} clusters and relation ranges",
            config.n_entities, config.n_clusters
        )));
    }
    let rng_for = |stage: &str| ChaCha8Rng::seed_from_u64(stage_seed(config.seed, stage));

    // relations below `link_relations` join cluster mates; each other
    // relation has a range of one target entity per cluster
    let n_links = config.link_relations.min(config.n_relations);
    let mut rng = rng_for("world/structure");
    let ranges: Vec<Vec<usize>> = (n_links..config.n_relations)
        .map(|_| index::sample(&mut rng, config.n_entities, config.n_clusters).into_vec())
        .collect();
    let cluster_of: Vec<usize> = (0..config.n_entities)
        .map(|_| rng.random_range(0..config.n_clusters))
        .collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); config.n_clusters];
    for (e, &c) in cluster_of.iter().enumerate() {
        members[c].push(e);
    }

    let mut facts = Vec::with_capacity(config.n_entities * config.n_relations);
    for (item, &cluster) in cluster_of.iter().enumerate() {
        for r in 0..n_links {
            let mates: Vec<usize> = members[cluster].iter().copied().filter(|&m| m != item).collect();
            let k = config.links_per_item.min(mates.len());
            let mut picked: Vec<usize> = index::sample(&mut rng, mates.len(), k)
                .into_iter()
                .map(|i| mates[i])
                .collect();
            picked.sort_unstable();
            facts.extend(picked.into_iter().map(|m| (item, r, m)));
        }
        for (j, range) in ranges.iter().enumerate() {
            let mut t = if rng.random_bool(config.cluster_fidelity) {
                range[cluster]
            } else {
                range[rng.random_range(0..range.len())]
            };
            while t == item {
                t = range[rng.random_range(0..range.len())];
            }
            facts.push((item, n_links + j, t));
        }
    }

    let mut rng = rng_for("world/coverage");
    let n_covered = (config.text_coverage * config.n_entities as f64).round() as usize;
    let mut covered = vec![false; config.n_entities];
    for e in index::sample(&mut rng, config.n_entities, n_covered) {
        covered[e] = true;
    }
    let both_covered = |&(h, _, t): &(usize, usize, usize)| covered[h] && covered[t];

    let mut rng = rng_for("world/withheld");
    let n_withheld = (config.withheld_fraction * facts.len() as f64).round() as usize;
    let eligible: Vec<usize> = (0..facts.len()).filter(|&i| both_covered(&facts[i])).collect();
    if eligible.len() < n_withheld {
        return Err(Error::Generation(format!(
            "{n_withheld} withheld facts requested but only {} have both endpoints covered",
            eligible.len()
        )));
    }
    let mut is_withheld = vec![false; facts.len()];
    for i in index::sample(&mut rng, eligible.len(), n_withheld) {
        is_withheld[eligible[i]] = true;
    }

    let mut rng = rng_for("world/kb");
    let open: Vec<usize> = (0..facts.len()).filter(|&i| !is_withheld[i]).collect();
    let n_kb = ((config.kb_density * facts.len() as f64).round() as usize).min(open.len());
    let mut in_kb = vec![false; facts.len()];
    for i in index::sample(&mut rng, open.len(), n_kb) {
        in_kb[open[i]] = true;
    }

    let mut b = Builder {
        vocab: Vocabulary::new(),
        store: TripleStore::new(),
    };
    for (i, &(h, r, t)) in facts.iter().enumerate() {
        if in_kb[i] {
            b.triple(h, r, t);
        }
    }

    // pages: filler, then one sentence per covered fact touching the page
    let mut rng = rng_for("world/text");
    let mut sentences: Vec<Vec<usize>> = vec![Vec::new(); config.n_entities];
    for (i, f) in facts.iter().enumerate() {
        if both_covered(f) {
            sentences[f.0].push(i);
            sentences[f.2].push(i);
        }
    }
    let filler = |rng: &mut ChaCha8Rng| format!("w{}", rng.random_range(0..config.filler_words));
    let mut corpus = Corpus::default();
    for e in 0..config.n_entities {
        if !covered[e] || sentences[e].is_empty() {
            continue;
        }
        let page = b.entity(e);
        let mut tokens = Vec::new();
        for _ in 0..config.doc_length {
            let w = filler(&mut rng);
            tokens.push(b.word(&w));
        }
        let mut order = sentences[e].clone();
        order.shuffle(&mut rng);
        for i in order {
            let (h, r, t) = facts[i];
            let w = filler(&mut rng);
            tokens.push(b.word(&w));
            tokens.push(Token::Anchor(b.entity(h)));
            tokens.push(b.word(&format!("r{r}a")));
            tokens.push(b.word(&format!("r{r}b")));
            tokens.push(Token::Anchor(b.entity(t)));
            tokens.push(b.word(&format!("n{t}")));
        }
        corpus.documents.push(Document {
            page: Some(page),
            tokens,
        });
    }

    let Builder { vocab, store } = b;
    let pairs = (0..config.n_entities).filter(|&e| covered[e]).filter_map(|e| {
        let name = entity_name(e);
        Some((vocab.kb_entities.id(&name)?, vocab.text_entities.id(&name)?))
    });
    let support = SupportSet::from_pairs(pairs).0;

    let mut withheld = Vec::new();
    for (i, &(h, r, t)) in facts.iter().enumerate() {
        if !is_withheld[i] {
            continue;
        }
        let ids = (
            vocab.kb_entities.id(&entity_name(h)),
            vocab.relations.id(&relation_name(r)),
            vocab.kb_entities.id(&entity_name(t)),
        );
        match ids {
            (Some(h), Some(r), Some(t)) => withheld.push(Triple::new(h, r, t)),
            _ => log::warn!("withheld fact Q{h} P{r} Q{t} names an entity absent from the KB"),
        }
    }

    Ok(World {
        vocab,
        store,
        corpus,
        support,
        withheld,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::make_fewshot_split;

    fn small() -> WorldConfig {
        WorldConfig {
            n_entities: 200,
            n_relations: 5,
            ..WorldConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate_world(&small()).unwrap(), generate_world(&small()).unwrap());
        let other = WorldConfig { seed: 1, ..small() };
        assert_ne!(generate_world(&small()).unwrap(), generate_world(&other).unwrap());
    }

    #[test]
    fn zero_coverage_has_no_text() {
        let w = generate_world(&WorldConfig {
            text_coverage: 0.0,
            withheld_fraction: 0.0,
            ..small()
        })
        .unwrap();
        assert!(w.support.is_empty());
        assert!(w.corpus.is_empty());
        assert!(!w.store.is_empty());
    }

    #[test]
    fn default_world_counts() {
        let cfg = WorldConfig::default();
        let w = generate_world(&cfg).unwrap();
        let n_facts = w.store.len() + w.withheld.len();
        let frac = w.withheld.len() as f64 / n_facts as f64;
        assert!((frac - 0.1).abs() < 0.01, "withheld fraction {frac}");
        assert!(w.withheld.iter().all(|t| !w.store.contains(t)));
        assert!(w
            .withheld
            .iter()
            .all(|t| w.support.contains_kb(t.h) && w.support.contains_kb(t.t)));
        let tokens = w.corpus.token_count();
        assert!((100_000..400_000).contains(&tokens), "{tokens} tokens");
    }

    #[test]
    fn infeasible_configs() {
        assert!(generate_world(&WorldConfig { n_entities: 1, ..small() }).is_err());
        assert!(generate_world(&WorldConfig { n_relations: 0, ..small() }).is_err());
        assert!(generate_world(&WorldConfig {
            text_coverage: 0.0,
            withheld_fraction: 0.5,
            ..small()
        })
        .is_err());
    }

    #[test]
    fn files_reload_to_the_same_world() {
        let w = generate_world(&small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        w.write(dir.path()).unwrap();
        let mut vocab = Vocabulary::new();
        let store = TripleStore::load(&dir.path().join(TRIPLES_FILE), &mut vocab).unwrap();
        let corpus = Corpus::load(&dir.path().join(CORPUS_FILE), &mut vocab).unwrap();
        let (support, stats) = SupportSet::load(&dir.path().join(SEEDS_FILE), &vocab).unwrap();
        assert_eq!(vocab, w.vocab);
        assert_eq!(store, w.store);
        assert_eq!(corpus, w.corpus);
        assert_eq!(support, w.support);
        assert_eq!(stats.conflicts + stats.unknown, 0);
    }

    #[test]
    fn analogy_relations_survive_the_split() {
        let w = generate_world(&WorldConfig::default()).unwrap();
        let split = make_fewshot_split(&w.store, &w.support, 0.1, 0).unwrap();
        let rels = crate::eval::select_analogy_relations(&split.train, 50);
        assert_eq!(rels.len(), 19);
        for r in rels {
            assert!(split.train.triples().iter().any(|t| t.r == r));
            assert!(split.test.iter().any(|t| t.r == r));
        }
    }
}
