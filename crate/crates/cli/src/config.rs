//! Run settings: flat `key=value` files with command-line overrides.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kbtext::alignment::{AlignMethod, AlignmentConfig};
use kbtext::datagen::WorldConfig;
use kbtext::ingest::Thresholds;
use kbtext::kbe::Corruption;
use kbtext::trainer::TrainConfig;
use kbtext::Error;

pub const MANIFEST: &str = "manifest.txt";

/// Every knob a command may read. Unset paths stay `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub seed: u64,

    pub triples: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub seeds: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub out: Option<PathBuf>,

    pub thresholds: Thresholds,
    pub fewshot_fraction: f64,

    pub world: WorldConfig,
    pub train: TrainConfig,
    pub support_only: bool,

    pub candidates: usize,
    pub analogy_relations: usize,
    pub analogy_examples: usize,
    pub lambdas: Vec<f64>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: 0,
            triples: None,
            corpus: None,
            seeds: None,
            data: None,
            embeddings: None,
            out: None,
            thresholds: Thresholds::default(),
            fewshot_fraction: 0.1,
            world: WorldConfig::default(),
            train: TrainConfig::default(),
            support_only: false,
            candidates: 1000,
            analogy_relations: 50,
            analogy_examples: 200,
            lambdas: Vec::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, Error>
where
    T::Err: Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::InvalidArgument(format!("{key} = `{value}`: {e}")))
}

/// Comma-separated λ values; an empty string is an empty list.
pub fn parse_lambdas(value: &str) -> Result<Vec<f64>, Error> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse("lambdas", s))
        .collect()
}

fn path_entry(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn opt_path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl Settings {
    /// Applies one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        let w = &mut self.world;
        let t = &mut self.train;
        match key.trim() {
            "seed" => {
                self.seed = parse(key, value)?;
                w.seed = self.seed;
                t.seed = self.seed;
            }
            "triples" => self.triples = opt_path(value),
            "corpus" => self.corpus = opt_path(value),
            "seeds" => self.seeds = opt_path(value),
            "data" => self.data = opt_path(value),
            "embeddings" => self.embeddings = opt_path(value),
            "out" => self.out = opt_path(value),

            "entity_min" => self.thresholds.entity_min = parse(key, value)?,
            "relation_min" => self.thresholds.relation_min = parse(key, value)?,
            "word_min" => self.thresholds.word_min = parse(key, value)?,
            "fewshot_fraction" => self.fewshot_fraction = parse(key, value)?,

            "n_entities" => w.n_entities = parse(key, value)?,
            "n_relations" => w.n_relations = parse(key, value)?,
            "kb_density" => w.kb_density = parse(key, value)?,
            "text_coverage" => w.text_coverage = parse(key, value)?,
            "withheld_fraction" => w.withheld_fraction = parse(key, value)?,
            "doc_length" => w.doc_length = parse(key, value)?,
            "n_clusters" => w.n_clusters = parse(key, value)?,
            "cluster_fidelity" => w.cluster_fidelity = parse(key, value)?,
            "filler_words" => w.filler_words = parse(key, value)?,
            "link_relations" => w.link_relations = parse(key, value)?,
            "links_per_item" => w.links_per_item = parse(key, value)?,

            "epochs" => t.epochs = parse(key, value)?,
            "dim" => t.dim = parse(key, value)?,
            "lr_kbe" => t.lr_kbe = parse(key, value)?,
            "lr_sg" => t.lr_sg = parse(key, value)?,
            "threads" => t.threads = parse(key, value)?,
            "serial" => t.serial_deterministic = parse(key, value)?,
            "gamma" => t.kbe.gamma = parse(key, value)?,
            "neg_per_pos" => t.kbe.neg_per_pos = parse(key, value)?,
            "corruption" => t.kbe.corruption = parse::<Corruption>(key, value)?,
            "window" => t.window = parse(key, value)?,
            "k_neg_sg" => t.k_neg_sg = parse(key, value)?,
            "noise_power" => t.noise_power = parse(key, value)?,
            "align_method" => t.align.method = parse::<AlignMethod>(key, value)?,
            "lambda" => t.align.lambda = parse(key, value)?,
            "support_only" => self.support_only = parse(key, value)?,

            "candidates" => self.candidates = parse(key, value)?,
            "analogy_relations" => self.analogy_relations = parse(key, value)?,
            "analogy_examples" => self.analogy_examples = parse(key, value)?,
            "lambdas" => self.lambdas = parse_lambdas(value)?,
            other => return Err(Error::InvalidArgument(format!("unknown setting `{other}`"))),
        }
        Ok(())
    }

    /// Applies every `key=value` line of `path`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn load_file(&mut self, path: &Path) -> Result<(), Error> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected key=value".into(),
            })?;
            self.set(k, v).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Every setting as `(key, value)`, in a fixed order. Feeding the
    /// pairs back through [`Settings::set`] reproduces `self`.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let w = &self.world;
        let t = &self.train;
        let lambdas: Vec<String> = self.lambdas.iter().map(|l| format!("{l:e}")).collect();
        vec![
            ("seed", self.seed.to_string()),
            ("triples", path_entry(&self.triples)),
            ("corpus", path_entry(&self.corpus)),
            ("seeds", path_entry(&self.seeds)),
            ("data", path_entry(&self.data)),
            ("embeddings", path_entry(&self.embeddings)),
            ("out", path_entry(&self.out)),
            ("entity_min", self.thresholds.entity_min.to_string()),
            ("relation_min", self.thresholds.relation_min.to_string()),
            ("word_min", self.thresholds.word_min.to_string()),
            ("fewshot_fraction", self.fewshot_fraction.to_string()),
            ("n_entities", w.n_entities.to_string()),
            ("n_relations", w.n_relations.to_string()),
            ("kb_density", w.kb_density.to_string()),
            ("text_coverage", w.text_coverage.to_string()),
            ("withheld_fraction", w.withheld_fraction.to_string()),
            ("doc_length", w.doc_length.to_string()),
            ("n_clusters", w.n_clusters.to_string()),
            ("cluster_fidelity", w.cluster_fidelity.to_string()),
            ("filler_words", w.filler_words.to_string()),
            ("link_relations", w.link_relations.to_string()),
            ("links_per_item", w.links_per_item.to_string()),
            ("epochs", t.epochs.to_string()),
            ("dim", t.dim.to_string()),
            ("lr_kbe", t.lr_kbe.to_string()),
            ("lr_sg", t.lr_sg.to_string()),
            ("threads", t.threads.to_string()),
            ("serial", t.serial_deterministic.to_string()),
            ("gamma", t.kbe.gamma.to_string()),
            ("neg_per_pos", t.kbe.neg_per_pos.to_string()),
            ("corruption", t.kbe.corruption.to_string()),
            ("window", t.window.to_string()),
            ("k_neg_sg", t.k_neg_sg.to_string()),
            ("noise_power", t.noise_power.to_string()),
            ("align_method", t.align.method.to_string()),
            ("lambda", t.align.lambda.to_string()),
            ("support_only", self.support_only.to_string()),
            ("candidates", self.candidates.to_string()),
            ("analogy_relations", self.analogy_relations.to_string()),
            ("analogy_examples", self.analogy_examples.to_string()),
            ("lambdas", lambdas.join(",")),
        ]
    }

    /// Writes the manifest: the command name as a comment, then every
    /// setting.
    pub fn write_manifest(&self, dir: &Path, command: &str) -> Result<(), Error> {
        let mut text = format!("# kbtext {command}\n");
        for (k, v) in self.entries() {
            text.push_str(&format!("{k}={v}\n"));
        }
        let path = dir.join(MANIFEST);
        fs::write(&path, text).map_err(|source| Error::Io { path, source })
    }

    pub fn with_lambda(&self, method: AlignMethod, lambda: f64) -> Settings {
        let mut s = self.clone();
        s.train.align = AlignmentConfig { method, lambda };
        s
    }

    pub fn require<'a>(&self, p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, Error> {
        p.as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("missing setting `{key}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_round_trip() {
        let mut s = Settings::default();
        s.set("lambdas", "10, 1e-3,0.1").unwrap();
        s.set("align_method", "anchors").unwrap();
        s.set("data", "/tmp/x").unwrap();
        s.set("corruption", "tail").unwrap();
        s.set("seed", "9").unwrap();
        let mut back = Settings::default();
        for (k, v) in s.entries() {
            back.set(k, &v).unwrap();
        }
        assert_eq!(back, s);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut s = Settings::default();
        assert!(s.set("learning_rate", "0.1").is_err());
        assert!(s.set("epochs", "ten").is_err());
    }

    #[test]
    fn empty_lambda_list() {
        assert!(parse_lambdas("").unwrap().is_empty());
        assert_eq!(parse_lambdas("1e-4,1").unwrap(), vec![1e-4, 1.0]);
    }

    #[test]
    fn file_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "# comment\n\nepochs = 3\nlambda=0.5\n").unwrap();
        let mut s = Settings::default();
        s.load_file(&path).unwrap();
        assert_eq!(s.train.epochs, 3);
        assert_eq!(s.train.align.lambda, 0.5);
        fs::write(&path, "epochs\n").unwrap();
        assert!(matches!(s.load_file(&path), Err(Error::Parse { line: 1, .. })));
    }
}
