//! The subcommands, each reading everything it needs from [`Settings`].

use std::fs;
use std::path::{Path, PathBuf};

use kbtext::alignment::mean_projection_residual;
use kbtext::datagen::{generate_world, CORPUS_FILE, SEEDS_FILE, TRIPLES_FILE};
use kbtext::eval::{
    analogy_eval, build_analogy_set, link_prediction_eval, select_analogy_relations,
    AnalogySampler, EvalReport,
};
use kbtext::ingest::{
    apply_frequency_filters, make_fewshot_split, restrict_to_support, write_triples, Corpus,
    SupportSet, Triple, TripleStore, Vocabulary,
};
use kbtext::seeds::stage_seed;
use kbtext::space::EmbeddingSpace;
use kbtext::trainer::{export_space, import_space, train, write_training_log, TrainData};
use kbtext::{Error, Result};

use crate::config::Settings;

pub const TRAIN_FILE: &str = "train.tsv";
pub const TEST_FILE: &str = "test.tsv";
pub const MISSING_SUPPORT_FILE: &str = "missing_support.tsv";
pub const FEWSHOT_FILE: &str = "fewshot_entities.txt";
pub const LOG_FILE: &str = "training_log.tsv";
pub const SWEEP_FILE: &str = "sweep.tsv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Lp,
    Analogy,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Lp => "lp",
            Task::Analogy => "analogy",
        }
    }
}

fn existing(p: &Path) -> Result<&Path> {
    if p.exists() {
        Ok(p)
    } else {
        Err(Error::Io {
            path: p.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        })
    }
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|source| Error::Io {
        path: p.to_path_buf(),
        source,
    })
}

pub fn generate(s: &Settings) -> Result<()> {
    let out = s.require(&s.out, "out")?;
    let world = generate_world(&s.world)?;
    world.write(out)?;
    s.write_manifest(out, "generate")?;
    log::info!(
        "generated {} triples, {} documents, {} seed pairs, {} withheld facts",
        world.store.len(),
        world.corpus.len(),
        world.support.len(),
        world.withheld.len()
    );
    Ok(())
}

pub fn preprocess(s: &Settings) -> Result<()> {
    let triples = existing(s.require(&s.triples, "triples")?)?;
    let corpus = existing(s.require(&s.corpus, "corpus")?)?;
    let seeds = existing(s.require(&s.seeds, "seeds")?)?;
    let out = s.require(&s.out, "out")?;

    let mut vocab = Vocabulary::new();
    let store = TripleStore::load(triples, &mut vocab)?;
    let corpus = Corpus::load(corpus, &mut vocab)?;
    let filtered = apply_frequency_filters(&store, &corpus, &vocab, s.thresholds);
    let (support, stats) = SupportSet::load(seeds, &filtered.vocab)?;
    let split = make_fewshot_split(
        &filtered.store,
        &support,
        s.fewshot_fraction,
        stage_seed(s.seed, "split"),
    )?;

    create_dir(out)?;
    let v = &filtered.vocab;
    v.write_dir(out)?;
    filtered.store.write(&out.join(TRIPLES_FILE), v)?;
    filtered.corpus.write(&out.join(CORPUS_FILE), v)?;
    support.write(&out.join(SEEDS_FILE), v)?;
    split.train.write(&out.join(TRAIN_FILE), v)?;
    write_triples(&out.join(TEST_FILE), &split.test, v)?;
    write_triples(&out.join(MISSING_SUPPORT_FILE), &split.missing_support, v)?;
    let fewshot: String = split
        .fewshot_entities
        .iter()
        .map(|&e| format!("{}\n", v.kb_entities.name(e)))
        .collect();
    let path = out.join(FEWSHOT_FILE);
    fs::write(&path, fewshot).map_err(|source| Error::Io { path, source })?;
    s.write_manifest(out, "preprocess")?;
    log::info!(
        "kept {} of {} triples; support {} ({} unknown seed pairs); train {}, test {}, few-shot entities {}",
        filtered.store.len(),
        store.len(),
        support.len(),
        stats.unknown,
        split.train.len(),
        split.test.len(),
        split.fewshot_entities.len()
    );
    Ok(())
}

/// A preprocessed data directory.
struct Data {
    vocab: Vocabulary,
    train: TripleStore,
    test: Vec<Triple>,
    corpus: Corpus,
    support: SupportSet,
}

fn load_data(dir: &Path) -> Result<Data> {
    existing(dir)?;
    let vocab = Vocabulary::read_dir(dir)?;
    let train = TripleStore::load_known(existing(&dir.join(TRAIN_FILE))?, &vocab)?;
    let test = TripleStore::load_known(existing(&dir.join(TEST_FILE))?, &vocab)?;
    let corpus = Corpus::load_known(existing(&dir.join(CORPUS_FILE))?, &vocab)?;
    let (support, _) = SupportSet::load(existing(&dir.join(SEEDS_FILE))?, &vocab)?;
    Ok(Data {
        vocab,
        train,
        test: test.triples().to_vec(),
        corpus,
        support,
    })
}

fn train_into(s: &Settings, data: &Data, out: &Path) -> Result<EmbeddingSpace> {
    let restricted;
    let train_set = if s.support_only {
        restricted = restrict_to_support(&data.train, &data.support);
        &restricted
    } else {
        &data.train
    };
    let input = TrainData {
        vocab: &data.vocab,
        train: train_set,
        corpus: &data.corpus,
        support: &data.support,
    };
    let output = train(input, &s.train)?;
    create_dir(out)?;
    export_space(out, &output.space, &data.vocab)?;
    write_training_log(&out.join(LOG_FILE), &output.log)?;
    s.write_manifest(out, "train")?;
    if output.projection.is_some() {
        log::info!(
            "mean projection residual {:.4}",
            mean_projection_residual(&data.support, &output.space)
        );
    }
    Ok(output.space)
}

pub fn train_cmd(s: &Settings) -> Result<()> {
    let data = load_data(s.require(&s.data, "data")?)?;
    let out = s.require(&s.out, "out")?;
    train_into(s, &data, out)?;
    Ok(())
}

fn evaluate(s: &Settings, data: &Data, space: &EmbeddingSpace, task: Task) -> Result<EvalReport> {
    match task {
        Task::Lp => link_prediction_eval(
            &data.test,
            &data.train,
            space,
            s.candidates,
            stage_seed(s.seed, "eval_lp"),
        ),
        Task::Analogy => {
            let relations = select_analogy_relations(&data.train, s.analogy_relations);
            let examples = build_analogy_set(
                &data.train,
                &data.test,
                &data.support,
                &relations,
                s.analogy_examples,
                stage_seed(s.seed, "analogy_set"),
            );
            let sampler = AnalogySampler::new(&data.support, &data.train);
            analogy_eval(
                &examples,
                space,
                &sampler,
                s.candidates,
                stage_seed(s.seed, "eval_analogy"),
            )
        }
    }
}

fn check_same_vocab(data: &Vocabulary, emb: &Vocabulary) -> Result<()> {
    let pairs = [
        ("words", &data.words, &emb.words),
        ("text entities", &data.text_entities, &emb.text_entities),
        ("KB entities", &data.kb_entities, &emb.kb_entities),
        ("relations", &data.relations, &emb.relations),
    ];
    for (what, a, b) in pairs {
        if a.names() != b.names() {
            return Err(Error::Mismatch(format!(
                "{what} of the embeddings ({}) differ from the data directory ({})",
                b.len(),
                a.len()
            )));
        }
    }
    Ok(())
}

pub fn eval_cmd(s: &Settings, task: Task) -> Result<PathBuf> {
    let data = load_data(s.require(&s.data, "data")?)?;
    let emb = existing(s.require(&s.embeddings, "embeddings")?)?;
    check_same_vocab(&data.vocab, &Vocabulary::read_dir(emb)?)?;
    let space = import_space(emb, &data.vocab)?;
    let report = evaluate(s, &data, &space, task)?;
    let out = match &s.out {
        Some(p) => p.clone(),
        None => emb.join(format!("eval_{}.tsv", task.name())),
    };
    report.write_tsv(&out, |r| data.vocab.relations.name(r).to_string())?;
    if let Some(m) = report.macro_avg() {
        log::info!(
            "{}: MR {:.2}, Hits@1 {:.4}, Hits@10 {:.4} over {} queries",
            task.name(),
            m.mr,
            m.hits1,
            m.hits10,
            m.n
        );
    }
    Ok(out)
}

/// Trains and evaluates once per λ; rows of the aggregate are sorted by λ.
pub fn sweep(s: &Settings) -> Result<()> {
    let mut lambdas = s.lambdas.clone();
    if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::InvalidArgument(format!("lambdas must be finite and >= 0: {lambdas:?}")));
    }
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    if lambdas.is_empty() {
        log::info!("empty lambda list, nothing to run");
        return Ok(());
    }
    let data = load_data(s.require(&s.data, "data")?)?;
    let out = s.require(&s.out, "out")?;
    create_dir(out)?;
    let mut rows = String::from("lambda\ttask\tn\tmr\thits1\thits10\n");
    for &lambda in &lambdas {
        let run = s.with_lambda(s.train.align.method, lambda);
        let dir = out.join(format!("lambda_{lambda:e}"));
        let space = train_into(&run, &data, &dir)?;
        for task in [Task::Lp, Task::Analogy] {
            let report = evaluate(&run, &data, &space, task)?;
            report.write_tsv(&dir.join(format!("eval_{}.tsv", task.name())), |r| {
                data.vocab.relations.name(r).to_string()
            })?;
            if let Some(m) = report.macro_avg() {
                rows.push_str(&format!(
                    "{lambda:e}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\n",
                    task.name(),
                    m.n,
                    m.mr,
                    m.hits1,
                    m.hits10
                ));
            }
        }
    }
    let path = out.join(SWEEP_FILE);
    fs::write(&path, rows).map_err(|source| Error::Io { path, source })?;
    s.write_manifest(out, "sweep")
}
