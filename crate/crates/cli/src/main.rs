//! `kbtext`: generate, preprocess, train, evaluate and sweep.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kbtext::Error;

use crate::commands::Task;
use crate::config::Settings;

#[derive(Parser)]
#[command(name = "kbtext", version, about = "Joint knowledge-base and text embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args)]
struct Common {
    /// Settings file of `key=value` lines, applied before any flag.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Extra `key=value` override, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long, value_name = "METHOD")]
    align_method: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Single-threaded deterministic updates.
    #[arg(long)]
    serial: bool,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Train on the support-restricted triples only.
    #[arg(long)]
    support_only: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Lp,
    Analogy,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic world (triples, corpus, seed map).
    Generate {
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Filter raw inputs and write the few-shot split.
    Preprocess {
        /// Directory holding triples.tsv, corpus.txt and seeds.tsv.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        triples: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        entity_min: Option<u64>,
        #[arg(long)]
        relation_min: Option<u64>,
        #[arg(long)]
        word_min: Option<u64>,
        #[arg(long)]
        fewshot_fraction: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Train embeddings on a preprocessed directory.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate exported embeddings.
    Eval {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Report file (default: eval_<task>.tsv in the embeddings directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Candidate sample size.
        #[arg(long)]
        candidates: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Train and evaluate once per λ.
    Sweep {
        /// Comma-separated λ values.
        #[arg(long, allow_hyphen_values = true)]
        lambdas: Option<String>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        candidates: Option<usize>,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        common: Common,
    },
}

/// Overrides collected from flags, in application order.
#[derive(Default)]
struct Overrides(Vec<(&'static str, String)>);

impl Overrides {
    fn add(&mut self, key: &'static str, v: Option<impl ToString>) {
        if let Some(v) = v {
            self.0.push((key, v.to_string()));
        }
    }

    fn path(&mut self, key: &'static str, v: Option<PathBuf>) {
        self.add(key, v.map(|p| p.display().to_string()));
    }

    fn train(&mut self, f: TrainFlags) {
        self.add("align_method", f.align_method);
        self.add("lambda", f.lambda);
        self.add("epochs", f.epochs);
        self.add("dim", f.dim);
        if let Some(t) = f.threads {
            self.add("threads", Some(t));
            self.add("serial", Some(t == 1));
        }
        if f.serial {
            self.add("serial", Some(true));
            self.add("threads", Some(1));
        }
        if f.support_only {
            self.add("support_only", Some(true));
        }
    }
}

fn settings(common: &Common, overrides: Overrides) -> Result<Settings, Error> {
    let mut s = Settings::default();
    if let Some(path) = &common.config {
        s.load_file(path)?;
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        s.set(k, v)?;
    }
    if let Some(seed) = common.seed {
        s.set("seed", &seed.to_string())?;
    }
    for (k, v) in overrides.0 {
        s.set(k, &v)?;
    }
    Ok(s)
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut o = Overrides::default();
    match cli.command {
        Command::Generate { out, common } => {
            o.path("out", out);
            commands::generate(&settings(&common, o)?)
        }
        Command::Preprocess {
            input,
            triples,
            corpus,
            seeds,
            out,
            entity_min,
            relation_min,
            word_min,
            fewshot_fraction,
            common,
        } => {
            if let Some(dir) = input {
                o.path("triples", Some(dir.join(kbtext::datagen::TRIPLES_FILE)));
                o.path("corpus", Some(dir.join(kbtext::datagen::CORPUS_FILE)));
                o.path("seeds", Some(dir.join(kbtext::datagen::SEEDS_FILE)));
            }
            o.path("triples", triples);
            o.path("corpus", corpus);
            o.path("seeds", seeds);
            o.path("out", out);
            o.add("entity_min", entity_min);
            o.add("relation_min", relation_min);
            o.add("word_min", word_min);
            o.add("fewshot_fraction", fewshot_fraction);
            commands::preprocess(&settings(&common, o)?)
        }
        Command::Train {
            data,
            out,
            train,
            common,
        } => {
            o.path("data", data);
            o.path("out", out);
            o.train(train);
            let s = settings(&common, o)?;
            s.train.validate()?;
            commands::train_cmd(&s)
        }
        Command::Eval {
            task,
            data,
            embeddings,
            out,
            candidates,
            common,
        } => {
            o.path("data", data);
            o.path("embeddings", embeddings);
            o.path("out", out);
            o.add("candidates", candidates);
            let s = settings(&common, o)?;
            if s.candidates == 0 {
                return Err(Error::InvalidArgument("candidates must be >= 1".into()));
            }
            let task = match task {
                TaskArg::Lp => Task::Lp,
                TaskArg::Analogy => Task::Analogy,
            };
            let path = commands::eval_cmd(&s, task)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Sweep {
            lambdas,
            data,
            out,
            candidates,
            train,
            common,
        } => {
            o.add("lambdas", lambdas);
            o.path("data", data);
            o.path("out", out);
            o.add("candidates", candidates);
            o.train(train);
            let s = settings(&common, o)?;
            s.train.validate()?;
            commands::sweep(&s)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Diverged { .. } => 3,
        Error::Mismatch(_) => 4,
        _ => 2,
    }
}

fn verbosity(cli: &Cli) -> u8 {
    let c = match &cli.command {
        Command::Generate { common, .. }
        | Command::Preprocess { common, .. }
        | Command::Train { common, .. }
        | Command::Eval { common, .. }
        | Command::Sweep { common, .. } => common,
    };
    c.verbose
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match verbosity(&cli) {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
