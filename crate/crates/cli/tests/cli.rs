use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 10] = [
    "--set",
    "n_entities=120",
    "--set",
    "n_relations=6",
    "--set",
    "n_clusters=8",
    "--set",
    "filler_words=40",
    "--set",
    "doc_length=4",
];

fn kbtext(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbtext"))
        .args(args)
        .output()
        .expect("run kbtext")
}

fn ok(args: &[&str]) -> Output {
    let out = kbtext(args);
    assert!(
        out.status.success(),
        "kbtext {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Generates a small world and preprocesses it without frequency filtering.
fn prepared(root: &Path) -> std::path::PathBuf {
    let world = root.join("world");
    let data = root.join("data");
    let mut args = vec!["generate", "--out", p(&world)];
    args.extend(SMALL);
    ok(&args);
    ok(&[
        "preprocess",
        "--input",
        p(&world),
        "--out",
        p(&data),
        "--entity-min",
        "0",
        "--relation-min",
        "0",
        "--word-min",
        "0",
    ]);
    data
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn preprocess_is_byte_identical() {
    let root = tempfile::tempdir().unwrap();
    let data = prepared(root.path());
    let again = root.path().join("again");
    ok(&[
        "preprocess",
        "--input",
        p(&root.path().join("world")),
        "--out",
        p(&again),
        "--entity-min",
        "0",
        "--relation-min",
        "0",
        "--word-min",
        "0",
    ]);
    let mut a = dir_bytes(&data);
    let mut b = dir_bytes(&again);
    // the manifests differ only in the output path
    a.retain(|f| f.0 != "manifest.txt");
    b.retain(|f| f.0 != "manifest.txt");
    assert!(!a.is_empty());
    assert_eq!(a, b);
    for f in ["train.tsv", "test.tsv", "seeds.tsv", "words.tsv", "fewshot_entities.txt"] {
        assert!(data.join(f).exists(), "{f} missing");
    }
}

#[test]
fn preprocess_records_thresholds() {
    let root = tempfile::tempdir().unwrap();
    let world = root.path().join("world");
    let mut args = vec!["generate", "--out", p(&world)];
    args.extend(SMALL);
    ok(&args);
    let data = root.path().join("data");
    ok(&[
        "preprocess",
        "--input",
        p(&world),
        "--out",
        p(&data),
        "--entity-min",
        "10",
        "--relation-min",
        "5",
        "--word-min",
        "10",
        "--seed",
        "3",
    ]);
    let manifest = fs::read_to_string(data.join("manifest.txt")).unwrap();
    for line in ["entity_min=10", "relation_min=5", "word_min=10", "seed=3"] {
        assert!(manifest.lines().any(|l| l == line), "{line} not in manifest");
    }
}

#[test]
fn missing_input_is_exit_2_naming_the_path() {
    let root = tempfile::tempdir().unwrap();
    let missing = root.path().join("nowhere").join("triples.tsv");
    let out = kbtext(&[
        "preprocess",
        "--triples",
        p(&missing),
        "--corpus",
        p(&missing),
        "--seeds",
        p(&missing),
        "--out",
        p(&root.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(p(&missing)));
}

#[test]
fn unknown_config_key_is_rejected() {
    let root = tempfile::tempdir().unwrap();
    let conf = root.path().join("run.conf");
    fs::write(&conf, "epochs=2\nlearning_rate=0.1\n").unwrap();
    let out = kbtext(&["generate", "--out", p(root.path()), "--config", p(&conf)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
}

#[test]
fn serial_training_is_reproducible() {
    let root = tempfile::tempdir().unwrap();
    let data = prepared(root.path());
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = root.path().join(name);
            ok(&[
                "train",
                "--data",
                p(&data),
                "--out",
                p(&out),
                "--align-method",
                "same_embedding",
                "--lambda",
                "1e-3",
                "--serial",
                "--seed",
                "7",
                "--epochs",
                "2",
                "--dim",
                "8",
            ]);
            out
        })
        .collect();
    let strip = |d: &Path| {
        let mut v = dir_bytes(d);
        v.retain(|f| f.0 != "manifest.txt" && f.0 != "training_log.tsv");
        v
    };
    assert_eq!(strip(&runs[0]), strip(&runs[1]));
    let manifest = fs::read_to_string(runs[0].join("manifest.txt")).unwrap();
    for line in ["align_method=same_embedding", "lambda=0.001", "serial=true", "seed=7"] {
        assert!(manifest.lines().any(|l| l == line), "{line} not in manifest");
    }
    assert_eq!(fs::read_to_string(runs[0].join("training_log.tsv")).unwrap().lines().count(), 3);
}

#[test]
fn manifest_reproduces_the_run() {
    let root = tempfile::tempdir().unwrap();
    let data = prepared(root.path());
    let first = root.path().join("first");
    ok(&[
        "train", "--data", p(&data), "--out", p(&first), "--epochs", "1", "--dim", "4",
        "--align-method", "anchors", "--seed", "5",
    ]);
    let second = root.path().join("second");
    ok(&[
        "train",
        "--config",
        p(&first.join("manifest.txt")),
        "--out",
        p(&second),
    ]);
    let bin = |d: &Path| fs::read(d.join("kb_entities.bin")).unwrap();
    assert_eq!(bin(&first), bin(&second));
}

#[test]
fn divergence_is_exit_3() {
    let root = tempfile::tempdir().unwrap();
    let data = prepared(root.path());
    let out = kbtext(&[
        "train",
        "--data",
        p(&data),
        "--out",
        p(&root.path().join("emb")),
        "--epochs",
        "2",
        "--dim",
        "4",
        "--set",
        "lr_sg=1e300",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn eval_reports_and_mismatch() {
    let root = tempfile::tempdir().unwrap();
    let data = prepared(root.path());
    let emb = root.path().join("emb");
    ok(&["train", "--data", p(&data), "--out", p(&emb), "--epochs", "1", "--dim", "4"]);

    for task in ["lp", "analogy"] {
        let out = ok(&["eval", "--task", task, "--data", p(&data), "--embeddings", p(&emb)]);
        let path = String::from_utf8(out.stdout).unwrap();
        let report = fs::read_to_string(path.trim()).unwrap();
        let lines: Vec<&str> = report.lines().collect();
        assert_eq!(lines[0], "relation\tn\tmr\thits1\thits10");
        assert!(lines.last().unwrap().starts_with("__macro__\t"), "{task}: {report}");
        assert!(lines.len() >= 3);
    }

    // embeddings from a different world
    let other_root = root.path().join("other");
    let world = other_root.join("world");
    let mut args = vec!["generate", "--out", p(&world), "--seed", "1"];
    args.extend(SMALL);
    args.extend(["--set", "n_entities=90"]);
    ok(&args);
    let other_data = other_root.join("data");
    ok(&["preprocess", "--input", p(&world), "--out", p(&other_data), "--entity-min", "0", "--relation-min", "0", "--word-min", "0"]);
    let other_emb = other_root.join("emb");
    ok(&["train", "--data", p(&other_data), "--out", p(&other_emb), "--epochs", "1", "--dim", "4"]);
    let out = kbtext(&["eval", "--task", "lp", "--data", p(&data), "--embeddings", p(&other_emb)]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_sorts_lambdas() {
    let root = tempfile::tempdir().unwrap();
    let data = prepared(root.path());
    let out = root.path().join("sweep");
    ok(&[
        "sweep",
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--lambdas",
        "1,1e-3,0.1",
        "--align-method",
        "projection",
        "--epochs",
        "1",
        "--dim",
        "4",
    ]);
    let text = fs::read_to_string(out.join("sweep.tsv")).unwrap();
    let lambdas: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split('\t').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(lambdas.len(), 6);
    assert!(lambdas.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(lambdas.first(), Some(&1e-3));
}

#[test]
fn empty_sweep_runs_nothing() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("sweep");
    ok(&["sweep", "--lambdas", "", "--out", p(&out)]);
    assert!(!out.exists());
}
