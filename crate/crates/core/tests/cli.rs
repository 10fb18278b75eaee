use std::path::Path;
use std::process::{Command, Output};

fn subcredit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subcredit"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SUBCREDIT_SEED")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

const SMALL: &str = r#"
seed = 5
[generator]
n_records = 3000
default_rate = 0.03
[embedding]
dim = 8
[model]
kind = "logistic"
[attribution]
rows = 3
background = 20
n_samples = 50
"#;

#[test]
fn generate_train_evaluate_attribute_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("small.toml"), SMALL).unwrap();

    let out = ok(&subcredit(&["generate", "-c", "small.toml", "-o", "data"], d));
    assert!(out.contains("3000 records"), "{out}");
    assert!(d.join("data/records.csv").is_file());
    assert!(d.join("data/generator.toml").is_file());

    let out = ok(&subcredit(&["train", "-c", "small.toml", "-d", "data", "-o", "run"], d));
    assert!(out.contains("spread baseline"), "{out}");
    for f in ["config.toml", "model.scm", "eval_report.json", "manifest.json", "schema.json"] {
        assert!(d.join("run").join(f).is_file(), "{f} missing");
    }

    // Re-scoring the saved model on its own data reproduces the report.
    ok(&subcredit(&["evaluate", "-r", "run", "-d", "data", "-o", "eval"], d));
    let report = |p: &str| {
        let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join(p)).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("description");
        v
    };
    assert_eq!(report("run/eval_report.json"), report("eval/eval_report.json"));

    ok(&subcredit(&["attribute", "-r", "run", "-d", "data", "-o", "attr", "--rows", "2"], d));
    assert!(std::fs::read_dir(d.join("attr")).unwrap().count() > 0);

    let out = ok(&subcredit(&["report", "run", "-o", "report", "--svg"], d));
    assert!(out.contains('|'), "{out}");
}

#[test]
fn existing_output_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("small.toml"), SMALL).unwrap();
    ok(&subcredit(&["generate", "-c", "small.toml", "-o", "data"], d));
    let again = subcredit(&["generate", "-c", "small.toml", "-o", "data"], d);
    assert_eq!(again.status.code(), Some(1));
    ok(&subcredit(&["generate", "-c", "small.toml", "-o", "data", "--force"], d));
}

#[test]
fn overrides_and_seed_env_change_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("small.toml"), SMALL).unwrap();
    ok(&subcredit(&["generate", "-c", "small.toml", "-o", "a"], d));
    ok(&subcredit(&["generate", "-c", "small.toml", "-o", "b", "--set", "seed=6"], d));
    let env = Command::new(env!("CARGO_BIN_EXE_subcredit"))
        .args(["generate", "-c", "small.toml", "-o", "c"])
        .current_dir(d)
        .env("SUBCREDIT_SEED", "6")
        .output()
        .unwrap();
    ok(&env);
    let read = |p: &str| std::fs::read(d.join(p).join("records.csv")).unwrap();
    assert_ne!(read("a"), read("b"));
    assert_eq!(read("b"), read("c"));
}

#[test]
fn embed_writes_a_table_for_every_record() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("small.toml"), SMALL).unwrap();
    ok(&subcredit(&["generate", "-c", "small.toml", "-o", "data"], d));
    let out = ok(&subcredit(&["embed", "-d", "data", "-o", "e.emb1", "--dim", "12"], d));
    assert!(out.contains("3000 vectors of width 12"), "{out}");
    let t = subcredit::embeddings::read_embedding_file(d.join("e.emb1")).unwrap();
    assert_eq!((t.len(), t.dim()), (3000, 12));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Unknown config key.
    std::fs::write(d.join("bad.toml"), "bogus = 1\n").unwrap();
    assert_eq!(subcredit(&["run", "-c", "bad.toml"], d).status.code(), Some(1));
    // Missing data directory.
    assert_eq!(subcredit(&["train", "-d", "nowhere"], d).status.code(), Some(2));
    // Usage error.
    assert_eq!(subcredit(&["frobnicate"], d).status.code(), Some(1));
    assert_eq!(subcredit(&["--help"], d).status.code(), Some(0));
}
