use std::path::Path;
use std::process::{Command, Output};

use glocal::corpus::synthetic::SyntheticSpec;

fn glocal(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glocal"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("spawn glocal")
}

fn write_toy(dir: &Path) {
    SyntheticSpec { users: 40, items: 60, groups: 3, min_degree: 6, max_degree: 12, ..Default::default() }
        .write_tsv(&dir.join("toy.tsv"))
        .unwrap();
    std::fs::write(
        dir.join("run.conf"),
        "# toy run\ndataset.path = toy.tsv\nout = run\ndim = 8\nclusters = 4\ncandidate_clusters = 2\n\
         mining.j = 3\ntrain.max_epochs = 2\ntrain.batch_size = 64\neval.n = 5\neval.coverage_k = 1,4\n\
         representations = GD,GP\nattention = GAD\n",
    )
    .unwrap();
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verbs_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path());
    let d = dir.path();

    let o = glocal(d, &["--config", "run.conf", "ingest", "--single-thread"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("run/corpus/split.tsv").exists());

    // Attention before its channels exist is a configuration problem.
    let o = glocal(d, &["-c", "run.conf", "attend"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stage `mine`"), "{}", String::from_utf8_lossy(&o.stderr));

    assert!(glocal(d, &["-c", "run.conf", "train"]).status.success());
    assert!(d.join("run/models/GP.bin").exists());
    assert!(d.join("run/attention/GAD.bin").exists());

    let o = glocal(d, &["-c", "run.conf", "evaluate"]);
    assert!(o.status.success());
    let table = stdout(&o);
    assert!(table.contains("GAD"), "{table}");
    assert!(d.join("run/eval/coverage.tsv").exists());

    let o = glocal(d, &["-c", "run.conf", "recommend", "--users", "1,3", "--set", "recommend.model=GP"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let written = std::fs::read_to_string(d.join("run/recommend/GP.tsv")).unwrap();
    let users: std::collections::BTreeSet<&str> = written.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(users.into_iter().collect::<Vec<_>>(), vec!["1", "3"]);

    std::fs::write(d.join("who.txt"), "2\n\n").unwrap();
    assert!(glocal(d, &["-c", "run.conf", "recommend", "--users-file", "who.txt"]).status.success());

    let o = glocal(d, &["-c", "run.conf", "report"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("train:GD"));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path());
    let d = dir.path();
    assert_eq!(glocal(d, &["-c", "run.conf", "--set", "no.such.key=1", "ingest"]).status.code(), Some(2));
    assert_eq!(glocal(d, &["-c", "run.conf", "--set", "clusters=1", "ingest"]).status.code(), Some(2));
    assert_eq!(glocal(d, &["-c", "run.conf", "--dataset", "missing.tsv", "ingest"]).status.code(), Some(3));
    std::fs::write(d.join("bad.tsv"), "1\t2\t1\t5\nnot a row\n").unwrap();
    assert_eq!(glocal(d, &["-c", "run.conf", "--dataset", "bad.tsv", "ingest"]).status.code(), Some(3));
    assert_eq!(glocal(d, &["frobnicate"]).status.code(), Some(2));
    let o = glocal(d, &["keys"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l.starts_with("mining.j = 5")));
}
