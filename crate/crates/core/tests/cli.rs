// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

const CONF: &str = "\
triples = kg/triples.tsv
schema = kg/schema.tsv
dim = 32
walks_per_node = 5
embed_epochs = 2
hidden = 16
lr = 0.005
epochs = 30
paths_per_length = 50
";

fn kgcheck(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgcheck"))
        .current_dir(dir)
        .args(["--threads", "1", "--config", "run.conf"])
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = kgcheck(dir, args);
    assert!(
        out.status.success(),
        "`{}` failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.conf"), CONF).unwrap();
    ok(dir.path(), &["synth", "planted", "--out", "kg"]);
    dir
}

fn score_of(verdict: &str) -> f64 {
    let first = verdict.lines().next().unwrap();
    let phi = first.split_whitespace().next().unwrap();
    phi.trim_start_matches("Φ=").parse().unwrap()
}

#[test]
fn trained_checker_separates_true_and_cross_cluster_facts() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["benchmark", "--out", "bench.tsv", "--predicates", "director", "--total-positives", "100"]);
    ok(d, &["embed", "--out", "emb.tsv", "--matrix-out", "matrix.tsv", "--leave-out", "bench.tsv"]);
    let log = ok(
        d,
        &["train", "--out", "model.ckpt", "--embeddings", "emb.tsv", "--matrix", "matrix.tsv", "--benchmark", "bench.tsv"],
    );
    assert!(log.contains("best_epoch"), "{log}");
    let check = |o: &str| {
        ok(
            d,
            &["check", "film_3_1", "director", o, "--model", "model.ckpt", "--embeddings", "emb.tsv", "--matrix", "matrix.tsv"],
        )
    };
    let truth = check("director_3");
    assert!(score_of(&truth) > 0.5, "{truth}");
    assert!(truth.contains("label=true"), "{truth}");
    assert!(truth.lines().count() > 1, "no evidence printed: {truth}");
    let cross = check("director_4");
    assert!(score_of(&cross) < score_of(&truth), "{cross}");
}

#[test]
fn mined_patterns_come_best_first() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["embed", "--out", "emb.tsv", "--matrix-out", "matrix.tsv"]);
    let text = ok(d, &["mine-patterns", "--predicate", "director", "--matrix", "matrix.tsv"]);
    let scores: Vec<f64> = text
        .lines()
        .map(|l| l.split('\t').next().unwrap().parse().unwrap())
        .collect();
    assert!(!scores.is_empty());
    assert!(scores.windows(2).all(|w| w[0] >= w[1]), "{text}");
}

#[test]
fn extract_paths_prints_evidence_for_a_known_fact() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["embed", "--out", "emb.tsv", "--matrix-out", "matrix.tsv"]);
    let dump = ok(d, &["extract-paths", "film_0_0", "director", "director_0", "--matrix", "matrix.tsv"]);
    assert!(dump.contains("director_0"), "{dump}");
    assert!(
        dump.lines().all(|l| !l.ends_with("\tfilm_0_0 -[director>]- director_0")),
        "the fact itself is not evidence: {dump}"
    );
}

#[test]
fn user_errors_exit_with_one() {
    let dir = workspace();
    let d = dir.path();
    for args in [
        &["no-such-command"][..],
        &["check", "nobody", "director", "director_0", "--model", "missing.ckpt"],
        &["embed", "--out", "kg/triples.tsv"],
        &["synth", "galaxy", "--out", "x"],
        &["--set", "k=zero", "mine-patterns", "--predicate", "director"],
    ] {
        let out = kgcheck(d, args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty(), "{args:?} gave no message");
    }
    assert_eq!(kgcheck(d, &["--help"]).status.code(), Some(0));
}
