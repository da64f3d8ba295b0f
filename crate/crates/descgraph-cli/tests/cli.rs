//! End-to-end tests of the binary: each subcommand is run on real files
//! and its report is diffed against the corresponding library call, so
//! the CLI stays a thin adapter. Also pins the exit-code contract and
//! byte-level determinism of grown state files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use descgraph::canon;
use descgraph::gamma::LevelPrefix;
use descgraph::limit::{ball_at, LimitState};
use descgraph::presentation::{Presentation, VertexRef};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_descgraph"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn validate_and_canon_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let p = Presentation::multi_root_tree(3, 2);
    let file = write_file(dir.path(), "t3.json", &p.to_json());

    let v = run_json(&["validate", file.to_str().unwrap()]);
    assert_eq!(v["ok"], Value::Bool(true));
    assert_eq!(v["q"], Value::from(p.q()));
    assert_eq!(v["core_vertices"], Value::from(p.vertices().count()));
    assert_eq!(v["max_multiplicity"], Value::from(p.max_multiplicity()));

    let c = run_json(&["canon", file.to_str().unwrap()]);
    assert_eq!(
        c["certificate"],
        Value::String(canon::certificate(&p)),
        "CLI certificate must equal the library's"
    );
}

#[test]
fn contains_tn_reports_the_shared_root_digraph() {
    let dir = tempfile::tempdir().unwrap();
    let p = Presentation::multi_root_tree(3, 2);
    let file = write_file(dir.path(), "t3.json", &p.to_json());

    let r = run_json(&["contains-tn", "--n", "3", file.to_str().unwrap()]);
    assert_eq!(r["contains"], Value::Bool(true));
    assert_eq!(r["multiplicity"], Value::from(3));

    let r = run_json(&["contains-tn", "--n", "4", file.to_str().unwrap()]);
    assert_eq!(r["contains"], Value::Bool(false));
}

#[test]
fn grown_state_files_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for state in [&a, &b] {
        let out = run(&[
            "limit-grow",
            "--n",
            "inf",
            "--q",
            "2",
            "--seed",
            "7",
            "--steps",
            "100",
            "--state",
            state.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    assert_eq!(bytes_a, bytes_b, "same (n, q, seed, steps) must reproduce the state exactly");
}

#[test]
fn ball_reports_match_the_library_and_dot_lands_in_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let state_path = dir.path().join("state.json");
    let out = run(&[
        "limit-grow",
        "--n",
        "inf",
        "--q",
        "2",
        "--seed",
        "1",
        "--steps",
        "10",
        "--state",
        state_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let cli_ball = run_json(&[
        "limit-ball",
        "--state",
        state_path.to_str().unwrap(),
        "--vertex",
        "r",
        "--radius",
        "2",
    ]);
    let st = LimitState::from_json(&std::fs::read_to_string(&state_path).unwrap()).unwrap();
    let lib_ball = ball_at(&st, &VertexRef::parse_string("r"), 2).unwrap();
    assert_eq!(
        cli_ball,
        serde_json::to_value(&lib_ball).unwrap(),
        "CLI ball report must equal the library's"
    );

    let dot_path = dir.path().join("ball.dot");
    let summary = run_json(&[
        "limit-ball",
        "--state",
        state_path.to_str().unwrap(),
        "--vertex",
        "r",
        "--radius",
        "2",
        "--format",
        "dot",
        "--out",
        dot_path.to_str().unwrap(),
    ]);
    assert_eq!(summary["vertices"], Value::from(lib_ball.vertices.len()));
    let dot = std::fs::read_to_string(&dot_path).unwrap();
    assert!(dot.starts_with("digraph {"));
    assert!(dot.contains("shape=triangle"));
}

#[test]
fn exit_codes_follow_the_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_file(dir.path(), "bad.json", "not json");
    let out = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "parse errors exit 2");

    let out = run(&["validate", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "missing inputs exit 3");

    // nested starting refs violate the complement precondition
    let tree = write_file(dir.path(), "tree.json", &Presentation::tree(2).to_json());
    let out = run(&[
        "complement",
        "--x",
        "r",
        "--x",
        "r/0",
        tree.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "precondition errors exit 3");
}

#[test]
fn gamma_checks_match_the_library_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = LevelPrefix::tree(2, 3);
    let file = write_file(dir.path(), "prefix.json", &prefix.to_json());

    let r = run_json(&[
        "gamma-check",
        "--file",
        file.to_str().unwrap(),
        "--checks",
        "t1,t2,t4,g3",
        "--x",
        "a0",
    ]);
    assert_eq!(r["t1"], Value::String("Pass".into()));
    assert_eq!(r["t2"]["mismatch_depth"], Value::Null);
    assert_eq!(r["t4"]["threshold"], Value::from(0));
    assert_eq!(r["g3"]["threshold"], Value::from(1));

    // ball-fixing check with the identity on the cone of a0
    let mut id_map = serde_json::Map::new();
    for v in ["a0", "a00", "a01", "a000", "a001", "a010", "a011"] {
        id_map.insert(v.to_string(), Value::String(v.to_string()));
    }
    let gamma_file = write_file(
        dir.path(),
        "gamma.json",
        &serde_json::to_string(&Value::Object(id_map)).unwrap(),
    );
    let r = run_json(&[
        "gamma-check",
        "--file",
        file.to_str().unwrap(),
        "--checks",
        "c2",
        "--x",
        "a0",
        "--N",
        "0",
        "--gamma",
        gamma_file.to_str().unwrap(),
    ]);
    assert_eq!(r["c2"], Value::String("Pass".into()));
}

#[test]
fn amalgamate_merge_and_replay_bundles_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let tree = Presentation::tree(2);
    let other = tree.rename_vertices(|_| "s".to_string()).unwrap();

    // disjoint free amalgam of two trees
    let bundle = format!(
        "{{\"b1\": {}, \"b2\": {}, \"a1\": [], \"a2\": []}}",
        tree.to_json(),
        other.to_json()
    );
    let file = write_file(dir.path(), "problem.json", &bundle);
    let r = run_json(&["amalgamate", "--mode", "free", file.to_str().unwrap()]);
    assert_eq!(r["identifications"], Value::Array(vec![]));
    assert_eq!(
        r["presentation"]["vertices"].as_array().unwrap().len(),
        2,
        "two disjoint frontier roots"
    );

    // pulling a matched child pair up to the shared parents
    let merge = format!(
        "{{\"a\": {}, \"u\": [\"r/0\", \"r/1\"], \"t\": {}, \"v\": [\"s/0\", \"s/1\"]}}",
        tree.to_json(),
        other.to_json()
    );
    let file = write_file(dir.path(), "merge.json", &merge);
    let r = run_json(&["merge-preds", file.to_str().unwrap()]);
    assert_eq!(r["u_prime"], Value::Array(vec![Value::String("r".into())]));
    assert_eq!(r["v_prime"], Value::Array(vec![Value::String("s".into())]));

    // bounded-class free extension over one glued cone
    let replay = format!("{{\"a1\": {}, \"u\": [\"r/0\"], \"v\": [\"0\"]}}", tree.to_json());
    let file = write_file(dir.path(), "replay.json", &replay);
    let r = run_json(&["replay-free-ext", "--n", "3", file.to_str().unwrap()]);
    assert_eq!(r["report"]["boundary_equality_holds"], Value::Bool(true));

    // predecessor augmentation with the file's generators as the target
    let tfile = write_file(dir.path(), "tree.json", &tree.to_json());
    let r = run_json(&["augment", "--N", "1", "--n", "3", tfile.to_str().unwrap()]);
    assert!(r["core_vertices"].as_u64().unwrap() >= 1);
}

#[test]
fn extension_and_probe_subcommands_report_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let mk_state = |name: &str, seed: &str, steps: &str| -> PathBuf {
        let path = dir.path().join(name);
        let out = run(&[
            "limit-grow", "--n", "inf", "--q", "2", "--seed", seed, "--steps", steps,
            "--state", path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        path
    };
    let a = mk_state("a.json", "1", "10");
    let b = mk_state("b.json", "2", "10");

    let trial = write_file(
        dir.path(),
        "trial.json",
        "{\"base\": [\"r\"], \"u\": [], \"v\": []}",
    );
    let r = run_json(&[
        "limit-check-ext",
        "--state",
        a.to_str().unwrap(),
        "--trial",
        trial.to_str().unwrap(),
        "--budget",
        "4",
    ]);
    assert!(r.get("Realized").is_some(), "disjoint tree must be realized: {r}");

    let r = run_json(&[
        "limit-probe",
        "--state-a",
        a.to_str().unwrap(),
        "--state-b",
        b.to_str().unwrap(),
        "--radius",
        "2",
        "--trials",
        "3",
    ]);
    assert_eq!(r["counterexample"], Value::Null);
    assert_eq!(r["trials"], Value::from(3));
}
