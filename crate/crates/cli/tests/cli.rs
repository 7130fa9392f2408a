use std::path::Path;
use std::process::{Command, Output};

use onearm_cli::record;
use onearm_cli::report::ANCHORS;

fn onearm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onearm"))
        .current_dir(dir)
        .env_remove("ONEARM_WORKERS")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const FIT: [&str; 3] = ["fit", "x=1,2,4,8", "y=1,0.5,0.25,0.125"];

#[test]
fn verify_passes_and_appends_a_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = onearm(
        dir.path(),
        &[
            "verify",
            "checks=representation,switching,correlation",
            "representation_instances=4",
            "switching_instances=6",
            "output=runs/v.jsonl",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("[switching-identity]"));
    assert!(text.contains("checks pass, record"));
    let records = record::load(&dir.path().join("runs/v.jsonl")).unwrap();
    assert_eq!(records.len(), 1);
    assert!(records[0].all_passed());
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("f.kv"), "# fit\nkind = fit\nx = 1, 2, 4, 8\ny = 1, 2, 4, 8\noutput = a.jsonl\n").unwrap();
    let out = onearm(dir.path(), &["fit", "f.kv", "target=1", "tolerance=0.01"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let rec = record::load(&dir.path().join("a.jsonl")).unwrap().remove(0);
    assert_eq!(rec.config["target"], "1");
    assert_eq!(rec.rows[0].number("slope").map(|s| (s * 1e9).round()), Some(1e9));
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = onearm(dir.path(), &["perc", "dimension=2", "p=0.5", "outer=10", "radii=4,8,16"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("`radii`"), "{}", stdout(&out));

    let out = onearm(dir.path(), &["fit", "x=1,2", "bogus_key=3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("`bogus_key`"));

    let out = onearm(dir.path(), &["worm", "inner=3", "outer=2", "field=0.5", "dimension=1", "beta=0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("`inner`"), "{}", stdout(&out));

    let out = onearm(dir.path(), &["fit", "kind=worm"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("runs.jsonl").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["bogus"][..], &[][..], &["fit", "missing.kv"][..], &["fit", "x=1", "stray"][..]] {
        let out = onearm(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stdout(&out));
        assert!(stdout(&out).starts_with("error:"));
    }
}

#[test]
fn budget_violations_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = onearm(dir.path(), &["perc", "mode=exact", "max_bonds=40"]);
    assert_eq!(out.status.code(), Some(3), "{}", stdout(&out));
    let out = onearm(
        dir.path(),
        &["perc", "dimension=3", "p=0.25", "outer=30", "radii=10", "samples=100000000000"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", stdout(&out));
    assert!(stdout(&out).contains("budget"));
}

#[test]
fn failed_checks_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = onearm(dir.path(), &[&FIT[..], &["target=1", "tolerance=0.1"]].concat());
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn same_config_gives_same_hash_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    for _ in 0..2 {
        assert_eq!(onearm(dir.path(), &[&FIT[..], &["seed=4", "output=r.jsonl"]].concat()).status.code(), Some(0));
    }
    let recs = record::load(&dir.path().join("r.jsonl")).unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0].config_hash, recs[1].config_hash);
    assert_eq!(recs[0].rows, recs[1].rows);
    onearm(dir.path(), &[&FIT[..], &["seed=5", "output=r.jsonl"]].concat());
    let recs = record::load(&dir.path().join("r.jsonl")).unwrap();
    assert_ne!(recs[0].config_hash, recs[2].config_hash);
}

#[test]
fn report_lists_every_anchor_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    onearm(dir.path(), &[&FIT[..], &["anchor=one-arm-exponent", "target=-1", "tolerance=0.1"]].concat());
    let out = onearm(dir.path(), &["report", "records=runs.jsonl", "out_dir=rep", "output=report.jsonl"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    for (anchor, _) in ANCHORS {
        assert!(text.contains(&format!("[{anchor}]")), "{anchor} missing");
    }
    assert!(text.contains("one-arm-exponent: 1/1 pass"));
    let summary = std::fs::read_to_string(dir.path().join("rep/summary.txt")).unwrap();
    assert!(summary.contains("no rows"));
    let slopes = std::fs::read_to_string(dir.path().join("rep/slopes.csv")).unwrap();
    assert!(slopes.starts_with("anchor,label,slope,slope_stderr,target,tolerance,passed\none-arm-exponent,"));
}

#[test]
fn empty_report_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("none.jsonl"), "").unwrap();
    let out = onearm(dir.path(), &["report", "records=none.jsonl"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("0 records"));
}

#[test]
fn worker_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |value: &str| {
        Command::new(env!("CARGO_BIN_EXE_onearm"))
            .current_dir(dir.path())
            .env("ONEARM_WORKERS", value)
            .args(FIT)
            .output()
            .unwrap()
    };
    assert_eq!(run("1").status.code(), Some(0));
    let bad = run("many");
    assert_eq!(bad.status.code(), Some(2));
    assert!(stdout(&bad).contains("ONEARM_WORKERS"));
}
