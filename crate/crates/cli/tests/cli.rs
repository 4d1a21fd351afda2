use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use prefsat_core::families::{motivation_fixture, CanonicalInstance, FamilyId, Instance, PrefVariant, SizeParams};
use prefsat_core::harness::{build_dataset, instance_key, DatasetConfig, DatasetRecord};
use prefsat_core::pipeline::provider::replay_any_key;
use prefsat_core::pipeline::ReplayBundle;
use prefsat_core::solver::SolverConfig;
use prefsat_core::wcnf::serialize_wdimacs;

fn prefsat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prefsat")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn motivation_record(dir: &Path) -> PathBuf {
    let c = CanonicalInstance::build(
        Instance::Scheduling(motivation_fixture()),
        PrefVariant::P2,
        0,
        &SolverConfig::default(),
    )
    .unwrap();
    let r = DatasetRecord {
        family: FamilyId::Scheduling,
        index: 0,
        seed: 0,
        variant: PrefVariant::P2,
        size_params: SizeParams::Scheduling {
            jobs: 6,
            slots: 8,
            prec_prob: 0.0,
        },
        description: c.description,
        wdimacs: serialize_wdimacs(&c.formula),
        varmap: c.varmap,
        optimal_cost: c.optimal_cost,
        reference_solution: c.reference_solution,
        instance: c.instance,
        hard_labels: c.hard_labels,
    };
    write(dir, "motivation.json", &r.to_json())
}

#[test]
fn solve_prints_competition_lines() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "ex.wcnf", "p wcnf 3 4 5\n5 1 2 0\n5 -2 3 0\n1 -1 0\n3 -3 0\n");
    for engine in ["branch-and-bound", "linear-sat-unsat"] {
        let o = prefsat(&["solve", f.to_str().unwrap(), "--engine", engine]);
        assert!(o.status.success());
        assert_eq!(stdout(&o), "o 1\ns OPTIMUM FOUND\nv 1 -2 -3\n");
    }
}

#[test]
fn solve_reports_unsat_and_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.wcnf", "p wcnf 1 2 2\n2 1 0\n2 -1 0\n");
    let o = prefsat(&["solve", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "s UNSATISFIABLE\n");

    let o = prefsat(&["solve", f.to_str().unwrap(), "--engine", "rc2"]);
    assert_eq!(o.status.code(), Some(2));

    let junk = write(dir.path(), "junk.wcnf", "p cnf 1 1\n1 0\n");
    let o = prefsat(&["solve", junk.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn verify_exit_codes_follow_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let rec = motivation_record(dir.path());
    let rec = rec.to_str().unwrap();
    let cases = [
        (r#"{"J0":4,"J1":2,"J2":5,"J3":1,"J4":6,"J5":0}"#, 3, "J2 must precede J1"),
        (r#"{"J0":4,"J1":6,"J2":5,"J3":1,"J4":3,"J5":2}"#, 0, r#""verdict":"Accepted","cost":2"#),
        (r#"{"J0":5,"J1":6,"J2":4,"J3":1,"J4":3,"J5":2}"#, 4, r#""cost":4,"optimum":2"#),
        (r#"{"J0":4}"#, 5, "Malformed"),
        (r#"{"selected": [1]}"#, 5, "Malformed"),
    ];
    for (solution, code, needle) in cases {
        let o = prefsat(&["verify", "--instance", rec, "--solution", solution]);
        assert_eq!(o.status.code(), Some(code), "{solution}");
        assert!(stdout(&o).contains(needle), "{}", stdout(&o));
    }
    let file = write(dir.path(), "answer.json", r#"{"objective_cost": 0, "solution_json": {"J0":4,"J1":6,"J2":5,"J3":1,"J4":3,"J5":2}}"#);
    let o = prefsat(&["verify", "--instance", rec, "--solution", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));

    let o = prefsat(&["oracle", "--instance", rec]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "2\n");
}

#[test]
fn run_and_report_from_a_replay_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut grid = BTreeMap::new();
    grid.insert(FamilyId::Mis, vec![SizeParams::Mis { n: 6, edge_prob: 0.3 }; 2]);
    let ds = dir.path().join("ds");
    let manifest = build_dataset(
        &DatasetConfig {
            seed: 5,
            grid,
            solver: SolverConfig::default(),
        },
        &ds,
    )
    .unwrap();
    let mut responses = BTreeMap::new();
    for e in &manifest.records {
        let key = instance_key(e.family, e.index, e.variant);
        let rec = manifest.load_record(&ds, e).unwrap();
        let answer = if e.index == 0 {
            rec.reference_solution.to_json().to_string()
        } else {
            "pass".to_string()
        };
        responses.insert(replay_any_key(&key, "direct-answer"), answer);
    }
    let bundle = ReplayBundle {
        name: "rp".into(),
        responses,
    };
    write(dir.path(), "bundle.json", &serde_json::to_string(&bundle).unwrap());
    let config = write(
        dir.path(),
        "exp.json",
        r#"{"manifest": "ds/manifest.json", "strategies": ["direct-answer"],
            "providers": [{"kind": "replay", "name": "rp", "bundle": "bundle.json"}], "workers": 2}"#,
    );

    let o = prefsat(&["run", "--config", config.to_str().unwrap(), "--limit", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("executed 3 skipped 0"), "{out}");
    let run_id = out.lines().next().unwrap().strip_prefix("run ").unwrap().to_string();

    let o = prefsat(&["run", "--config", config.to_str().unwrap()]);
    assert!(stdout(&o).contains(&format!("run {run_id}")));
    assert!(stdout(&o).contains("executed 5 skipped 3"));

    let results = dir.path().join("results");
    let o = prefsat(&["report", "--run", &run_id, "--table", "1", "--results", results.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "| Family | Model | direct-answer |\n|--------|-------|---------------|\n| mis    | rp    | 50.0          |\n");
    assert!(results.join(&run_id).join("table1.md").exists());

    let o = prefsat(&[
        "report", "--run", &run_id, "--table", "2", "--results", results.to_str().unwrap(), "--format", "csv",
    ]);
    assert_eq!(stdout(&o), "Family,Model,direct-answer\nmis,rp,50.0 / 50.0 / 50.0 / 50.0\n");

    let o = prefsat(&["report", "--run", "nope", "--table", "1", "--results", results.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(prefsat(&[]).status.code(), Some(2));
    assert_eq!(prefsat(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(prefsat(&["report", "--run", "x", "--table", "4"]).status.code(), Some(2));
    assert!(prefsat(&["--help"]).status.success());
}

#[test]
fn gen_writes_the_full_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds");
    let o = prefsat(&["gen", "--out", out.to_str().unwrap(), "--seed", "2024"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("300 records\nmanifest digest "), "{text}");
    assert!(out.join("manifest.json").exists());
    assert!(out.join("scheduling/24/p3.json").exists());
}
