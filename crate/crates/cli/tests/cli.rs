use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const T1: &str = r#"{
  "tau": 1,
  "substrate": {
    "nodes": [
      {"id": "p", "capacity": [0], "cost": [0]},
      {"id": "l1", "capacity": [3], "cost": [1]},
      {"id": "l2", "capacity": [3], "cost": [2]}
    ],
    "edges": [
      {"src": "p", "dst": "l1", "capacity": [10], "cost": [1]},
      {"src": "l1", "dst": "p", "capacity": [10], "cost": [1]},
      {"src": "p", "dst": "l2", "capacity": [10], "cost": [1]},
      {"src": "l2", "dst": "p", "capacity": [10], "cost": [1]}
    ]
  },
  "request": {
    "nodes": [{"id": "u", "demand": [2]}, {"id": "w", "demand": [1]}],
    "edges": [{"src": "u", "dst": "w", "demand": [1]}]
  }
}"#;

fn treevne(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treevne"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

struct Work(TempDir);

impl Work {
    fn new() -> Self {
        Work(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn put(&self, name: &str, text: &str) -> String {
        std::fs::write(self.path(name), text).unwrap();
        self.arg(name)
    }

    fn get(&self, name: &str) -> String {
        std::fs::read_to_string(self.path(name)).unwrap()
    }
}

#[test]
fn t1_solve_then_validate() {
    let w = Work::new();
    let inst = w.put("t1.json", T1);
    let out = treevne(&["solve", "--instance", &inst, "--out", &w.arg("m.json")]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "optimal 3\n");
    let m: serde_json::Value = serde_json::from_str(&w.get("m.json")).unwrap();
    assert_eq!(m["node_map"]["u"], "l1");
    assert_eq!(m["edge_map"]["u->w"], serde_json::json!(["l1"]));

    let v = treevne(&[
        "validate",
        "--instance",
        &inst,
        "--mapping",
        &w.arg("m.json"),
    ]);
    assert_eq!(v.status.code(), Some(0));
    assert!(stdout(&v).starts_with("feasible\ncost 3\n"));
}

#[test]
fn generated_solutions_always_validate() {
    let w = Work::new();
    for seed in 0..6 {
        let inst = w.arg("i.json");
        let g = treevne(&[
            "gen",
            "instance",
            "--ports",
            "4",
            "--nodes",
            "5",
            "--prob",
            "0.5",
            "--seed",
            &seed.to_string(),
            "--out",
            &inst,
        ]);
        assert!(g.status.success(), "{}", stderr(&g));
        let _ = std::fs::remove_file(w.path("m.json"));
        let s = treevne(&[
            "--quiet",
            "solve",
            "--instance",
            &inst,
            "--out",
            &w.arg("m.json"),
        ]);
        assert!(s.status.success(), "{}", stderr(&s));
        assert!(stdout(&s).is_empty());
        if w.path("m.json").exists() {
            let v = treevne(&[
                "validate",
                "--instance",
                &inst,
                "--mapping",
                &w.arg("m.json"),
                "--json",
            ]);
            assert_eq!(v.status.code(), Some(0), "{}", stdout(&v));
            let report: serde_json::Value = serde_json::from_str(&stdout(&v)).unwrap();
            assert_eq!(report["cost_matches"], true);
        }
    }
}

#[test]
fn oracle_agrees_on_t1_and_writes_stats() {
    let w = Work::new();
    let inst = w.put("t1.json", T1);
    for cmd in ["solve", "oracle"] {
        let o = treevne(&[
            cmd,
            "--instance",
            &inst,
            "--out",
            &w.arg("m.json"),
            "--stats",
            &w.arg("s.csv"),
        ]);
        assert_eq!(stdout(&o), "optimal 3\n", "{cmd}");
    }
    let stats = w.get("s.csv");
    let lines: Vec<&str> = stats.lines().collect();
    assert_eq!(
        lines[0],
        "instance,r,s,transformed_s,table_entries,inner_iterations,solve_ms,status,cost"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("t1,2,3,"));
    assert!(lines[2].ends_with(",optimal,3"));
}

#[test]
fn validate_exit_codes() {
    let w = Work::new();
    let inst = w.put("t1.json", T1);
    let invalid = w.put(
        "bad.json",
        r#"{"node_map": {"u": "p", "w": "l1"}, "edge_map": {"u->w": ["p", "l1"]}}"#,
    );
    let v = treevne(&[
        "validate",
        "--instance",
        &inst,
        "--mapping",
        &invalid,
        "--json",
    ]);
    assert_eq!(v.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_str(&stdout(&v)).unwrap();
    assert_eq!(report["status"], "invalid");
    assert_eq!(report["violations"][0]["kind"], "PerElementCapacity");

    let crowded = T1.replace(
        r#""capacity": [3], "cost": [1]"#,
        r#""capacity": [2.5], "cost": [1]"#,
    );
    let inst = w.put("t1b.json", &crowded);
    let both = w.put(
        "both.json",
        r#"{"cost": 3, "node_map": {"u": "l1", "w": "l1"}, "edge_map": {"u->w": ["l1"]}}"#,
    );
    let v = treevne(&["validate", "--instance", &inst, "--mapping", &both]);
    assert_eq!(v.status.code(), Some(3));
    assert!(stdout(&v).starts_with("infeasible\n"));
}

#[test]
fn errors_are_one_line() {
    let w = Work::new();
    let broken = w.put("broken.json", "{\"tau\": 1,\n \"substrate\": 7}");
    for args in [
        vec!["solve", "--instance", broken.as_str(), "--out", "x"],
        vec!["gen", "fat-tree", "--ports", "5", "--seed", "1"],
        vec!["solve", "--no-such-flag"],
    ] {
        let o = treevne(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert_eq!(stderr(&o).lines().count(), 1, "{}", stderr(&o));

        let mut json = vec!["--json-errors"];
        json.extend(&args);
        let o = treevne(&json);
        assert_eq!(o.status.code(), Some(1));
        let e: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
        assert!(e["error"].is_string() && e["message"].is_string());
    }
    let o = treevne(&[
        "--json-errors",
        "solve",
        "--instance",
        &broken,
        "--out",
        "x",
    ]);
    let e: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(e["error"], "format");
    assert!(e["message"].as_str().unwrap().contains("line 2"));
}

#[test]
fn infeasible_solve_writes_no_mapping() {
    let w = Work::new();
    let g = treevne(&[
        "gen",
        "partition",
        "--set",
        "2,2,2",
        "--out",
        &w.arg("p.json"),
    ]);
    assert!(g.status.success());
    let o = treevne(&[
        "solve",
        "--instance",
        &w.arg("p.json"),
        "--out",
        &w.arg("m.json"),
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "infeasible\n");
    assert!(!w.path("m.json").exists());
}

#[test]
fn transform_writes_instance_and_trace() {
    let w = Work::new();
    let inst = w.put("t1.json", T1);
    let o = treevne(&[
        "transform",
        "--instance",
        &inst,
        "--out",
        &w.arg("t.json"),
        "--trace",
        &w.arg("tr.json"),
        "--root",
        "p",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t: serde_json::Value = serde_json::from_str(&w.get("t.json")).unwrap();
    assert_eq!(t["substrate"]["nodes"].as_array().unwrap().len(), 3);
    let tr: serde_json::Value = serde_json::from_str(&w.get("tr.json")).unwrap();
    assert_eq!(tr["root"], "p");
    let names: Vec<&str> = tr["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        ["bidirectionalize", "leafify", "binarize", "pad_full_binary"]
    );

    let s = treevne(&[
        "solve",
        "--instance",
        &w.arg("t.json"),
        "--out",
        &w.arg("m.json"),
    ]);
    assert_eq!(stdout(&s), "optimal 3\n");
}

#[test]
fn export_lp_matches_golden() {
    let w = Work::new();
    let inst = w.put("t1.json", T1);
    let o = treevne(&[
        "--quiet",
        "export-lp",
        "--instance",
        &inst,
        "--out",
        &w.arg("t1.lp"),
    ]);
    assert!(o.status.success());
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/t1.lp");
    assert_eq!(w.get("t1.lp"), std::fs::read_to_string(golden).unwrap());
}

#[test]
fn bench_rows_and_suite() {
    let w = Work::new();
    let config =
        w.put("c.json", r#"{"grid": [{"f": 4, "r": 5, "p": 0.5, "seeds": [1, 2, 3]}], "timeout_ms": 30000, "parallelism": 3}"#);
    let runs: Vec<String> = (0..2)
        .map(|_| {
            let o = treevne(&["bench", "--config", &config]);
            assert!(o.status.success(), "{}", stderr(&o));
            stdout(&o)
        })
        .collect();
    let lines: Vec<&str> = runs[0].lines().collect();
    assert_eq!(lines[0], "# treevne-bench-csv v1");
    assert_eq!(lines.len(), 2 + 3);
    let costs = |text: &str| {
        text.lines()
            .skip(2)
            .map(|l| l.split(',').nth(5).unwrap().to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(costs(&runs[0]), costs(&runs[1]));

    let o = treevne(&[
        "--quiet",
        "gen",
        "bench-suite",
        "--config",
        &config,
        "--out-dir",
        &w.arg("suite"),
    ]);
    assert!(o.status.success());
    let mut files: Vec<String> = std::fs::read_dir(w.path("suite"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(
        files,
        [
            "f4_r5_p0.5_s1.json",
            "f4_r5_p0.5_s2.json",
            "f4_r5_p0.5_s3.json"
        ]
    );
}

#[test]
fn generators_are_reproducible() {
    let a = treevne(&["gen", "fat-tree", "--ports", "4", "--seed", "9"]);
    let b = treevne(&["gen", "fat-tree", "--ports", "4", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let r = treevne(&[
        "gen",
        "request",
        "--nodes",
        "4",
        "--prob",
        "0.5",
        "--seed",
        "2",
        "--max-resample",
        "10",
    ]);
    let doc: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(doc["request"]["nodes"].as_array().unwrap().len(), 4);
}
