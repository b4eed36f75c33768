// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn pgfdb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgfdb"))
        .args(args)
        .env_remove("PGFDB_THREADS")
        .output()
        .expect("spawn pgfdb")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn support(doc: &Value, row: usize, agg: usize) -> Vec<(String, f64)> {
    doc["rows"][row]["aggregates"][agg]["support"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| (t["value"].as_str().unwrap().to_string(), t["p"].as_f64().unwrap()))
        .collect()
}

fn write_numbers(dir: &Path, ps: &[f64]) {
    let mut csv = String::from("v,p\n");
    for (i, p) in ps.iter().enumerate() {
        csv.push_str(&format!("{},{p}\n", i % 7));
    }
    fs::write(dir.join("t.csv"), csv).unwrap();
    fs::write(
        dir.join("catalog.json"),
        r#"{"tables":[{"name":"t","file":"t.csv","columns":[{"name":"v","type":"int"}]}]}"#,
    )
    .unwrap();
}

const SUM_PLAN: &str = r#"{"nodes":[{"id":"s","op":"scan","table":"t"},
    {"id":"a","op":"group_agg","input":"s","keys":[],"aggs":[
        {"name":"n","kind":"count"},{"name":"total","kind":"sum","column":"v"},{"name":"hi","kind":"max","column":"v"}]}],
    "output":"a"}"#;

#[test]
fn run_reports_fig1_count() {
    let out = tempfile::tempdir().unwrap();
    let result = out.path().join("r.json");
    let o = pgfdb(&[
        "run",
        "--plan",
        path(&root().join("plans/fig1_count.json")),
        "--data",
        path(&root().join("data/fig1")),
        "--output",
        path(&result),
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = read_json(&result);
    let count = support(&doc, 0, 0);
    let expected = [("0", 0.03), ("1", 0.22), ("2", 0.47), ("3", 0.28)];
    assert_eq!(count.len(), 4);
    for ((v, p), (ev, ep)) in count.iter().zip(expected) {
        assert_eq!(v, ev);
        assert!((p - ep).abs() < 1e-12);
    }
    let min = &doc["rows"][0]["aggregates"][2];
    assert_eq!(min["aggregate"], "min");
    assert!(support(&doc, 0, 2).iter().any(|(v, _)| v == "inf"));
}

#[test]
fn run_and_oracle_agree() {
    let dir = tempfile::tempdir().unwrap();
    write_numbers(dir.path(), &[0.1, 0.9, 0.35, 0.5, 0.25, 0.6, 0.75, 0.05, 0.45, 0.3, 0.8, 0.15]);
    let plan = dir.path().join("plan.json");
    fs::write(&plan, SUM_PLAN).unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let o = pgfdb(&["run", "--plan", path(&plan), "--data", path(dir.path()), "--output", path(&a)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = pgfdb(&["oracle", "--plan", path(&plan), "--data", path(dir.path()), "--output", path(&b), "--threads", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (a, b) = (read_json(&a), read_json(&b));
    for agg in 0..3 {
        let (x, y) = (support(&a, 0, agg), support(&b, 0, agg));
        assert_eq!(x.len(), y.len());
        for ((vx, px), (vy, py)) in x.iter().zip(&y) {
            assert_eq!(vx, vy);
            assert!((px - py).abs() < 1e-9, "{vx}: {px} vs {py}");
        }
    }
}

#[test]
fn oracle_refuses_large_inputs() {
    let dir = tempfile::tempdir().unwrap();
    write_numbers(dir.path(), &[0.5; 25]);
    let plan = dir.path().join("plan.json");
    fs::write(&plan, SUM_PLAN).unwrap();
    let o = pgfdb(&["oracle", "--plan", path(&plan), "--data", path(dir.path()), "--output", path(&dir.path().join("o.json"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("oracle limited to 24 tuples"), "{}", stderr(&o));
}

#[test]
fn validation_and_runtime_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write_numbers(dir.path(), &[0.5, 0.5]);
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"nodes":[{"id":"s","op":"scan","table":"t"},{"id":"p","op":"project","input":"s","columns":["nope"]}],"output":"p"}"#,
    )
    .unwrap();
    let out = dir.path().join("o.json");
    let o = pgfdb(&["run", "--plan", path(&bad), "--data", path(dir.path()), "--output", path(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown column `nope`"), "{}", stderr(&o));
    assert!(!out.exists());

    fs::write(dir.path().join("t.csv"), "v,p\n1,0.5\n3,0.5\n67108864,0.5\n").unwrap();
    let plan = dir.path().join("plan.json");
    fs::write(&plan, SUM_PLAN).unwrap();
    let o = pgfdb(&["run", "--plan", path(&plan), "--data", path(dir.path()), "--output", path(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("use approximation"));
    let o = pgfdb(&["run", "--plan", path(&plan), "--data", path(dir.path()), "--output", path(&out), "--method", "normal"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_json(&out)["rows"][0]["aggregates"][1]["kind"], "normal");

    fs::write(dir.path().join("t.csv"), "v,p\n1,0.5\n2,1.5\n").unwrap();
    let o = pgfdb(&["run", "--plan", path(&plan), "--data", path(dir.path()), "--output", path(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("row 2"), "{}", stderr(&o));

    assert_eq!(pgfdb(&["run", "--plan"]).status.code(), Some(1));
    assert_eq!(pgfdb(&["--help"]).status.code(), Some(0));
}

#[test]
fn gen_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = pgfdb(&["gen", "--rows", "200", "--seed", "42", "--out", path(d.path())]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let mut files: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    assert!(files.iter().any(|f| f == "catalog.json"));
    for f in files {
        assert_eq!(fs::read(a.path().join(&f)).unwrap(), fs::read(b.path().join(&f)).unwrap(), "{f:?}");
    }
}

#[test]
fn gen_output_runs_q20() {
    let dir = tempfile::tempdir().unwrap();
    let o = pgfdb(&[
        "gen",
        "--schema",
        path(&root().join("plans/q20_mini_schema.json")),
        "--rows",
        "8",
        "--seed",
        "20",
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let q20 = root().join("plans/q20.json");
    let o = pgfdb(&["run", "--plan", path(&q20), "--data", path(dir.path()), "--output", path(&a)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = pgfdb(&["oracle", "--plan", path(&q20), "--data", path(dir.path()), "--output", path(&b)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (a, b) = (read_json(&a), read_json(&b));
    let rows = |d: &Value| {
        let mut r: Vec<(String, f64)> = d["rows"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| (r["values"].to_string(), r["p"].as_f64().unwrap()))
            .collect();
        r.sort_by(|x, y| x.0.cmp(&y.0));
        r
    };
    let (x, y) = (rows(&a), rows(&b));
    assert_eq!(x.len(), 2);
    assert_eq!(x.len(), y.len());
    for ((kx, px), (ky, py)) in x.iter().zip(&y) {
        assert_eq!(kx, ky);
        assert!((px - py).abs() < 1e-9);
    }
}
