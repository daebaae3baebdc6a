use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dimerglue::corpus::{load_dir, smallest, torus_grid, CORPUS_SEED};
use dimerglue::io::InstanceFile;
use serde_json::Value;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dimerglue")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn four_cycle_dimer() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "c4.json", r#"{"vertices":4,"edges":[{"u":0,"v":1},{"u":1,"v":2},{"u":2,"v":3},{"u":3,"v":0}]}"#);
    let o = run(&["partition", "--input", &f, "--mode", "dimer"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "x1*x3 + x2*x4");
    let o = run(&["partition", "--input", &f, "--mode", "dimer", "--format", "json"]);
    assert_eq!(json(&o)["polynomial"], "x1*x3 + x2*x4");
}

#[test]
fn triangle_even() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "t.json", r#"{"vertices":3,"edges":[{"u":0,"v":1},{"u":1,"v":2},{"u":2,"v":0}]}"#);
    let o = run(&["partition", "--input", &f, "--mode", "even"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "1 + x1*x2*x3");
}

#[test]
fn over_capacity_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut edges = Vec::new();
    for u in 0..10 {
        for v in u + 1..10 {
            edges.push(format!(r#"{{"u":{u},"v":{v}}}"#));
        }
    }
    let f = write(dir.path(), "k10.json", &format!(r#"{{"vertices":10,"edges":[{}]}}"#, edges.join(",")));
    let o = run(&["partition", "--input", &f, "--mode", "even"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("capacity"));
}

#[test]
fn malformed_json_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.json", r#"{"vertices":3,"edges":[{"u":0,"v":1},{"u":1,"v":"two"}]}"#);
    let o = run(&["partition", "--input", &f, "--mode", "even"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("edges[1].v"), "{}", stderr(&o));
}

#[test]
fn corpus_unsigned_ising_passes() {
    let fx = fixtures();
    let o = run(&["glue", "verify", "--input", fx.to_str().unwrap(), "--mode", "ising", "--unsigned", "--no-timings"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert_eq!(r["failed"], 0);
    assert!(r["passed"].as_u64().unwrap() >= 50);
    let first = &r["checks"][0];
    assert_eq!(first["theorem"], "unsigned-ising");
    assert_eq!(first["lhs"], first["rhs"]);
    assert_eq!(first["equal"], true);
}

#[test]
fn all_orientations_of_smallest_fixture() {
    let corpus = load_dir(&fixtures()).unwrap();
    let small = smallest(&corpus).unwrap();
    let f = fixtures().join(format!("{}.json", small.name));
    let o = run(&[
        "glue", "verify", "--input", f.to_str().unwrap(), "--mode", "dimer", "--signed", "--all-orientations",
        "--format", "csv", "--jobs", "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let mut rd = csv::Reader::from_reader(o.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[1][1], "signed-dimer[all]");
    assert_eq!(&rows[1][2], "true");
    let total = 1u64 << small.embedded.graph().edge_count();
    assert!(rows[1][6].starts_with(&format!("{total} orientations")));
}

#[test]
fn sweep_over_capacity_exits_two() {
    let corpus = load_dir(&fixtures()).unwrap();
    let big = corpus.iter().max_by_key(|c| c.embedded.graph().edge_count()).unwrap();
    assert!(big.embedded.graph().edge_count() > 20);
    let f = fixtures().join(format!("{}.json", big.name));
    let o = run(&["glue", "verify", "--input", f.to_str().unwrap(), "--mode", "dimer", "--all-orientations"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn odd_cut_is_rejected() {
    let corpus = load_dir(&fixtures()).unwrap();
    let inst = corpus.iter().find(|c| c.cut.k() == 2).unwrap();
    let mut file = inst.to_file();
    let cut = file.cut.as_mut().unwrap();
    let dropped = cut.vertices.pop().unwrap();
    cut.side.insert(dropped.to_string(), 1);
    cut.edge_sides.clear();
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "odd.json", &file.to_json().unwrap());
    let o = run(&["glue", "verify", "--input", &f]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("invalid input"), "{}", stderr(&o));
}

#[test]
fn reports_do_not_depend_on_jobs() {
    let fx = fixtures();
    let base = ["glue", "verify", "--input", fx.to_str().unwrap(), "--mode", "dimer", "--no-timings"];
    let one = json(&run(&[&base[..], &["--jobs", "1"]].concat()));
    let three = json(&run(&[&base[..], &["--jobs", "3"]].concat()));
    assert_eq!(one["checks"], three["checks"]);
    let names: Vec<&str> = one["checks"].as_array().unwrap().iter().map(|c| c["instance"].as_str().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
}

#[test]
fn straight_torus_misses_the_squared_trace() {
    // equal straight steps give det = 1/4 and trace product 32/3 for twist +
    let o = run(&["critical", "verify", "--n", "2", "--m", "1", "--tau", "i", "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let r = json(&o);
    let plus = &r["checks"][0];
    assert_eq!(plus["theorem"], "det-trace[twist=+]");
    assert_eq!(plus["equal"], false);
    assert!(plus["lhs"].as_str().unwrap().starts_with("2.5000000000"));
}

#[test]
fn seeded_torus_keeps_the_twist_ratio() {
    let args = ["critical", "verify", "--n", "2", "--m", "1", "--tau", "i", "--seed", "1", "--format", "json"];
    let a = run(&args);
    let b = run(&args);
    let (ra, rb) = (json(&a), json(&b));
    assert_eq!(ra["checks"], rb["checks"]);
    let ratio = ra["checks"].as_array().unwrap().iter().find(|c| c["theorem"] == "twist-ratio").unwrap();
    assert_eq!(ratio["equal"], true);
    assert!(ratio["residual"].as_f64().unwrap() < 1e-8);
    let o = run(&["critical", "verify", "--n", "3", "--m", "3", "--tau", "0.2+1.1i", "--seed", "5", "--format", "json"]);
    let r = json(&o);
    for c in r["checks"].as_array().unwrap().iter().filter(|c| c["theorem"].as_str().unwrap().starts_with("block")) {
        assert_eq!(c["equal"], true, "{c}");
    }
}

fn limit_rows(o: &Output) -> Vec<csv::StringRecord> {
    let mut rd = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(
        rd.headers().unwrap().iter().collect::<Vec<_>>(),
        ["level", "n", "m", "regularized", "target", "abs_error", "unregularized_magnitude"]
    );
    rd.records().map(|r| r.unwrap()).collect()
}

#[test]
fn limit_table_at_tau_i() {
    let o = run(&["critical", "limit", "--tau", "i", "--levels", "3"]);
    let rows = limit_rows(&o);
    assert_eq!(rows.len(), 4);
    let err: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    // against the square the error column grows, so the check fails
    assert!(err.windows(2).all(|w| w[1] > w[0]), "{err:?}");
    assert_eq!(o.status.code(), Some(1));
    let n: Vec<usize> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(n, [4, 8, 16, 32]);

    let o = run(&["critical", "limit", "--tau", "i", "--levels", "3", "--target", "fourth"]);
    assert_eq!(o.status.code(), Some(0));
    let err: Vec<f64> = limit_rows(&o).iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(err.windows(2).all(|w| w[1] < w[0]), "{err:?}");
}

#[test]
fn bad_tau_is_rejected() {
    for tau in ["-i", "0.5", "1-2i"] {
        let o = run(&["critical", "limit", "--tau", tau]);
        assert_eq!(o.status.code(), Some(3), "{tau}");
        assert!(stderr(&o).contains("positive imaginary part"), "{}", stderr(&o));
    }
    let o = run(&["critical", "verify", "--n", "2", "--m", "1", "--tau", "nonsense"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn cft_eval_reports_value_and_tail() {
    let q = (-2.0 * std::f64::consts::PI).exp().to_string();
    let o = run(&["cft", "eval", "--which", "NS-NS", "--q-re", &q, "--q-im", "0", "--N", "30"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    let re = r["value"]["re"].as_f64().unwrap();
    let direct: f64 = (0..40).map(|n| (1.0 - q.parse::<f64>().unwrap().powf(n as f64 + 0.5)).powi(4)).product();
    assert!((re - direct).abs() < 1e-14, "{re} {direct}");
    assert!(r["tail_bound"].as_f64().unwrap() < 1e-60);
    let o = run(&["cft", "eval", "--which", "R-R", "--q-re", &q, "--q-im", "0", "--N", "30"]);
    assert_eq!(json(&o)["value"]["re"], 0.0);
    let o = run(&["cft", "eval", "--which", "NS-NS", "--q-re", "1.5", "--q-im", "0", "--N", "30"]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&["cft", "triple", "--q-re", &q, "--q-im", "0", "--N", "30"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn arf_table_on_torus_grid() {
    let dir = tempfile::tempdir().unwrap();
    let eg = torus_grid(2, 2, 0).unwrap();
    let f = write(dir.path(), "grid.json", &InstanceFile::from_instance(None, &eg, None).to_json().unwrap());
    let o = run(&["pfaffian", "--input", &f, "--arf-table"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    let entries = r["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 4);
    for e in entries {
        assert!(["+1/2", "-1/2"].contains(&e["coef"].as_str().unwrap()), "{e}");
    }
    assert_eq!(entries[0]["S"], serde_json::json!([]));
    assert_eq!(r["holds"], true);
}

#[test]
fn signed_polynomials_of_a_torus_grid() {
    let dir = tempfile::tempdir().unwrap();
    let eg = torus_grid(2, 2, 0).unwrap();
    let f = write(dir.path(), "grid.json", &InstanceFile::from_instance(None, &eg, None).to_json().unwrap());
    let o = run(&["signed", "--input", &f, "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert_eq!(r["forms"].as_array().unwrap().len(), 4);
    assert_eq!(r["canonical"], true);
}

#[test]
fn corpus_command_reproduces_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["corpus", "--out", out, "--seed", &CORPUS_SEED.to_string()]);
    assert_eq!(o.status.code(), Some(0));
    let mut names: Vec<_> = std::fs::read_dir(fixtures()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        let want = std::fs::read_to_string(fixtures().join(&n)).unwrap();
        let got = std::fs::read_to_string(dir.path().join(&n)).unwrap();
        assert_eq!(got, want, "{n:?}");
    }
}
