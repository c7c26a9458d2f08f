use std::path::Path;
use std::process::{Command, Output};

use hubbard_anneal::circuit::parse_qasm;
use hubbard_anneal::hamiltonian::{qubit_hamiltonian, HubbardParams};
use hubbard_anneal::oracles::{REFERENCE_GROUND_ENERGIES, REFERENCE_U};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hubbard-anneal"))
        .current_dir(dir)
        .env_remove("HUBBARD_ANNEAL_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn rows(csv_text: &str) -> Vec<csv::StringRecord> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(csv_text.as_bytes())
        .records()
        .map(Result::unwrap)
        .collect()
}

fn column(csv_text: &str, name: &str) -> Vec<f64> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(csv_text.as_bytes());
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|x| x.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn odd_length_at_half_filling_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["bethe", "--L", "3", "--U", "4"][..],
        &["anneal", "--L", "5", "--U", "4", "--TA", "1"],
        &["sweep", "--L", "2..5..1", "--U", "4", "--TA", "1"],
    ] {
        let out = run(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("even"));
    }
}

#[test]
fn argument_and_capacity_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_tau = run(dir.path(), &["anneal", "--L", "2", "--U", "4", "--TA", "1", "--tau", "0.3"]);
    assert_eq!(bad_tau.status.code(), Some(2));
    let bad_ratio = run(dir.path(), &["anneal", "--L", "2", "--U", "4", "--TA", "1.01"]);
    assert_eq!(bad_ratio.status.code(), Some(2));
    let too_big = run(dir.path(), &["anneal", "--L", "16", "--U", "4", "--TA", "0.025"]);
    assert_eq!(too_big.status.code(), Some(3));
}

#[test]
fn bethe_table_matches_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    for (col, u) in REFERENCE_U.iter().enumerate() {
        let text = ok(dir.path(), &["bethe", "--L", "2..20", "--U", &u.to_string()]);
        assert!(text.starts_with("# hubbard-anneal "));
        assert!(text.lines().nth(1).unwrap().starts_with("# config {"));
        let e0 = column(&text, "E0");
        let res = column(&text, "residual");
        assert_eq!(e0.len(), REFERENCE_GROUND_ENERGIES.len());
        for ((l, row), (e, r)) in REFERENCE_GROUND_ENERGIES.iter().zip(e0.iter().zip(&res)) {
            assert!((e - row[col]).abs() < 1e-5, "L = {l} U = {u}: {e} vs {}", row[col]);
            assert!(*r < 1e-10);
        }
    }
}

#[test]
fn bethe_with_explicit_filling() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["bethe", "--L", "5", "--U", "4", "--filling", "4:2"]);
    let r = rows(&text);
    assert_eq!(r.len(), 1);
    assert_eq!(&r[0][3], "4");
    assert_eq!(&r[0][4], "2");
    let bad = run(dir.path(), &["bethe", "--L", "4", "--U", "4", "--filling", "two"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn sweep_writes_every_grid_point_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--L", "2,4", "--U", "4", "--TA", "1:10:log5", "--jobs", "2"];
    ok(dir.path(), &args);
    let path = dir.path().join("sweep.csv");
    let first = std::fs::read(&path).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    let recs = rows(&text);
    assert_eq!(recs.len(), 12);
    for d in column(&text, "delta_E") {
        assert!(d >= -1e-9, "negative residual {d}");
    }
    // Records come out in grid order whatever the worker scheduling.
    let ls = column(&text, "L");
    assert!(ls.windows(2).all(|w| w[0] <= w[1]));

    ok(dir.path(), &args);
    assert_eq!(std::fs::read(&path).unwrap(), first, "rerun must not touch the file");

    // Extending the grid only appends the new points.
    ok(dir.path(), &["sweep", "--L", "2,4,6", "--U", "4", "--TA", "1:10:log5"]);
    let grown = std::fs::read_to_string(&path).unwrap();
    assert!(grown.starts_with(&text));
    assert_eq!(rows(&grown).len(), 18);
    assert_eq!(grown.matches("# config ").count(), 2);
}

#[test]
fn free_chain_anneal_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["anneal", "--L", "4", "--U", "0", "--TA", "10"]);
    let d = column(&text, "delta_E")[0];
    assert!(d.abs() < 1e-6, "delta_E = {d}");
}

#[test]
fn anneal_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(
        dir.path(),
        &["anneal", "--L", "2", "--U", "4", "--TA", "2", "--format", "json", "--grouping", "xy-parity"],
    );
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["steps"], 80);
    assert_eq!(v["grouping"], "xy-parity");
    assert!(v["delta_E"].as_f64().unwrap() > 0.0);
}

#[test]
fn export_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["export", "--L", "2", "--U", "4", "--TA", "1", "--output", "a.qasm"];
    ok(dir.path(), &args);
    let a = std::fs::read_to_string(dir.path().join("a.qasm")).unwrap();
    ok(dir.path(), &args);
    assert_eq!(std::fs::read_to_string(dir.path().join("a.qasm")).unwrap(), a);
    assert!(a.starts_with("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n// hubbard-anneal "));

    let prog = parse_qasm(&a).unwrap();
    let state = prog.simulate().unwrap();
    let h = qubit_hamiltonian(&HubbardParams::half_filled(2, 1.0, 4.0).unwrap(), 1.0).unwrap();
    let energy = state.expectation(&h).unwrap();
    let rec = ok(dir.path(), &["anneal", "--L", "2", "--U", "4", "--TA", "1", "--format", "json"]);
    let rec: serde_json::Value = serde_json::from_str(&rec).unwrap();
    let direct = rec["final_energy"].as_f64().unwrap();
    assert!((energy - direct).abs() < 1e-10, "{energy} vs {direct}");

    let single = run(dir.path(), &["export", "--L", "2", "--U", "4", "--steps", "1"]);
    assert!(single.status.success());
    assert!(String::from_utf8_lossy(&single.stderr).contains("steps 32 (32 per step)"));
    assert!(dir.path().join("anneal_L2_U4_linear_1steps.qasm").exists());
}

#[test]
fn export_json() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["export", "--L", "2", "--U", "4", "--steps", "2", "--format", "json", "--output", "c.json"]);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.json")).unwrap()).unwrap();
    assert!(v["version"].is_string());
    assert!(v["circuit"].is_object());
}

#[test]
fn fit_reports_sizes_without_onset() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["sweep", "--L", "2", "--U", "4", "--TA", "1,2"]);
    let text = ok(dir.path(), &["fit", "sweep.csv"]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["groups"][0]["report"]["no-onset"], serde_json::json!([2]));
    let table = ok(dir.path(), &["fit", "sweep.csv", "--table"]);
    assert!(table.contains("no onset"));
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(run(dir.path(), &["fit", "empty.csv"]).status.code(), Some(2));
}

#[test]
fn oracle_subset_and_junit() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(
        dir.path(),
        &["oracles", "--only", "qasm_rzz_matrix,bethe_vs_ed", "--junit", "o.xml"],
    );
    assert!(text.contains("qasm_rzz_matrix"));
    let xml = std::fs::read_to_string(dir.path().join("o.xml")).unwrap();
    assert!(xml.contains("<testsuite"));
    assert_eq!(run(dir.path(), &["oracles", "--only", "nope"]).status.code(), Some(2));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hubbard-anneal"))
        .current_dir(dir.path())
        .env("HUBBARD_ANNEAL_OUT", "runs")
        .args(["sweep", "--L", "2", "--U", "8", "--TA", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("runs/sweep.csv").exists());
}
