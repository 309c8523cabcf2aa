use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn informality(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_informality"))
        .args(args)
        .current_dir(dir)
        .env_remove("INFORMALITY_INPUT")
        .env_remove("INFORMALITY_LAYOUT")
        .env_remove("INFORMALITY_RECODES")
        .env_remove("INFORMALITY_POLICY")
        .env_remove("INFORMALITY_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = informality(dir, args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

const HEADER: &str = "record_id,weight,mpce,occupation,industry,sector,gender,social_group,age,age_group,region,\
enterprise_ownership,enterprise_size,job_status,social_security,employment_class\n";

fn classified_row(id: &str, weight: f64, mpce: f64, class: &str) -> String {
    format!("{id},{weight},{mpce},,,,,,,,,Unknown,Unknown,Unknown,Unknown,{class}\n")
}

fn synth(dir: &Path, records: &str) {
    ok(dir, &["synth", "--seed", "11", "--records", records]);
}

#[test]
fn two_record_decomposition_matches_hand_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{HEADER}{}{}", classified_row("a", 1.0, 1.0, "Formal"), classified_row("b", 1.0, 3.0, "Informal"));
    fs::write(dir.path().join("two.csv"), text).unwrap();
    ok(dir.path(), &["decompose", "--input", "two.csv", "--format", "json"]);
    let d = json(&dir.path().join("decompose-employment_class.json"));

    let a = 1.3_f64;
    let total = ((0.5_f64.powf(a) + 1.5_f64.powf(a)) / 2.0 - 1.0) / (a * (a - 1.0));
    let close = |v: &Value, x: f64| (v.as_f64().unwrap() - x).abs() < 1e-12;
    assert!(close(&d["total"], total), "{}", d["total"]);
    assert!(close(&d["within"], 0.0));
    assert!(close(&d["between"], total));
    assert!(close(&d["share_between_percent"], 100.0));
    let rows = d["rows"].as_array().unwrap();
    assert!(close(&rows[0]["p"], 0.5) && close(&rows[0]["r"], 0.25) && close(&rows[1]["r"], 0.75));
    assert!(close(&rows[0]["w"], 0.25_f64.powf(a) * 0.5_f64.powf(1.0 - a)));
}

#[test]
fn classify_then_decompose_equals_fused_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "3000");
    ok(d, &["classify", "--input", "synth.dat", "--layout", "synth.layout.toml"]);
    ok(d, &["decompose", "--input", "classify.csv", "--category", "occupation", "--out-dir", "staged"]);
    ok(d, &["decompose", "--input", "synth.dat", "--layout", "synth.layout.toml", "--category", "occupation", "--out-dir", "fused"]);
    let name = "decompose-occupation.csv";
    assert_eq!(fs::read(d.join("staged").join(name)).unwrap(), fs::read(d.join("fused").join(name)).unwrap());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "2000");
    let runs: [&[&str]; 4] = [
        &["nested-decompose", "--format", "json"],
        &["decompose", "--category", "gender"],
        &["tabulate", "--category", "occupation", "--cross", "sector"],
        &["classify"],
    ];
    for args in runs {
        for target in ["one", "two"] {
            let mut full = args.to_vec();
            full.extend(["--input", "synth.dat", "--layout", "synth.layout.toml", "--out-dir", target]);
            ok(d, &full);
        }
    }
    let mut compared = 0;
    for entry in fs::read_dir(d.join("one")).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_string_lossy().ends_with("manifest.json") {
            continue;
        }
        assert_eq!(fs::read(d.join("one").join(&name)).unwrap(), fs::read(d.join("two").join(&name)).unwrap(), "{name:?}");
        compared += 1;
    }
    assert_eq!(compared, 4);
}

#[test]
fn nested_contributions_add_to_100() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "4000");
    ok(d, &["nested-decompose", "--input", "synth.dat", "--layout", "synth.layout.toml", "--format", "json"]);
    let n = json(&d.join("nested-decompose-employment_class-occupation.json"));
    let mut sum = n["outer"]["share_between_percent"].as_f64().unwrap();
    for block in n["inner"].as_array().unwrap() {
        let r = &block["result"];
        sum += r["share_between_percent"].as_f64().unwrap();
        for row in r["rows"].as_array().unwrap() {
            sum += row["c_t_percent"].as_f64().unwrap();
        }
    }
    assert!((sum - 100.0).abs() < 1e-6, "{sum}");
    let manifest = json(&d.join("nested-decompose-employment_class-occupation.manifest.json"));
    assert!(manifest["exclusions"]["indeterminate"]["weight_share"].as_f64().unwrap() > 0.0);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn bundled_table_validates_and_reports_the_index_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["validate-table", "--format", "json"]);
    let v = json(&dir.path().join("validate-table.json"));
    assert_eq!(v["consistent"], Value::Bool(true));
    assert!(v["max_c_w_deviation"].as_f64().unwrap() <= 0.001);
    let mismatch = v["findings"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["kind"] == "index-mismatch")
        .expect("0.227 vs 0.223 is flagged");
    assert_eq!(mismatch["block"], "inner:Informal");
}

#[test]
fn inconsistent_table_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let broken = informality::decompose::table::BUNDLED_FIXTURE.replace("0.056", "0.090");
    fs::write(dir.path().join("t.csv"), broken).unwrap();
    let out = informality(dir.path(), &["validate-table", "--fixture", "t.csv"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(informality(d, &["decompose"]).status.code(), Some(2), "missing input");
    assert_eq!(informality(d, &["decompose", "--input", "nope.csv"]).status.code(), Some(2));
    assert_eq!(informality(d, &["decompose", "--category", "shoe_size"]).status.code(), Some(2));

    fs::write(d.join("bad.csv"), format!("{HEADER}a,1,x,,,,,,,,,Unknown,Unknown,Unknown,Unknown,Formal\n")).unwrap();
    assert_eq!(informality(d, &["decompose", "--input", "bad.csv"]).status.code(), Some(3));

    let flat = format!("{HEADER}{}{}", classified_row("a", 1.0, 5.0, "Formal"), classified_row("b", 2.0, 5.0, "Informal"));
    fs::write(d.join("flat.csv"), flat).unwrap();
    let out = informality(d, &["decompose", "--input", "flat.csv"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(d.join("decompose-employment_class.csv").exists(), "degenerate results are still written");

    let out = informality(d, &["decompose", "--input", "flat.csv"]);
    assert_eq!(out.status.code(), Some(2), "refuses to overwrite");
    assert_eq!(informality(d, &["decompose", "--input", "flat.csv", "--force"]).status.code(), Some(4));
}

#[test]
fn input_can_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let text = format!("{HEADER}{}{}", classified_row("a", 1.0, 1.0, "Formal"), classified_row("b", 1.0, 3.0, "Informal"));
    fs::write(d.join("two.csv"), text).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_informality"))
        .args(["tabulate", "--category", "sector"])
        .env("INFORMALITY_INPUT", "two.csv")
        .env("INFORMALITY_OUT_DIR", "out")
        .current_dir(d)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(d.join("out/tabulate-sector.csv")).unwrap();
    assert!(table.contains("NA,50.00,50.00,100.00,100.00"), "{table}");
}

#[test]
fn ingest_lists_rejected_lines() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "100");
    let mut lines: Vec<String> = fs::read_to_string(d.join("synth.dat")).unwrap().lines().map(String::from).collect();
    lines[4].truncate(20);
    lines[9].replace_range(20..21, "X");
    fs::write(d.join("synth.dat"), lines.join("\n") + "\n").unwrap();
    ok(d, &["ingest", "--input", "synth.dat", "--layout", "synth.layout.toml"]);
    let report = fs::read_to_string(d.join("ingest.csv")).unwrap();
    let rejected: Vec<&str> = report.lines().skip(1).collect();
    assert_eq!(rejected.len(), 2, "{report}");
    assert!(rejected[0].contains(",5,") && rejected[1].contains(",10,"));
    let manifest = json(&d.join("ingest.manifest.json"));
    assert_eq!(manifest["ingest"]["accepted"], 98);
}
