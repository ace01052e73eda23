mod common;

use std::process::{Command, Output};

use common::*;
use concept_workbench::service::parse_envelope;
use serde_json::Value;

fn workbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_workbench"))
        .args(args)
        .env_remove("WORKBENCH_DATA_DIR")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = workbench(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn ingest_reports_phrase_hits() {
    let out = ok(&["ingest", "--corpus", &fixture_path("survey_corpus.xml"), "--phrase", "data mining"]);
    assert!(out.starts_with("6 documents"));
    assert!(out.contains("\"data mining\": P1 P4"));
}

#[test]
fn ontology_check_accepts_fixtures_and_rejects_garbage() {
    let out = ok(&[
        "ontology", "check",
        "--ontology", &fixture_path("police_ontology.xml"),
        "--corpus", &fixture_path("police_reports.xml"),
    ]);
    assert!(out.starts_with("ok:"));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.xml");
    std::fs::write(&bad, "<ontology><attribute kind=\"compound\" name=\"x\"><ref name=\"x\"/></attribute></ontology>").unwrap();
    let out = workbench(&["ontology", "check", "--ontology", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn context_then_fca() {
    let dir = tempfile::tempdir().unwrap();
    let cxt = dir.path().join("survey.cxt");
    ok(&[
        "context", "build",
        "--corpus", &fixture_path("survey_corpus.xml"),
        "--ontology", &fixture_path("survey_ontology.xml"),
        "--attributes", "KD,IR,SE,ONT",
        "--format", "cxt",
        "--out", cxt.to_str().unwrap(),
    ]);
    assert_eq!(std::fs::read_to_string(&cxt).unwrap(), fixture("survey_expected.cxt"));
    let lattice: Value = serde_json::from_str(&ok(&["fca", "--context", cxt.to_str().unwrap()])).unwrap();
    assert_eq!(lattice["nodes"].as_array().unwrap().len(), 10);
    assert!(ok(&["fca", "--context", cxt.to_str().unwrap(), "--format", "dot"]).starts_with("digraph"));
}

#[test]
fn tca_prints_tracks() {
    let out = ok(&[
        "tca",
        "--corpus", &fixture_path("police_reports.xml"),
        "--ontology", &fixture_path("police_ontology.xml"),
        "--entity-rule", "per_suspect",
    ]);
    let v: Value = serde_json::from_str(&out).unwrap();
    let tracks = v["trackList"].as_array().unwrap();
    assert_eq!(tracks.len(), 3);
    assert_eq!(tracks[0]["steps"].as_array().unwrap().len(), 3);
}

#[test]
fn esom_trains_on_vectors() {
    let out = ok(&[
        "esom", "--vectors", &fixture_path("two_clusters.json"),
        "--rows", "6", "--cols", "8", "--epochs", "5", "--seed", "1",
    ]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["labels"].as_array().unwrap().len(), 40);
    assert_eq!(ok(&["esom", "--vectors", &fixture_path("two_clusters.json"), "--rows", "6", "--cols", "8", "--epochs", "5", "--seed", "1"]), out);
}

#[test]
fn hmm_process_and_baum_welch() {
    let base = [
        "hmm",
        "--corpus", &fixture_path("clinical_activities.xml"),
        "--ontology", &fixture_path("clinical_ontology.xml"),
        "--entity-rule", "per_patient",
        "--symbol-field", "activity",
        "--groups", &fixture_path("activity_groups.json"),
    ]
    .map(String::from);
    let args = |extra: &[&str]| -> Vec<String> { base.iter().cloned().chain(extra.iter().map(|s| s.to_string())).collect() };
    let run = |extra: &[&str]| {
        let a = args(extra);
        ok(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    let graph: Value = serde_json::from_str(&run(&[])).unwrap();
    assert_eq!(graph["nodes"].as_array().unwrap().len(), 12);
    assert!(run(&["--format", "dot"]).contains("s0 -> s1"));
    let hidden: Value = serde_json::from_str(&run(&["--states", "2", "--format", "checkpoint"])).unwrap();
    assert_eq!(hidden["model"]["n"], 2);
    // Without groups every raw activity code becomes its own state.
    let a: Vec<String> = base[..9].to_vec();
    let raw: Value = serde_json::from_str(&ok(&a.iter().map(String::as_str).collect::<Vec<_>>())).unwrap();
    assert!(raw["nodes"].as_array().unwrap().len() > 12);
}

#[test]
fn sessions_and_export_through_a_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let id = ok(&[
        "session", "create",
        "--corpus", &fixture_path("police_reports.xml"),
        "--ontology", &fixture_path("police_ontology.xml"),
        "--data-dir", d,
    ])
    .trim()
    .to_string();
    for p in full_loop("police") {
        let file = dir.path().join(format!("{}.profile.json", p.name));
        std::fs::write(&file, serde_json::to_string(&p).unwrap()).unwrap();
        ok(&["session", "run", "--session", &id, "--profile", file.to_str().unwrap(), "--data-dir", d]);
    }
    let summary: Value = serde_json::from_str(&ok(&["session", "show", "--session", &id, "--data-dir", d])).unwrap();
    assert_eq!(summary["artifacts"].as_array().unwrap().len(), 8);
    let xml = ok(&["export", "--session", &id, "--artifact", "lattice", "--format", "xml", "--payload", "dot", "--data-dir", d]);
    assert!(parse_envelope(&xml).unwrap().payload.starts_with("digraph"));
    let out = workbench(&["export", "--session", &id, "--artifact", "lattice"]);
    assert!(!out.status.success(), "no data dir configured");
}
