// One pass through the four design-loop phases in a session: investigate,
// compose artifacts, analyse them and deploy the result.
//
// `cargo run --example ck_session`

use std::error::Error;

use chrono::Utc;
use concept_workbench::service::Profile;
use concept_workbench::Session;

fn fixture(name: &str) -> String {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

const PROFILES: &[&str] = &[
    r#"{"name": "investigate", "phase": "start_investigation",
        "parameters": {"attributes": ["violence", "domestic", "threat", "weapon", "domestic_violence"]}}"#,
    r#"{"name": "lattice", "phase": "compose_artifact",
        "parameters": {"output": "lattice", "kind": "fca"}}"#,
    r#"{"name": "tracks", "phase": "compose_artifact",
        "parameters": {"output": "tracks", "kind": "tca", "entity_rule": "per_suspect", "granularity": "day"}}"#,
    r#"{"name": "map", "phase": "compose_artifact",
        "parameters": {"output": "map", "kind": "esom", "rows": 8, "cols": 10, "epochs": 30, "seed": 3}}"#,
    r#"{"name": "analyse", "phase": "analyze_artifact",
        "parameters": {"output": "report", "artifacts": ["lattice", "tracks", "map"]}}"#,
    r#"{"name": "deploy", "phase": "deploy_knowledge",
        "parameters": {"output": "bundle", "artifacts": ["report", "lattice"],
                       "annotations": {"lattice": "reviewed"}}}"#,
];

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut session = Session::create(
        "example",
        &fixture("police_reports.xml"),
        &fixture("police_ontology.xml"),
        "police_reports.xml",
        Utc::now(),
    )?;

    // Profiles are stored first (master mode) and then run by name.
    for text in PROFILES {
        session.put_profile(Profile::from_json(text)?)?;
    }
    for name in ["investigate", "lattice", "tracks", "map", "analyse", "deploy"] {
        let outcome = session.run_stored(name)?;
        println!("{name:>12}: {} ({:?}) digest {}", outcome.artifact, outcome.kind, &outcome.digest[..12]);
        for w in outcome.warnings {
            println!("              warning: {w}");
        }
    }

    // Artifacts are available in several renderings, optionally enveloped.
    println!("{}", session.get_artifact("lattice", "dot", None)?.lines().next().unwrap_or(""));
    let xml = session.get_artifact("report", "xml", Some("json"))?;
    println!("{}", xml.lines().nth(1).unwrap_or(""));

    // The audit log replays to identical artifacts and every link resolves.
    let report = session.replay();
    println!("replay identical: {}", report.all_identical());
    let sweep = session.link_sweep();
    println!("links checked: {}, failures: {}", sweep.checked, sweep.failures.len());
    assert!(report.all_identical() && sweep.failures.is_empty());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
