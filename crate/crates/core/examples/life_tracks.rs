// Temporal concept analysis: follow each suspect through the lattice.
//
// `cargo run --example life_tracks`

use std::error::Error;

use chrono::Utc;
use concept_workbench::context::build_context;
use concept_workbench::corpus::{Corpus, InvertedIndex, Section};
use concept_workbench::fca::ConceptLattice;
use concept_workbench::tca::{build_time_system, compute_life_tracks, export_tracks};
use concept_workbench::time::Granularity;
use concept_workbench::Ontology;

fn fixture(name: &str) -> String {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let corpus = Corpus::from_xml(&fixture("police_reports.xml"), "police_reports.xml", Utc::now())?;
    let ontology = Ontology::from_xml(&fixture("police_ontology.xml"))?;
    let index = InvertedIndex::build(&corpus, &Section::ALL.into_iter().collect());
    let ctx = build_context(corpus.documents(), &ontology.attribute_names(), &ontology, &index)?;
    let lattice = ConceptLattice::from_context(&ctx)?;

    let rule = ontology.object_cluster_rule("per_suspect").ok_or("no per_suspect rule")?;
    let systems = build_time_system(corpus.documents(), rule, Granularity::Day)?;
    for w in &systems.warnings {
        println!("warning: {w}");
    }
    let tracks = compute_life_tracks(&systems.systems, &lattice, &ctx)?;
    for t in &tracks {
        println!("{}: concepts {:?}", t.entity, t.concepts);
        for tr in &t.transitions {
            println!(
                "  {} ({}) -> {} ({})  c{} -> c{}",
                tr.from_granule.object_id,
                tr.from_granule.instant.format("%Y-%m-%d"),
                tr.to_granule.object_id,
                tr.to_granule.instant.format("%Y-%m-%d"),
                tr.from_concept,
                tr.to_concept
            );
        }
    }
    let json = export_tracks(&lattice, &tracks)?;
    println!("{} bytes of lattice json with tracks", json.len());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
