// Evaluate ontology attributes, object clusters and segmentations.
//
// `cargo run --example ontology_rules`

use std::error::Error;

use chrono::Utc;
use concept_workbench::corpus::{Corpus, InvertedIndex, Section};
use concept_workbench::ontology::{apply_object_cluster, apply_segmentation};
use concept_workbench::Ontology;

fn fixture(name: &str) -> String {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let corpus = Corpus::from_xml(&fixture("police_reports.xml"), "police_reports.xml", Utc::now())?;
    let ontology = Ontology::from_xml(&fixture("police_ontology.xml"))?;
    let index = InvertedIndex::build(&corpus, &Section::ALL.into_iter().collect());
    ontology.validate_terms(&index)?;

    println!("attributes: {:?}", ontology.attribute_names());
    for doc in corpus.documents() {
        let mut present = Vec::new();
        for attr in ontology.attributes() {
            if ontology.evaluate_attribute(attr, doc, &index)? {
                present.push(attr.name.as_str());
            }
        }
        println!("{:>4} {:?}", doc.id, present);
    }

    let rule = ontology.object_cluster_rule("per_suspect").ok_or("no per_suspect rule")?;
    let clustering = apply_object_cluster(corpus.documents(), rule)?;
    for c in &clustering.composites {
        println!("{} <- {:?}", c.id, c.members);
    }
    for w in &clustering.warnings {
        println!("warning: {w}");
    }

    let quarter = ontology.segmentation_rule("quarter").ok_or("no quarter rule")?;
    for seg in apply_segmentation(&corpus, quarter, &ontology, &index)? {
        let ids: Vec<&str> = seg.corpus.documents().iter().map(|d| d.id.as_str()).collect();
        println!("segment {}: {ids:?}", seg.label);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
