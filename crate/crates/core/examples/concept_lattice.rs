// Build a formal context from a corpus and compute its concept lattice.
//
// `cargo run --example concept_lattice`

use std::error::Error;

use chrono::Utc;
use concept_workbench::context::build_context;
use concept_workbench::corpus::{Corpus, InvertedIndex, Section};
use concept_workbench::fca::ConceptLattice;
use concept_workbench::Ontology;

fn fixture(name: &str) -> String {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let corpus = Corpus::from_xml(&fixture("survey_corpus.xml"), "survey_corpus.xml", Utc::now())?;
    let ontology = Ontology::from_xml(&fixture("survey_ontology.xml"))?;
    let index = InvertedIndex::build(&corpus, &Section::ALL.into_iter().collect());

    let ctx = build_context(corpus.documents(), &["KD", "IR", "SE", "ONT"], &ontology, &index)?;
    print!("{}", ctx.to_burmeister());
    assert_eq!(ctx.to_burmeister(), fixture("survey_expected.cxt"));

    let lattice = ConceptLattice::from_context(&ctx)?;
    println!("{} concepts, {} cover pairs, {} layers", lattice.len(), lattice.covering().len(), lattice.layer_count());
    for (i, c) in lattice.concepts().iter().enumerate() {
        let extent: Vec<&str> = c.extent.iter().map(|g| ctx.objects()[g].id.as_str()).collect();
        let intent: Vec<&str> = c.intent.iter().map(|m| ctx.attributes()[m].as_str()).collect();
        println!("c{i:<2} layer {} {extent:?} x {intent:?}", lattice.layer(i));
    }

    // Derivation operators are exposed on the context.
    println!("KD' = {:?}", ctx.derive_extent(&["KD"])?);
    println!("{{P6}}' = {:?}", ctx.derive_intent(&["P6"])?);

    let dot = lattice.to_dot();
    println!("{} bytes of dot", dot.len());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
