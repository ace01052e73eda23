// Load a corpus, index it and run phrase queries.
//
// `cargo run --example ingest_and_search`

use std::error::Error;

use chrono::Utc;
use concept_workbench::corpus::{Corpus, InvertedIndex, Section};

fn fixture(name: &str) -> String {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let corpus = Corpus::from_xml(&fixture("survey_corpus.xml"), "survey_corpus.xml", Utc::now())?;
    println!("{} documents in {}", corpus.len(), corpus.language().name());

    let all: std::collections::BTreeSet<Section> = Section::ALL.into_iter().collect();
    let index = InvertedIndex::build(&corpus, &all);
    println!("{} distinct terms ({})", index.term_count(), index.analyzer_id());

    // Phrase matching works on stemmed, stop-word-free tokens.
    for phrase in ["data mining", "attribute exploration", "data exploration", "Mining the data"] {
        let tokens = index.analyze_phrase(phrase)?;
        let hits = index.match_phrase(phrase)?;
        println!("{phrase:>24} -> {tokens:?} in {hits:?}");
    }
    assert!(index.match_phrase("data mining")?.contains("P1"));
    assert!(!index.match_phrase("data exploration")?.contains("P2"));

    // Restricting the index to titles changes what is visible.
    let titles = InvertedIndex::build(&corpus, &Section::parse_list("title")?);
    println!("titles only: {} terms", titles.term_count());

    // Indexes serialize and reload.
    let reloaded = InvertedIndex::from_json(&index.to_json())?;
    assert_eq!(reloaded.match_phrase("data mining")?, index.match_phrase("data mining")?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
