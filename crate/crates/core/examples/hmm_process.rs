// Discover a care process from timestamped hospital activities.
//
// `cargo run --example hmm_process`

use std::collections::BTreeMap;
use std::error::Error;

use chrono::Utc;
use concept_workbench::corpus::Corpus;
use concept_workbench::hmm::{
    baum_welch, export_hmm_graph, fit_process_model, forward_likelihood, sequences_from_corpus, viterbi,
    BaumWelchOptions, HmmInit, SymbolMap, UnmappedPolicy,
};
use concept_workbench::Ontology;

fn fixture(name: &str) -> String {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

#[derive(serde::Deserialize)]
struct Groups {
    groups: Vec<String>,
    codes: BTreeMap<String, String>,
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let corpus = Corpus::from_xml(&fixture("clinical_activities.xml"), "clinical_activities.xml", Utc::now())?;
    let ontology = Ontology::from_xml(&fixture("clinical_ontology.xml"))?;
    let groups: Groups = serde_json::from_str(&fixture("activity_groups.json"))?;

    // Hundreds of activity codes are merged into a dozen groups.
    let map = SymbolMap::field("activity")
        .with_groups(groups.codes)
        .with_symbols(groups.groups);
    let rule = ontology.object_cluster_rule("per_patient").ok_or("no per_patient rule")?;
    let seqs = sequences_from_corpus(corpus.documents(), rule, &map, UnmappedPolicy::Error, None)?;
    let lists = seqs.symbol_lists();
    let m = seqs.symbol_names.len();
    println!("{} patients, {} symbols", lists.len(), m);

    let process = fit_process_model(&lists, m, 0.0)?.with_symbol_names(seqs.symbol_names.clone())?;
    let graph = export_hmm_graph(&process, 0.05)?;
    print!("{}", graph.to_dot());

    let first = &lists[0];
    let (path, logp) = viterbi(&process, first)?;
    println!("{}: viterbi log p = {logp:.3}, path {:?}", seqs.sequences[0].entity, path);

    // A small hidden model trained with Baum-Welch.
    let (model, trace) = baum_welch(&lists, 3, m, HmmInit::SeededRandom(1), BaumWelchOptions::default())?;
    println!(
        "baum-welch: {} iterations, log-likelihood {:.2} -> {:.2}",
        trace.len(),
        trace[0],
        trace[trace.len() - 1]
    );
    let total: f64 = lists.iter().map(|s| forward_likelihood(&model, s)).sum::<Result<f64, _>>()?;
    println!("forward log-likelihood of all patients: {total:.2}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
