mod common;

use std::collections::BTreeMap;

use chrono::Utc;
use common::*;
use concept_workbench::corpus::Corpus;
use concept_workbench::hmm::{
    export_hmm_graph, fit_process_model, sequences_from_corpus, SymbolMap, UnmappedPolicy,
};
use concept_workbench::Ontology;

#[test]
fn two_identical_traces_give_a_chain() {
    let seqs = vec![vec![0, 1, 2], vec![0, 1, 2]];
    let model = fit_process_model(&seqs, 3, 0.0).unwrap();
    assert_eq!(model.n, 3);
    assert_eq!(model.a[0][1], 1.0);
    assert_eq!(model.a[1][2], 1.0);
    assert_eq!(model.t, vec![1.0, 0.0, 0.0]);
    for i in 0..3 {
        for k in 0..3 {
            assert_eq!(model.b[i][k], if i == k { 1.0 } else { 0.0 });
        }
    }
    assert_eq!(model.uniform_rows, vec![2]);

    let graph = export_hmm_graph(&model, 0.0).unwrap();
    assert_eq!(graph.nodes.len(), 3);
    assert_eq!(graph.edges.len(), 2);
    let dot = graph.to_dot();
    assert!(dot.contains("s0 -> s1") && dot.contains("s1 -> s2"));
    assert_eq!(dot.matches("->").count(), 2);
}

#[test]
fn threshold_filters_edges() {
    let seqs = vec![vec![0, 1], vec![0, 1], vec![0, 1], vec![0, 0]];
    let model = fit_process_model(&seqs, 2, 0.0).unwrap();
    assert!((model.a[0][1] - 0.75).abs() < 1e-12);
    assert_eq!(export_hmm_graph(&model, 0.0).unwrap().edges.len(), 2);
    assert_eq!(export_hmm_graph(&model, 0.5).unwrap().edges.len(), 1);
}

const WARD: &str = r#"<corpus language="en">
  <document id="e3" url="https://ward.example.org/e3" timestamp="2009-03-01T12:00:00Z"><field name="patient">X</field><field name="activity">surgery</field></document>
  <document id="e1" url="https://ward.example.org/e1" timestamp="2009-03-01T08:00:00Z"><field name="patient">X</field><field name="activity">admit</field></document>
  <document id="e2" url="https://ward.example.org/e2" timestamp="2009-03-01T10:00:00Z"><field name="patient">X</field><field name="activity">prep</field></document>
</corpus>"#;

#[test]
fn events_are_ordered_in_time_and_mapped_to_symbols() {
    let corpus = Corpus::from_xml(WARD, "ward", Utc::now()).unwrap();
    let ontology = Ontology::from_xml(
        r#"<ontology><objectCluster name="per_patient" key="field:patient" missing="error"/></ontology>"#,
    )
    .unwrap();
    let rule = ontology.object_cluster_rule("per_patient").unwrap();
    let map = SymbolMap::field("activity").with_symbols(vec!["admit".into(), "prep".into(), "surgery".into()]);
    let seqs = sequences_from_corpus(corpus.documents(), rule, &map, UnmappedPolicy::Error, None).unwrap();
    assert_eq!(seqs.symbol_lists(), vec![vec![0, 1, 2]]);
    assert_eq!(seqs.sequences[0].documents, vec!["e1", "e2", "e3"]);
}

#[derive(serde::Deserialize)]
struct Groups {
    groups: Vec<String>,
    codes: BTreeMap<String, String>,
}

#[test]
fn clinical_fixture_collapses_to_twelve_groups() {
    let corpus = Corpus::from_xml(&fixture("clinical_activities.xml"), "clinical", Utc::now()).unwrap();
    let ontology = Ontology::from_xml(&fixture("clinical_ontology.xml")).unwrap();
    let groups: Groups = serde_json::from_str(&fixture("activity_groups.json")).unwrap();
    assert_eq!(groups.groups.len(), 12);
    assert!(groups.codes.len() > 400);
    let rule = ontology.object_cluster_rule("per_patient").unwrap();
    let map = SymbolMap::field("activity")
        .with_groups(groups.codes)
        .with_symbols(groups.groups.clone());
    let seqs = sequences_from_corpus(corpus.documents(), rule, &map, UnmappedPolicy::Error, None).unwrap();
    assert_eq!(seqs.sequences.len(), 20);
    assert_eq!(seqs.symbol_names, groups.groups);
    let lists = seqs.symbol_lists();
    assert!(lists.iter().flatten().all(|&s| s < 12));
    assert_eq!(lists.iter().map(Vec::len).sum::<usize>(), corpus.len());

    let model = fit_process_model(&lists, 12, 0.0).unwrap();
    model.validate().unwrap();
    // Every trace starts at admission and ends at discharge.
    assert_eq!(model.t[0], 1.0);
    assert!(lists.iter().all(|s| s[0] == 0 && *s.last().unwrap() == 11));
    assert_eq!(model.uniform_rows, vec![11]);
}

#[test]
fn unmapped_codes_error_or_skip() {
    let corpus = Corpus::from_xml(WARD, "ward", Utc::now()).unwrap();
    let ontology = Ontology::from_xml(
        r#"<ontology><objectCluster name="per_patient" key="field:patient" missing="error"/></ontology>"#,
    )
    .unwrap();
    let rule = ontology.object_cluster_rule("per_patient").unwrap();
    let map = SymbolMap::field("activity").with_symbols(vec!["admit".into(), "surgery".into()]);
    assert!(sequences_from_corpus(corpus.documents(), rule, &map, UnmappedPolicy::Error, None).is_err());
    let seqs = sequences_from_corpus(corpus.documents(), rule, &map, UnmappedPolicy::Skip, None).unwrap();
    assert_eq!(seqs.symbol_lists(), vec![vec![0, 1]]);
    assert!(!seqs.warnings.is_empty());
}
