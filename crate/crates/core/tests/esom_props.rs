mod common;

use std::collections::BTreeSet;

use chrono::Utc;
use common::*;
use concept_workbench::context::build_context;
use concept_workbench::corpus::{Corpus, InvertedIndex, Section};
use concept_workbench::esom::*;
use concept_workbench::Ontology;
use proptest::prelude::*;

fn two_clusters() -> Vec<FeatureVector> {
    serde_json::from_str(&fixture("two_clusters.json")).unwrap()
}

fn context_vectors(corpus: &str, ontology: &str) -> Vec<FeatureVector> {
    let corpus = Corpus::from_xml(&fixture(corpus), "fixture", Utc::now()).unwrap();
    let ontology = Ontology::from_xml(&fixture(ontology)).unwrap();
    let index = InvertedIndex::build(&corpus, &Section::ALL.into_iter().collect());
    let ctx = build_context(corpus.documents(), &ontology.attribute_names(), &ontology, &index).unwrap();
    vectors_from_context(&ctx)
}

fn trained(vectors: &[FeatureVector], rows: usize, cols: usize, seed: u64) -> (EsomGrid, Vec<f64>) {
    let bounds = data_bounds(vectors).unwrap();
    let grid = init_grid_within(rows, cols, Topology::Toroid, &bounds, seed).unwrap();
    train_with_trace(&grid, vectors, &TrainingSchedule::for_grid(rows, cols, DEFAULT_EPOCHS)).unwrap()
}

#[test]
fn training_lowers_quantization_error_on_every_fixture() {
    let sets = [
        ("two clusters", two_clusters()),
        ("survey", context_vectors("survey_corpus.xml", "survey_ontology.xml")),
        ("police", context_vectors("police_reports.xml", "police_ontology.xml")),
    ];
    for (name, vectors) in &sets {
        for seed in 0..5 {
            let (_, trace) = trained(vectors, DEFAULT_ROWS, DEFAULT_COLS, seed);
            let (before, after) = (trace[0], trace[trace.len() - 1]);
            assert!(after <= before, "{name} seed {seed}: {before} -> {after}");
        }
    }
}

#[test]
fn clusters_land_in_disjoint_regions() {
    let vectors = two_clusters();
    let (grid, _) = trained(&vectors, DEFAULT_ROWS, DEFAULT_COLS, 1);
    let region = |p: char| -> BTreeSet<(usize, usize)> {
        vectors
            .iter()
            .filter(|v| v.object_id.starts_with(p))
            .map(|v| best_matching_unit(&grid, &v.values).unwrap())
            .collect()
    };
    assert!(region('a').is_disjoint(&region('b')));
}

#[test]
fn seeded_training_is_bit_exact() {
    let vectors = two_clusters();
    let (a, ta) = trained(&vectors, 10, 12, 9);
    let (b, tb) = trained(&vectors, 10, 12, 9);
    let bits = |g: &EsomGrid| g.weights().iter().map(|w| w.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(ta, tb);
    let (c, _) = trained(&vectors, 10, 12, 10);
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn training_leaves_the_input_grid_alone() {
    let vectors = two_clusters();
    let grid = init_grid(6, 6, Topology::Planar, 2, 4).unwrap();
    let copy = grid.clone();
    let out = train(&grid, &vectors, &TrainingSchedule::for_grid(6, 6, 3)).unwrap();
    assert_eq!(grid, copy);
    assert!(out.trained && !grid.trained);
    let zero = train(&grid, &vectors, &TrainingSchedule::for_grid(6, 6, 0)).unwrap();
    assert_eq!(zero.weights(), grid.weights());
}

#[test]
fn single_vector_becomes_a_fixpoint() {
    let v = vec![FeatureVector::new("x", vec![0.3, 0.9, 0.1])];
    let grid = init_grid(5, 5, Topology::Toroid, 3, 2).unwrap();
    let out = train(&grid, &v, &TrainingSchedule::for_grid(5, 5, 400)).unwrap();
    let (r, c) = best_matching_unit(&out, &v[0].values).unwrap();
    for (w, x) in out.weight(r, c).iter().zip(&v[0].values) {
        assert!((w - x).abs() < 1e-3);
    }
}

#[test]
fn own_weight_is_its_own_best_match() {
    for topology in [Topology::Toroid, Topology::Planar] {
        let grid = init_grid(7, 9, topology, 4, 3).unwrap();
        for r in 0..7 {
            for c in 0..9 {
                assert_eq!(best_matching_unit(&grid, grid.weight(r, c)).unwrap(), (r, c));
            }
        }
    }
}

#[test]
fn ties_resolve_row_major() {
    let mut grid = init_grid(2, 2, Topology::Planar, 1, 0).unwrap();
    grid.set_weight(0, 0, &[10.0]).unwrap();
    grid.set_weight(0, 1, &[1.0]).unwrap();
    grid.set_weight(1, 0, &[-1.0]).unwrap();
    grid.set_weight(1, 1, &[10.0]).unwrap();
    assert_eq!(best_matching_unit(&grid, &[0.0]).unwrap(), (0, 1));
}

#[test]
fn equal_weights_give_a_flat_umatrix() {
    for topology in [Topology::Toroid, Topology::Planar] {
        let mut grid = init_grid(4, 6, topology, 3, 1).unwrap();
        for r in 0..4 {
            for c in 0..6 {
                grid.set_weight(r, c, &[0.2, 0.4, 0.6]).unwrap();
            }
        }
        assert!(compute_umatrix(&grid).iter().flatten().all(|&h| h == 0.0));
    }
}

#[test]
fn umatrix_of_a_pair() {
    let mut grid = init_grid(1, 2, Topology::Planar, 2, 0).unwrap();
    grid.set_weight(0, 0, &[0.0, 0.0]).unwrap();
    grid.set_weight(0, 1, &[3.0, 4.0]).unwrap();
    assert_eq!(compute_umatrix(&grid), vec![vec![5.0, 5.0]]);
}

#[test]
fn mismatched_or_bad_vectors_are_rejected() {
    let grid = init_grid(3, 3, Topology::Toroid, 2, 0).unwrap();
    let sched = TrainingSchedule::for_grid(3, 3, 1);
    assert!(train(&grid, &[FeatureVector::new("x", vec![1.0])], &sched).is_err());
    assert!(train(&grid, &[FeatureVector::new("x", vec![f64::NAN, 0.0])], &sched).is_err());
    assert!(train(&grid, &[], &sched).is_err());
    assert!(init_grid(0, 3, Topology::Toroid, 2, 0).is_err());
}

#[test]
fn projection_and_export_carry_urls() {
    let vectors = two_clusters();
    let (grid, _) = trained(&vectors, 8, 8, 2);
    let labels: Vec<MapLabel> = vectors
        .iter()
        .map(|v| MapLabel {
            label: v.object_id.clone(),
            url: format!("https://example.org/{}", v.object_id),
        })
        .collect();
    let positions = project(&grid, &vectors, &labels).unwrap();
    assert_eq!(positions.len(), vectors.len());
    let json: serde_json::Value = serde_json::from_str(&export_map(&grid, &positions)).unwrap();
    assert_eq!(json["rows"], 8);
    assert_eq!(json["umatrix"].as_array().unwrap().len(), 8);
    assert_eq!(json["labels"][0]["url"], "https://example.org/a00");
    assert!(project(&grid, &vectors, &labels[..3]).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let (grid, _) = trained(&two_clusters(), 5, 6, 3);
    let back = EsomGrid::from_checkpoint(&grid.to_checkpoint()).unwrap();
    assert_eq!(back, grid);
}

#[test]
fn paper_scale_grid_trains_one_epoch() {
    let vectors: Vec<FeatureVector> = (0..100)
        .map(|i| FeatureVector::new(format!("v{i}"), (0..8).map(|d| ((i * 7 + d * 3) % 11) as f64 / 10.0).collect()))
        .collect();
    let grid = init_grid(EMERGENT_ROWS, EMERGENT_COLS, Topology::Toroid, 8, 0).unwrap();
    assert!(grid.units() >= 4000);
    let out = train(&grid, &vectors, &TrainingSchedule::for_grid(EMERGENT_ROWS, EMERGENT_COLS, 1)).unwrap();
    assert_eq!(out.units(), grid.units());
}

proptest! {
    #[test]
    fn prop_toroidal_distance_is_symmetric_and_bounded(
        rows in 1usize..12, cols in 1usize..12,
        a in (0usize..12, 0usize..12), b in (0usize..12, 0usize..12),
    ) {
        let grid = init_grid(rows, cols, Topology::Toroid, 1, 0).unwrap();
        let a = (a.0 % rows, a.1 % cols);
        let b = (b.0 % rows, b.1 % cols);
        prop_assert_eq!(grid.grid_distance_sq(a, b), grid.grid_distance_sq(b, a));
        let max = ((rows / 2).pow(2) + (cols / 2).pow(2)) as f64;
        prop_assert!(grid.grid_distance_sq(a, b) <= max);
    }

    #[test]
    fn prop_umatrix_is_non_negative(seed in 0u64..1000) {
        let grid = init_grid(4, 5, Topology::Toroid, 3, seed).unwrap();
        prop_assert!(compute_umatrix(&grid).iter().flatten().all(|&h| h >= 0.0));
    }
}
