//! Brute-force oracles and random generators shared by the integration
//! tests and the acceptance runner. Nothing here calls into the algorithms
//! under test.
#![allow(dead_code)]

use std::collections::BTreeSet;

use concept_workbench::hmm::HmmModel;
use concept_workbench::FormalContext;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> String {
    let path = fixture_path(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub type Incidence = Vec<Vec<bool>>;

pub fn random_incidence(rng: &mut ChaCha8Rng, g: usize, m: usize, density: f64) -> Incidence {
    (0..g).map(|_| (0..m).map(|_| rng.random_bool(density)).collect()).collect()
}

pub fn context_of(inc: &Incidence, m: usize) -> FormalContext {
    FormalContext::from_bools((0..inc.len()).map(|i| format!("g{i}")), (0..m).map(|j| format!("m{j}")), inc).unwrap()
}

/// Attributes shared by every object in `objs`.
pub fn up(inc: &Incidence, m: usize, objs: &BTreeSet<usize>) -> BTreeSet<usize> {
    (0..m).filter(|&j| objs.iter().all(|&i| inc[i][j])).collect()
}

/// Objects having every attribute in `attrs`.
pub fn down(inc: &Incidence, attrs: &BTreeSet<usize>) -> BTreeSet<usize> {
    (0..inc.len()).filter(|&i| attrs.iter().all(|&j| inc[i][j])).collect()
}

pub fn subset_of(mask: usize, n: usize) -> BTreeSet<usize> {
    (0..n).filter(|i| mask >> i & 1 == 1).collect()
}

pub type Concept = (BTreeSet<usize>, BTreeSet<usize>);

/// Every formal concept, found by closing each object subset.
pub fn brute_force_concepts(inc: &Incidence, m: usize) -> BTreeSet<Concept> {
    let g = inc.len();
    (0..1usize << g)
        .map(|mask| {
            let intent = up(inc, m, &subset_of(mask, g));
            (down(inc, &intent), intent)
        })
        .collect()
}

/// Covering pairs `(lower, upper)` by extent inclusion with nothing between.
pub fn brute_force_covers(concepts: &[Concept]) -> BTreeSet<(usize, usize)> {
    let lt = |a: &Concept, b: &Concept| a.0.is_subset(&b.0) && a.0 != b.0;
    let mut out = BTreeSet::new();
    for (i, a) in concepts.iter().enumerate() {
        for (j, b) in concepts.iter().enumerate() {
            if lt(a, b) && !concepts.iter().any(|c| lt(a, c) && lt(c, b)) {
                out.insert((i, j));
            }
        }
    }
    out
}

/// Random stochastic row; with `zeros` some entries are forced to zero
/// while keeping at least one positive entry.
pub fn random_row(rng: &mut ChaCha8Rng, len: usize, zeros: bool) -> Vec<f64> {
    let mut raw: Vec<f64> = (0..len)
        .map(|_| if zeros && rng.random_bool(0.25) { 0.0 } else { rng.random::<f64>() + 1e-3 })
        .collect();
    if raw.iter().all(|&x| x == 0.0) {
        raw[rng.random_range(0..len)] = 1.0;
    }
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

pub fn random_model(rng: &mut ChaCha8Rng, n: usize, m: usize, zeros: bool) -> HmmModel {
    let a = (0..n).map(|_| random_row(rng, n, zeros)).collect();
    let b = (0..n).map(|_| random_row(rng, m, zeros)).collect();
    let t = random_row(rng, n, zeros);
    HmmModel::new(a, b, t).unwrap()
}

fn draw(rng: &mut ChaCha8Rng, row: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap()
}

/// Samples an observation sequence of length `len` from the model.
pub fn sample(rng: &mut ChaCha8Rng, model: &HmmModel, len: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(len);
    let mut s = draw(rng, &model.t);
    for i in 0..len {
        if i > 0 {
            s = draw(rng, &model.a[s]);
        }
        out.push(draw(rng, &model.b[s]));
    }
    out
}

/// Joint probability of a state path and the observations, in plain space.
pub fn path_probability(model: &HmmModel, path: &[usize], obs: &[usize]) -> f64 {
    let mut p = model.t[path[0]] * model.b[path[0]][obs[0]];
    for k in 1..obs.len() {
        p *= model.a[path[k - 1]][path[k]] * model.b[path[k]][obs[k]];
    }
    p
}

/// `(ln P(obs), ln max_path P(path, obs))` by enumerating all N^T paths.
pub fn brute_force_hmm(model: &HmmModel, obs: &[usize]) -> (f64, f64) {
    if obs.is_empty() {
        return (0.0, 0.0);
    }
    let n = model.n;
    let t = obs.len();
    let mut total = 0.0;
    let mut best = 0.0f64;
    let mut path = vec![0usize; t];
    for code in 0..n.pow(t as u32) {
        let mut c = code;
        for slot in path.iter_mut() {
            *slot = c % n;
            c /= n;
        }
        let p = path_probability(model, &path, obs);
        total += p;
        best = best.max(p);
    }
    (total.ln(), best.ln())
}

/// Absolute difference of two log values, treating two -inf as equal.
pub fn log_gap(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        0.0
    } else {
        (a - b).abs()
    }
}

/// Life tracks for every entity of a fixture at one granularity, checked
/// against the time-system laws. Returns the number of granules seen and
/// the number of ties that had to be broken.
pub fn tca_laws(
    corpus_file: &str,
    ontology_file: &str,
    rule: &str,
    granularity: concept_workbench::Granularity,
) -> Result<(usize, usize), String> {
    use concept_workbench::context::build_context;
    use concept_workbench::corpus::{Corpus, InvertedIndex, Section};
    use concept_workbench::fca::ConceptLattice;
    use concept_workbench::tca::{build_time_system, compute_life_tracks};
    use concept_workbench::Ontology;

    let corpus = Corpus::from_xml(&fixture(corpus_file), corpus_file, chrono::Utc::now()).map_err(|e| e.to_string())?;
    let ontology = Ontology::from_xml(&fixture(ontology_file)).map_err(|e| e.to_string())?;
    let index = InvertedIndex::build(&corpus, &Section::ALL.into_iter().collect());
    let ctx = build_context(corpus.documents(), &ontology.attribute_names(), &ontology, &index).map_err(|e| e.to_string())?;
    let lattice = ConceptLattice::from_context(&ctx).map_err(|e| e.to_string())?;
    let rule = ontology.object_cluster_rule(rule).ok_or("missing rule")?;
    let systems = build_time_system(corpus.documents(), rule, granularity).map_err(|e| e.to_string())?;
    let tracks = compute_life_tracks(&systems.systems, &lattice, &ctx).map_err(|e| e.to_string())?;
    let (mut granules, mut ties) = (0, 0);
    for (sys, track) in systems.systems.iter().zip(&tracks) {
        let n = sys.granules.len();
        granules += n;
        if track.transitions.len() + 1 != n || track.concepts.len() != n {
            return Err(format!("{}: {} granules, {} transitions", sys.entity, n, track.transitions.len()));
        }
        for w in sys.granules.windows(2) {
            if w[0].order_key() >= w[1].order_key() {
                return Err(format!("{}: {} not before {}", sys.entity, w[0].object_id, w[1].object_id));
            }
            if w[0].instant == w[1].instant {
                ties += 1;
                if w[0].object_id >= w[1].object_id {
                    return Err(format!("{}: tie not ordered by id", sys.entity));
                }
            }
        }
        for (t, g) in track.transitions.iter().zip(sys.granules.windows(2)) {
            if t.from_granule != g[0] || t.to_granule != g[1] {
                return Err(format!("{}: transition does not follow the time relation", sys.entity));
            }
        }
        for g in &sys.granules {
            if granularity.truncate(&g.timestamp) != g.instant {
                return Err(format!("{}: granule instant is not truncated", g.object_id));
            }
        }
    }
    Ok((granules, ties))
}

pub fn profile(json: serde_json::Value) -> concept_workbench::Profile {
    concept_workbench::Profile::from_json(&json.to_string()).unwrap()
}

/// Profiles covering every phase and artifact kind on one fixture.
pub fn full_loop(corpus: &str) -> Vec<concept_workbench::Profile> {
    use serde_json::json;
    let mut out = Vec::new();
    match corpus {
        "survey" => {
            out.push(profile(json!({"name": "start", "phase": "start_investigation",
                "parameters": {"attributes": ["KD", "IR", "SE", "ONT"]}})));
            out.push(profile(json!({"name": "kd", "phase": "start_investigation",
                "parameters": {"output": "kd-context", "segmentation": {"rule": "kd_papers", "segment": "match"}}})));
            out.push(profile(json!({"name": "fca", "phase": "compose_artifact",
                "parameters": {"output": "lattice", "kind": "fca"}})));
            out.push(profile(json!({"name": "map", "phase": "compose_artifact",
                "parameters": {"output": "map", "kind": "esom", "rows": 6, "cols": 8, "epochs": 10, "seed": 1,
                               "features": "term_frequency"}})));
        }
        "police" => {
            out.push(profile(json!({"name": "start", "phase": "start_investigation", "parameters": {}})));
            out.push(profile(json!({"name": "suspects", "phase": "start_investigation",
                "parameters": {"output": "suspects", "object_cluster": "per_suspect"}})));
            out.push(profile(json!({"name": "fca", "phase": "compose_artifact",
                "parameters": {"output": "lattice", "kind": "fca"}})));
            out.push(profile(json!({"name": "suspect-lattice", "phase": "compose_artifact",
                "parameters": {"output": "suspect-lattice", "context": "suspects", "kind": "fca"}})));
            out.push(profile(json!({"name": "tca", "phase": "compose_artifact",
                "parameters": {"output": "tracks", "kind": "tca", "entity_rule": "per_suspect"}})));
            out.push(profile(json!({"name": "map", "phase": "compose_artifact",
                "parameters": {"output": "map", "kind": "esom", "rows": 6, "cols": 8, "epochs": 10, "seed": 2}})));
        }
        "clinical" => {
            let groups: serde_json::Value = serde_json::from_str(&fixture("activity_groups.json")).unwrap();
            let symbols = json!({"source": {"kind": "field", "value": "activity"},
                                 "groups": groups["codes"], "symbols": groups["groups"]});
            out.push(profile(json!({"name": "start", "phase": "start_investigation", "parameters": {}})));
            out.push(profile(json!({"name": "process", "phase": "compose_artifact",
                "parameters": {"output": "process", "kind": "hmm", "entity_rule": "per_patient",
                               "symbols": symbols, "mode": {"process": {"smoothing": 0.0}}, "threshold": 0.05}})));
            out.push(profile(json!({"name": "hidden", "phase": "compose_artifact",
                "parameters": {"output": "hidden", "kind": "hmm", "entity_rule": "per_patient",
                               "symbols": symbols, "mode": {"baum_welch": {"states": 3, "seed": 4, "max_iter": 30}}}})));
        }
        other => panic!("no loop for {other}"),
    }
    let composed: Vec<String> = out
        .iter()
        .filter(|p| p.phase() == concept_workbench::service::Phase::ComposeArtifact)
        .map(|p| p.output_name())
        .collect();
    out.push(profile(json!({"name": "analyse", "phase": "analyze_artifact",
        "parameters": {"output": "report", "artifacts": composed}})));
    out.push(profile(json!({"name": "deploy", "phase": "deploy_knowledge",
        "parameters": {"output": "bundle", "artifacts": ["report"], "annotations": {"report": "checked"}}})));
    out
}

pub fn fixture_files(corpus: &str) -> (&'static str, &'static str) {
    match corpus {
        "survey" => ("survey_corpus.xml", "survey_ontology.xml"),
        "police" => ("police_reports.xml", "police_ontology.xml"),
        "clinical" => ("clinical_activities.xml", "clinical_ontology.xml"),
        other => panic!("no fixture {other}"),
    }
}

/// A session over a fixture with the full loop already run.
pub fn run_loop(corpus: &str) -> concept_workbench::Session {
    let (c, o) = fixture_files(corpus);
    let ingested = chrono::DateTime::parse_from_rfc3339("2010-01-01T00:00:00Z").unwrap().into();
    let mut s = concept_workbench::Session::create(corpus, &fixture(c), &fixture(o), c, ingested).unwrap();
    for p in full_loop(corpus) {
        s.run_phase(&p).unwrap_or_else(|e| panic!("{corpus}/{}: {e}", p.name));
    }
    s
}

/// Every context with at most 5 objects, 5 attributes and 12 cells, plus
/// seeded random ones filling up to 5x5.
pub fn galois_contexts() -> Vec<(Incidence, usize)> {
    use rand::SeedableRng;
    let mut out = Vec::new();
    for g in 0..=5usize {
        for m in 0..=5usize {
            if g * m > 12 {
                continue;
            }
            for code in 0..1u32 << (g * m) {
                let inc = (0..g).map(|i| (0..m).map(|j| code >> (i * m + j) & 1 == 1).collect()).collect();
                out.push((inc, m));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..2000 {
        let g = rng.random_range(0..=5);
        let m = rng.random_range(0..=5);
        let density = rng.random_range(0.1..0.9);
        out.push((random_incidence(&mut rng, g, m, density), m));
    }
    out
}
