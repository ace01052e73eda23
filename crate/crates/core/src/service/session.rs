use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::envelope::render_envelope;
use super::profile::{
    AnalyzeParams, ComposeKind, ComposeParams, DeployParams, FeatureKind, HmmMode, InvestigationParams, Phase,
    PhaseParams, Profile,
};
use super::ServiceError;
use crate::context::{build_context, AttributeClustering, FormalContext};
use crate::corpus::{document_xml, Corpus, Document, InvertedIndex, Section};
use crate::esom::{self, MapLabel, TrainingSchedule};
use crate::fca::{build_lattice, compute_concepts_bounded, ConceptLattice, DEFAULT_CONCEPT_LIMIT};
use crate::hmm::{self, BaumWelchOptions, HmmInit};
use crate::ontology::{apply_object_cluster, apply_segmentation, CompositeObject, Ontology};
use crate::tca;
use crate::time::format_timestamp;
use crate::xml::{escape_attr, escape_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Context,
    Lattice,
    Tracks,
    Map,
    Hmm,
    Report,
    Bundle,
}

impl ArtifactKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::Context => "context",
            ArtifactKind::Lattice => "lattice",
            ArtifactKind::Tracks => "tracks",
            ArtifactKind::Map => "map",
            ArtifactKind::Hmm => "hmm",
            ArtifactKind::Report => "report",
            ArtifactKind::Bundle => "bundle",
        }
    }
}


/// An immutable phase output. `payload` is the module-native JSON;
/// `renderings` holds the other formats (dot, cxt, checkpoint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub kind: ArtifactKind,
    pub phase: Phase,
    pub profile: String,
    pub profile_hash: String,
    pub inputs: Vec<String>,
    pub payload: String,
    pub renderings: BTreeMap<String, String>,
    pub digest: String,
}

impl Artifact {
    /// Digest over the payload and every rendering.
    fn compute_digest(payload: &str, renderings: &BTreeMap<String, String>) -> String {
        let mut h = Sha256::new();
        h.update(payload.as_bytes());
        for (k, v) in renderings {
            h.update([0u8]);
            h.update(k.as_bytes());
            h.update([0u8]);
            h.update(v.as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn formats(&self) -> Vec<String> {
        let mut f = vec!["json".to_string(), "xml".to_string()];
        f.extend(self.renderings.keys().cloned());
        f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: usize,
    pub phase: Phase,
    pub profile: Profile,
    pub profile_hash: String,
    pub output: String,
    pub inputs: Vec<String>,
    pub digest: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseOutcome {
    pub artifact: String,
    pub kind: ArtifactKind,
    pub profile_hash: String,
    pub digest: String,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub language: String,
    pub documents: usize,
    pub index_terms: usize,
    pub artifacts: Vec<ArtifactInfo>,
    pub profiles: Vec<String>,
    pub audit_entries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactInfo {
    pub name: String,
    pub kind: ArtifactKind,
    pub phase: Phase,
    pub profile_hash: String,
    pub formats: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub seq: usize,
    pub artifact: String,
    pub expected: String,
    pub actual: Option<String>,
    pub identical: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub index_identical: bool,
    pub entries: Vec<ReplayEntry>,
}

impl ReplayReport {
    pub fn all_identical(&self) -> bool {
        self.index_identical && self.entries.iter().all(|e| e.identical)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkFailure {
    pub artifact: String,
    pub url: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSweep {
    pub checked: usize,
    pub failures: Vec<LinkFailure>,
}

/// Serialized form of a session.
#[derive(Serialize, Deserialize)]
struct SessionRecord {
    id: String,
    created_at: DateTime<Utc>,
    source: String,
    ingested_at: DateTime<Utc>,
    corpus_xml: String,
    ontology_xml: String,
    composites: BTreeMap<String, CompositeObject>,
    artifacts: IndexMap<String, Artifact>,
    audit: Vec<AuditEntry>,
    profiles: BTreeMap<String, Profile>,
}

/// One investigation: corpus, ontology, index and everything derived.
#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    created_at: DateTime<Utc>,
    corpus_xml: String,
    ontology_xml: String,
    corpus: Corpus,
    ontology: Ontology,
    index: InvertedIndex,
    composites: BTreeMap<String, CompositeObject>,
    artifacts: IndexMap<String, Artifact>,
    audit: Vec<AuditEntry>,
    profiles: BTreeMap<String, Profile>,
}

fn all_sections() -> BTreeSet<Section> {
    Section::ALL.into_iter().collect()
}

impl Session {
    /// Parses both inputs and builds the index over all sections.
    pub fn create(
        id: impl Into<String>,
        corpus_xml: &str,
        ontology_xml: &str,
        source: &str,
        ingested_at: DateTime<Utc>,
    ) -> Result<Self, ServiceError> {
        let corpus = Corpus::from_xml(corpus_xml, source, ingested_at)?;
        let ontology = Ontology::from_xml(ontology_xml)?;
        let index = InvertedIndex::build(&corpus, &all_sections());
        Ok(Session {
            id: id.into(),
            created_at: Utc::now(),
            corpus_xml: corpus_xml.to_string(),
            ontology_xml: ontology_xml.to_string(),
            corpus,
            ontology,
            index,
            composites: BTreeMap::new(),
            artifacts: IndexMap::new(),
            audit: Vec::new(),
            profiles: BTreeMap::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn artifacts(&self) -> impl Iterator<Item = &Artifact> {
        self.artifacts.values()
    }

    pub fn artifact(&self, name: &str) -> Result<&Artifact, ServiceError> {
        self.artifacts
            .get(name)
            .ok_or_else(|| ServiceError::NotFound(format!("unknown artifact {name:?}")))
    }

    pub fn audit(&self) -> &[AuditEntry] {
        &self.audit
    }

    pub fn composites(&self) -> &BTreeMap<String, CompositeObject> {
        &self.composites
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            id: self.id.clone(),
            created_at: self.created_at,
            language: self.corpus.language().code().to_string(),
            documents: self.corpus.len(),
            index_terms: self.index.term_count(),
            artifacts: self
                .artifacts
                .values()
                .map(|a| ArtifactInfo {
                    name: a.name.clone(),
                    kind: a.kind,
                    phase: a.phase,
                    profile_hash: a.profile_hash.clone(),
                    formats: a.formats(),
                })
                .collect(),
            profiles: self.profiles.keys().cloned().collect(),
            audit_entries: self.audit.len(),
        }
    }

    pub fn to_json(&self) -> String {
        let p = self.corpus.provenance();
        serde_json::to_string(&SessionRecord {
            id: self.id.clone(),
            created_at: self.created_at,
            source: p.source.clone(),
            ingested_at: p.ingested_at,
            corpus_xml: self.corpus_xml.clone(),
            ontology_xml: self.ontology_xml.clone(),
            composites: self.composites.clone(),
            artifacts: self.artifacts.clone(),
            audit: self.audit.clone(),
            profiles: self.profiles.clone(),
        })
        .expect("session serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ServiceError> {
        let r: SessionRecord =
            serde_json::from_str(text).map_err(|e| ServiceError::Internal(format!("session record: {e}")))?;
        let mut s = Session::create(r.id, &r.corpus_xml, &r.ontology_xml, &r.source, r.ingested_at)?;
        s.created_at = r.created_at;
        s.composites = r.composites;
        s.artifacts = r.artifacts;
        s.audit = r.audit;
        s.profiles = r.profiles;
        Ok(s)
    }

    // Profiles

    pub fn profiles(&self) -> &BTreeMap<String, Profile> {
        &self.profiles
    }

    pub fn profile(&self, name: &str) -> Result<&Profile, ServiceError> {
        self.profiles
            .get(name)
            .ok_or_else(|| ServiceError::NotFound(format!("unknown profile {name:?}")))
    }

    pub fn put_profile(&mut self, profile: Profile) -> Result<(), ServiceError> {
        profile.validate()?;
        self.profiles.insert(profile.name.clone(), profile);
        Ok(())
    }

    pub fn delete_profile(&mut self, name: &str) -> Result<Profile, ServiceError> {
        self.profiles
            .remove(name)
            .ok_or_else(|| ServiceError::NotFound(format!("unknown profile {name:?}")))
    }

    pub fn run_stored(&mut self, name: &str) -> Result<PhaseOutcome, ServiceError> {
        let p = self.profile(name)?.clone();
        self.run_phase(&p)
    }

    // Phases

    /// Runs one phase. An existing artifact of the same name is replaced
    /// only when it came from a profile with the same hash.
    pub fn run_phase(&mut self, profile: &Profile) -> Result<PhaseOutcome, ServiceError> {
        profile.validate()?;
        let hash = profile.hash();
        let output = profile.output_name();
        if let Some(existing) = self.artifacts.get(&output) {
            if existing.profile_hash != hash {
                return Err(ServiceError::Conflict(format!(
                    "artifact {output:?} already exists from profile {:?}",
                    existing.profile
                )));
            }
        }
        let started_at = Utc::now();
        let built = match &profile.phase {
            PhaseParams::StartInvestigation(p) => self.start_investigation(p)?,
            PhaseParams::ComposeArtifact(p) => self.compose(p)?,
            PhaseParams::AnalyzeArtifact(p) => self.analyze(p)?,
            PhaseParams::DeployKnowledge(p) => self.deploy(p)?,
        };
        let digest = Artifact::compute_digest(&built.payload, &built.renderings);
        let artifact = Artifact {
            name: output.clone(),
            kind: built.kind,
            phase: profile.phase(),
            profile: profile.name.clone(),
            profile_hash: hash.clone(),
            inputs: built.inputs.clone(),
            payload: built.payload,
            renderings: built.renderings,
            digest: digest.clone(),
        };
        self.artifacts.insert(output.clone(), artifact);
        self.audit.push(AuditEntry {
            seq: self.audit.len(),
            phase: profile.phase(),
            profile: profile.clone(),
            profile_hash: hash.clone(),
            output: output.clone(),
            inputs: built.inputs,
            digest: digest.clone(),
            started_at,
            finished_at: Utc::now(),
            warnings: built.warnings.clone(),
        });
        Ok(PhaseOutcome {
            artifact: output,
            kind: built.kind,
            profile_hash: hash,
            digest,
            warnings: built.warnings,
        })
    }

    fn require(&self, name: &str, phase: Phase, needed_by: Phase) -> Result<&Artifact, ServiceError> {
        self.artifacts.get(name).ok_or_else(|| {
            ServiceError::Conflict(format!(
                "{} needs artifact {name:?}; run {} first",
                needed_by.as_str(),
                phase.as_str()
            ))
        })
    }

    /// Documents for context objects: corpus documents or composites.
    fn object_documents(&self, ctx: &FormalContext) -> Result<Vec<Document>, ServiceError> {
        ctx.objects()
            .iter()
            .map(|o| {
                if let Some(d) = self.corpus.get(&o.id) {
                    Ok(d.clone())
                } else if let Some(c) = self.composites.get(&o.id) {
                    Ok(c.to_document())
                } else {
                    Err(ServiceError::BadRequest(format!("context object {:?} is not in this session", o.id)))
                }
            })
            .collect()
    }

    /// The session index when every document is a corpus document, else a
    /// fresh index over the given documents.
    fn index_for(&self, docs: &[Document]) -> Option<InvertedIndex> {
        if docs.iter().all(|d| self.corpus.get(&d.id).is_some()) {
            None
        } else {
            Some(InvertedIndex::build_documents(docs, self.corpus.language(), &all_sections()))
        }
    }

    fn start_investigation(&mut self, p: &InvestigationParams) -> Result<Built, ServiceError> {
        let mut warnings = Vec::new();
        let mut corpus = match &p.documents {
            Some(ids) => {
                if let Some(missing) = ids.iter().find(|id| self.corpus.get(id).is_none()) {
                    return Err(ServiceError::BadRequest(format!("unknown document {missing:?}")));
                }
                self.corpus.subset(ids.iter().map(String::as_str))
            }
            None => self.corpus.clone(),
        };
        if let Some(choice) = &p.segmentation {
            let rule = self
                .ontology
                .segmentation_rule(&choice.rule)
                .ok_or_else(|| ServiceError::BadRequest(format!("unknown segmentation rule {:?}", choice.rule)))?;
            let segments = apply_segmentation(&corpus, rule, &self.ontology, &self.index)?;
            let labels: Vec<String> = segments.iter().map(|s| s.label.clone()).collect();
            corpus = segments
                .into_iter()
                .find(|s| s.label == choice.segment)
                .ok_or_else(|| {
                    ServiceError::BadRequest(format!(
                        "rule {:?} has no segment {:?} (segments: {})",
                        choice.rule,
                        choice.segment,
                        labels.join(", ")
                    ))
                })?
                .corpus;
        }
        let mut docs: Vec<Document> = corpus.documents().to_vec();
        if let Some(rule_name) = &p.object_cluster {
            let rule = self
                .ontology
                .object_cluster_rule(rule_name)
                .ok_or_else(|| ServiceError::BadRequest(format!("unknown object-cluster rule {rule_name:?}")))?;
            let clustering = apply_object_cluster(&docs, rule)?;
            warnings.extend(clustering.warnings);
            docs = clustering.composites.iter().map(CompositeObject::to_document).collect();
            for c in clustering.composites {
                self.composites.insert(c.id.clone(), c);
            }
        }
        let attributes: Vec<String> = if p.attributes.is_empty() {
            self.ontology.attribute_names()
        } else {
            p.attributes.clone()
        };
        let own_index = self.index_for(&docs);
        let index = own_index.as_ref().unwrap_or(&self.index);
        let mut ctx = build_context(&docs, &attributes, &self.ontology, index)?;
        if !p.attribute_clusters.is_empty() {
            let mut groups = p.attribute_clusters.clone();
            let grouped: HashSet<&String> = p.attribute_clusters.iter().flat_map(|g| &g.members).collect();
            for a in ctx.attributes() {
                if !grouped.contains(a) {
                    groups.push(crate::context::AttributeGroup {
                        name: a.clone(),
                        members: vec![a.clone()],
                    });
                }
            }
            ctx = ctx.cluster_attributes(&AttributeClustering { groups }, p.cluster_mode)?;
        }
        if p.clarify {
            ctx = ctx.clarified();
        }
        let mut renderings = BTreeMap::new();
        renderings.insert("cxt".to_string(), ctx.to_burmeister());
        Ok(Built {
            kind: ArtifactKind::Context,
            inputs: Vec::new(),
            payload: with_newline(ctx.to_json()),
            renderings,
            warnings,
        })
    }

    fn compose(&self, p: &ComposeParams) -> Result<Built, ServiceError> {
        let source = self.require(&p.context, Phase::StartInvestigation, Phase::ComposeArtifact)?;
        if source.kind != ArtifactKind::Context {
            return Err(ServiceError::BadRequest(format!(
                "artifact {:?} is a {}, not a context",
                p.context,
                source.kind.as_str()
            )));
        }
        let ctx = FormalContext::from_json(&source.payload)?;
        let inputs = vec![p.context.clone()];
        let mut renderings = BTreeMap::new();
        let mut warnings = Vec::new();
        let (kind, payload) = match &p.kind {
            ComposeKind::Fca { limit } => {
                let concepts = compute_concepts_bounded(&ctx, limit.unwrap_or(DEFAULT_CONCEPT_LIMIT))?;
                let lat = build_lattice(&ctx, concepts)?;
                renderings.insert("dot".into(), lat.to_dot());
                (ArtifactKind::Lattice, lat.to_json())
            }
            ComposeKind::Tca { entity_rule, granularity } => {
                let rule = self
                    .ontology
                    .object_cluster_rule(entity_rule)
                    .ok_or_else(|| ServiceError::BadRequest(format!("unknown entity rule {entity_rule:?}")))?;
                let docs = self.object_documents(&ctx)?;
                let systems = tca::build_time_system(&docs, rule, *granularity)?;
                warnings.extend(systems.warnings);
                let lat = ConceptLattice::from_context(&ctx)?;
                let tracks = tca::compute_life_tracks(&systems.systems, &lat, &ctx)?;
                renderings.insert("dot".into(), lat.to_dot());
                (ArtifactKind::Tracks, tca::export_tracks(&lat, &tracks)?)
            }
            ComposeKind::Esom {
                rows,
                cols,
                topology,
                epochs,
                seed,
                features,
                schedule,
            } => {
                let vectors = match features {
                    FeatureKind::ContextRows => esom::vectors_from_context(&ctx),
                    FeatureKind::TermFrequency => {
                        let docs = self.object_documents(&ctx)?;
                        let own = self.index_for(&docs);
                        let index = own.as_ref().unwrap_or(&self.index);
                        esom::vectors_from_term_frequencies(&docs, ctx.attributes(), &self.ontology, index)?
                    }
                };
                let bounds = esom::data_bounds(&vectors)
                    .ok_or_else(|| ServiceError::BadRequest("esom needs at least one object".into()))?;
                let grid = esom::init_grid_within(*rows, *cols, *topology, &bounds, *seed)?;
                let schedule = schedule
                    .clone()
                    .unwrap_or_else(|| TrainingSchedule::for_grid(*rows, *cols, *epochs));
                let trained = esom::train(&grid, &vectors, &schedule)?;
                let labels: Vec<MapLabel> = ctx
                    .objects()
                    .iter()
                    .map(|o| MapLabel {
                        label: o.label.clone(),
                        url: o.url.clone(),
                    })
                    .collect();
                let projections = esom::project(&trained, &vectors, &labels)?;
                renderings.insert("checkpoint".into(), trained.to_checkpoint());
                (ArtifactKind::Map, esom::export_map(&trained, &projections))
            }
            ComposeKind::Hmm {
                entity_rule,
                symbols,
                unmapped,
                mode,
                threshold,
            } => {
                let rule = self
                    .ontology
                    .object_cluster_rule(entity_rule)
                    .ok_or_else(|| ServiceError::BadRequest(format!("unknown entity rule {entity_rule:?}")))?;
                let docs = self.object_documents(&ctx)?;
                let own = self.index_for(&docs);
                let index = own.as_ref().unwrap_or(&self.index);
                let seqs = hmm::sequences_from_corpus(&docs, rule, symbols, *unmapped, Some((&self.ontology, index)))?;
                warnings.extend(seqs.warnings.iter().cloned());
                let m = seqs.symbol_names.len();
                if m == 0 {
                    return Err(ServiceError::BadRequest("no observation symbols found".into()));
                }
                let lists = seqs.symbol_lists();
                let model = match mode {
                    HmmMode::Process { smoothing } => hmm::fit_process_model(&lists, m, *smoothing)?,
                    HmmMode::BaumWelch {
                        states,
                        seed,
                        tol,
                        max_iter,
                    } => {
                        let defaults = BaumWelchOptions::default();
                        let opts = BaumWelchOptions {
                            tol: tol.unwrap_or(defaults.tol),
                            max_iter: max_iter.unwrap_or(defaults.max_iter),
                        };
                        hmm::baum_welch(&lists, *states, m, HmmInit::SeededRandom(*seed), opts)?.0
                    }
                };
                let model = model.with_symbol_names(seqs.symbol_names.clone())?;
                if !model.uniform_rows.is_empty() {
                    let names: Vec<&str> = model.uniform_rows.iter().map(|&i| model.symbol_names[i].as_str()).collect();
                    warnings.push(format!("never-exited states given uniform rows: {}", names.join(", ")));
                }
                let graph = hmm::export_hmm_graph(&model, *threshold)?;
                renderings.insert("dot".into(), graph.to_dot());
                renderings.insert("checkpoint".into(), model.to_checkpoint());
                renderings.insert(
                    "sequences".into(),
                    with_newline(serde_json::to_string_pretty(&seqs).expect("sequences serialize")),
                );
                (ArtifactKind::Hmm, graph.to_json())
            }
        };
        Ok(Built {
            kind,
            inputs,
            payload,
            renderings,
            warnings,
        })
    }

    fn analyze(&self, p: &AnalyzeParams) -> Result<Built, ServiceError> {
        let targets: Vec<&Artifact> = if p.artifacts.is_empty() {
            self.artifacts
                .values()
                .filter(|a| !matches!(a.kind, ArtifactKind::Report | ArtifactKind::Bundle))
                .filter(|a| a.name != p.output)
                .collect()
        } else {
            p.artifacts
                .iter()
                .map(|n| self.require(n, Phase::ComposeArtifact, Phase::AnalyzeArtifact))
                .collect::<Result<_, _>>()?
        };
        if targets.is_empty() {
            return Err(ServiceError::Conflict(
                "analyze_artifact needs at least one artifact; run start_investigation first".into(),
            ));
        }
        let summaries: Vec<Value> = targets.iter().map(|a| summarize(a)).collect::<Result<_, _>>()?;
        let mut report = json!({
            "format": "analysis-report",
            "version": 1,
            "artifacts": summaries,
        });
        if p.term_report {
            report["termReport"] = self.term_report(p.top_terms)?;
        }
        Ok(Built {
            kind: ArtifactKind::Report,
            inputs: targets.iter().map(|a| a.name.clone()).collect(),
            payload: with_newline(serde_json::to_string_pretty(&report).expect("report serializes")),
            renderings: BTreeMap::new(),
            warnings: Vec::new(),
        })
    }

    /// Per-term document frequencies of every cluster, and the most frequent
    /// index terms no cluster term covers.
    fn term_report(&self, top: usize) -> Result<Value, ServiceError> {
        let mut covered: HashSet<String> = HashSet::new();
        let mut clusters = Vec::new();
        for c in self.ontology.clusters() {
            let mut all_docs: BTreeSet<String> = BTreeSet::new();
            let mut terms = Vec::new();
            for t in &c.terms {
                let tokens = self.index.analyze_phrase(&t.phrase)?;
                covered.extend(tokens.iter().cloned());
                let docs = self.index.match_phrase(&t.phrase)?;
                terms.push(json!({"phrase": t.phrase, "documents": docs.len()}));
                all_docs.extend(docs);
            }
            clusters.push(json!({"name": c.name, "documents": all_docs.len(), "terms": terms}));
        }
        let mut uncovered: Vec<(usize, usize, &str)> = self
            .index
            .terms()
            .filter(|t| !covered.contains(*t))
            .map(|t| {
                let postings = self.index.postings(t);
                let docs: BTreeSet<&str> = postings.iter().map(|p| p.document).collect();
                let occ: usize = postings.iter().map(|p| p.count).sum();
                (docs.len(), occ, t)
            })
            .collect();
        uncovered.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(b.2)));
        uncovered.truncate(top);
        let uncovered: Vec<Value> = uncovered
            .into_iter()
            .map(|(d, o, t)| json!({"term": t, "documents": d, "occurrences": o}))
            .collect();
        Ok(json!({
            "analyzer": self.index.analyzer_id(),
            "clusters": clusters,
            "uncovered": uncovered,
        }))
    }

    fn deploy(&self, p: &DeployParams) -> Result<Built, ServiceError> {
        if !self.artifacts.values().any(|a| a.kind == ArtifactKind::Report) {
            return Err(ServiceError::Conflict(
                "deploy_knowledge needs an analysis report; run analyze_artifact first".into(),
            ));
        }
        let targets: Vec<&Artifact> = if p.artifacts.is_empty() {
            self.artifacts
                .values()
                .filter(|a| a.kind != ArtifactKind::Bundle && a.name != p.output)
                .collect()
        } else {
            p.artifacts
                .iter()
                .map(|n| self.require(n, Phase::ComposeArtifact, Phase::DeployKnowledge))
                .collect::<Result<_, _>>()?
        };
        if let Some(k) = p.annotations.keys().find(|k| !targets.iter().any(|a| &a.name == *k)) {
            return Err(ServiceError::BadRequest(format!("annotation for {k:?}, which is not in the bundle")));
        }
        let items: Vec<Value> = targets
            .iter()
            .map(|a| {
                let payload: Value = serde_json::from_str(&a.payload)
                    .map_err(|e| ServiceError::Internal(format!("artifact {}: {e}", a.name)))?;
                Ok(json!({
                    "name": a.name,
                    "kind": a.kind,
                    "profileHash": a.profile_hash,
                    "digest": a.digest,
                    "annotation": p.annotations.get(&a.name),
                    "payload": payload,
                }))
            })
            .collect::<Result<_, ServiceError>>()?;
        let bundle = json!({
            "format": "knowledge-bundle",
            "version": 1,
            "artifacts": items,
        });
        Ok(Built {
            kind: ArtifactKind::Bundle,
            inputs: targets.iter().map(|a| a.name.clone()).collect(),
            payload: with_newline(serde_json::to_string_pretty(&bundle).expect("bundle serializes")),
            renderings: BTreeMap::new(),
            warnings: Vec::new(),
        })
    }

    // Access

    /// `json` is the native payload, `xml` the envelope around the payload
    /// (or around `payload_format` when given), anything else a rendering.
    pub fn get_artifact(&self, name: &str, format: &str, payload_format: Option<&str>) -> Result<String, ServiceError> {
        let a = self.artifact(name)?;
        let pick = |f: &str| -> Result<String, ServiceError> {
            match f {
                "json" => Ok(a.payload.clone()),
                other => a.renderings.get(other).cloned().ok_or_else(|| {
                    ServiceError::BadRequest(format!(
                        "artifact {name:?} has no {other:?} format (available: {})",
                        a.formats().join(", ")
                    ))
                }),
            }
        };
        if format != "xml" {
            return pick(format);
        }
        let inner = payload_format.unwrap_or("json");
        if inner == "xml" {
            return Err(ServiceError::BadRequest("payload cannot itself be xml".into()));
        }
        let body = pick(inner)?;
        let mut meta = BTreeMap::new();
        meta.insert("session".to_string(), self.id.clone());
        meta.insert("artifact".to_string(), a.name.clone());
        meta.insert("kind".to_string(), a.kind.as_str().to_string());
        meta.insert("phase".to_string(), a.phase.as_str().to_string());
        meta.insert("profile".to_string(), a.profile.clone());
        meta.insert("profileHash".to_string(), a.profile_hash.clone());
        meta.insert("digest".to_string(), a.digest.clone());
        meta.insert("inputs".to_string(), a.inputs.join(" "));
        Ok(render_envelope(&meta, inner, &body))
    }

    /// A corpus document or a composite with links to its members.
    pub fn get_document(&self, id: &str, format: &str) -> Result<String, ServiceError> {
        let value = if let Some(d) = self.corpus.get(id) {
            json!({
                "kind": "document",
                "id": d.id,
                "url": d.source_url,
                "timestamp": d.timestamp.as_ref().map(format_timestamp),
                "sections": d.sections.iter().map(|(s, t)| (s.as_str(), t)).collect::<BTreeMap<_, _>>(),
                "fields": d.structured_fields,
            })
        } else if let Some(c) = self.composites.get(id) {
            json!({
                "kind": "composite",
                "id": c.id,
                "url": c.url,
                "rule": c.rule,
                "key": c.key,
                "timestamp": c.timestamp.as_ref().map(format_timestamp),
                "sections": c.sections.iter().map(|(s, t)| (s.as_str(), t)).collect::<BTreeMap<_, _>>(),
                "members": c.members.iter().zip(&c.member_urls).map(|(m, u)| json!({
                    "id": m,
                    "url": u,
                    "href": format!("/sessions/{}/documents/{}", self.id, m),
                })).collect::<Vec<_>>(),
            })
        } else {
            return Err(ServiceError::NotFound(format!("unknown document {id:?}")));
        };
        match format {
            "json" => Ok(with_newline(serde_json::to_string_pretty(&value).expect("document serializes"))),
            "xml" => {
                let body = if let Some(d) = self.corpus.get(id) {
                    document_xml(d, "")
                } else {
                    composite_xml(&self.composites[id], &self.id)
                };
                let mut meta = BTreeMap::new();
                meta.insert("session".to_string(), self.id.clone());
                meta.insert("document".to_string(), id.to_string());
                Ok(render_envelope(&meta, "xml", &body))
            }
            other => Err(ServiceError::BadRequest(format!("unknown document format {other:?}"))),
        }
    }

    /// Object id behind a label URL.
    pub fn resolve_url(&self, url: &str) -> Result<String, ServiceError> {
        if let Some(d) = self.corpus.documents().iter().find(|d| d.source_url == url) {
            return Ok(d.id.clone());
        }
        if let Some(c) = self.composites.values().find(|c| c.url == url) {
            return Ok(c.id.clone());
        }
        Err(ServiceError::NotFound(format!("no document has URL {url:?}")))
    }

    /// Resolves every URL found in any artifact payload or rendering.
    pub fn link_sweep(&self) -> LinkSweep {
        let mut checked = 0;
        let mut failures = Vec::new();
        for a in self.artifacts.values() {
            let mut urls = BTreeSet::new();
            for text in std::iter::once(&a.payload).chain(a.renderings.values()) {
                if let Ok(v) = serde_json::from_str::<Value>(text) {
                    collect_urls(&v, &mut urls);
                }
            }
            for url in urls {
                checked += 1;
                let outcome = self.resolve_url(&url).and_then(|id| self.get_document(&id, "json"));
                if let Err(e) = outcome {
                    failures.push(LinkFailure {
                        artifact: a.name.clone(),
                        url,
                        reason: e.to_string(),
                    });
                }
            }
        }
        LinkSweep { checked, failures }
    }

    /// Rebuilds the session from its inputs, re-runs every audited profile
    /// in order and compares artifact digests.
    pub fn replay(&self) -> ReplayReport {
        let p = self.corpus.provenance();
        let mut fresh = match Session::create("replay", &self.corpus_xml, &self.ontology_xml, &p.source, p.ingested_at) {
            Ok(s) => s,
            Err(e) => {
                return ReplayReport {
                    index_identical: false,
                    entries: vec![ReplayEntry {
                        seq: 0,
                        artifact: String::new(),
                        expected: String::new(),
                        actual: None,
                        identical: false,
                        error: Some(e.to_string()),
                    }],
                }
            }
        };
        let index_identical = fresh.index.to_json() == self.index.to_json();
        let entries = self
            .audit
            .iter()
            .map(|entry| match fresh.run_phase(&entry.profile) {
                Ok(out) => ReplayEntry {
                    seq: entry.seq,
                    artifact: entry.output.clone(),
                    identical: out.digest == entry.digest,
                    expected: entry.digest.clone(),
                    actual: Some(out.digest),
                    error: None,
                },
                Err(e) => ReplayEntry {
                    seq: entry.seq,
                    artifact: entry.output.clone(),
                    expected: entry.digest.clone(),
                    actual: None,
                    identical: false,
                    error: Some(e.to_string()),
                },
            })
            .collect();
        ReplayReport {
            index_identical,
            entries,
        }
    }
}

struct Built {
    kind: ArtifactKind,
    inputs: Vec<String>,
    payload: String,
    renderings: BTreeMap<String, String>,
    warnings: Vec<String>,
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn collect_urls(v: &Value, out: &mut BTreeSet<String>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                match (k.as_str(), x) {
                    ("url", Value::String(s)) if !s.is_empty() => {
                        out.insert(s.clone());
                    }
                    ("memberUrls" | "member_urls", Value::Array(items)) => {
                        out.extend(items.iter().filter_map(|i| i.as_str()).map(str::to_string));
                    }
                    _ => collect_urls(x, out),
                }
            }
        }
        Value::Array(items) => items.iter().for_each(|i| collect_urls(i, out)),
        _ => {}
    }
}

fn composite_xml(c: &CompositeObject, session: &str) -> String {
    let mut out = format!(
        "<composite id=\"{}\" url=\"{}\" rule=\"{}\" key=\"{}\">\n",
        escape_attr(&c.id),
        escape_attr(&c.url),
        escape_attr(&c.rule),
        escape_attr(&c.key)
    );
    for (m, u) in c.members.iter().zip(&c.member_urls) {
        out.push_str(&format!(
            "  <member id=\"{}\" url=\"{}\" href=\"/sessions/{}/documents/{}\"/>\n",
            escape_attr(m),
            escape_attr(u),
            escape_attr(session),
            escape_attr(m)
        ));
    }
    for (s, t) in &c.sections {
        out.push_str(&format!("  <{0}>{1}</{0}>\n", s.as_str(), escape_text(t)));
    }
    out.push_str("</composite>\n");
    out
}

fn summarize(a: &Artifact) -> Result<Value, ServiceError> {
    let v: Value =
        serde_json::from_str(&a.payload).map_err(|e| ServiceError::Internal(format!("artifact {}: {e}", a.name)))?;
    let len = |key: &str| v[key].as_array().map_or(0, Vec::len);
    let stats = match a.kind {
        ArtifactKind::Context => {
            let rows = v["incidence"].as_array().cloned().unwrap_or_default();
            let crosses: usize = rows.iter().filter_map(|r| r.as_str()).map(|r| r.matches('X').count()).sum();
            let cells = len("objects") * len("attributes");
            json!({
                "objects": len("objects"),
                "attributes": len("attributes"),
                "incidences": crosses,
                "density": if cells == 0 { 0.0 } else { crosses as f64 / cells as f64 },
            })
        }
        ArtifactKind::Lattice => json!({"concepts": len("nodes"), "coverPairs": len("edges"), "layers": v["layers"]}),
        ArtifactKind::Tracks => {
            let tracks = v["trackList"].as_array().cloned().unwrap_or_default();
            let steps: Vec<&Value> = tracks.iter().filter_map(|t| t["steps"].as_array()).flatten().collect();
            let stays = steps.iter().filter(|s| s["from"] == s["to"]).count();
            json!({
                "concepts": len("nodes"),
                "entities": tracks.len(),
                "transitions": steps.len(),
                "conceptChanges": steps.len() - stays,
            })
        }
        ArtifactKind::Map => {
            let cells: Vec<f64> = v["umatrix"]
                .as_array()
                .into_iter()
                .flatten()
                .filter_map(|r| r.as_array())
                .flatten()
                .filter_map(|x| x.as_f64())
                .collect();
            let max = cells.iter().copied().fold(0.0, f64::max);
            let mean = if cells.is_empty() { 0.0 } else { cells.iter().sum::<f64>() / cells.len() as f64 };
            json!({"rows": v["rows"], "cols": v["cols"], "labels": len("labels"), "umatrixMax": max, "umatrixMean": mean})
        }
        ArtifactKind::Hmm => json!({"states": len("nodes"), "edges": len("edges"), "threshold": v["threshold"]}),
        ArtifactKind::Report | ArtifactKind::Bundle => json!({"artifacts": len("artifacts")}),
    };
    Ok(json!({"name": a.name, "kind": a.kind, "profileHash": a.profile_hash, "summary": stats}))
}
