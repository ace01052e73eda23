use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ServiceError;
use crate::context::{AttributeGroup, ClusterMode};
use crate::esom::{Topology, TrainingSchedule};
use crate::hmm::{SymbolMap, UnmappedPolicy};
use crate::time::Granularity;

/// Saved configuration for one phase run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    #[serde(flatten)]
    pub phase: PhaseParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    StartInvestigation,
    ComposeArtifact,
    AnalyzeArtifact,
    DeployKnowledge,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::StartInvestigation => "start_investigation",
            Phase::ComposeArtifact => "compose_artifact",
            Phase::AnalyzeArtifact => "analyze_artifact",
            Phase::DeployKnowledge => "deploy_knowledge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", content = "parameters", rename_all = "snake_case")]
pub enum PhaseParams {
    StartInvestigation(InvestigationParams),
    ComposeArtifact(ComposeParams),
    AnalyzeArtifact(AnalyzeParams),
    DeployKnowledge(DeployParams),
}

fn default_context() -> String {
    "context".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentChoice {
    pub rule: String,
    pub segment: String,
}

/// Phase 1: select documents, apply rules, build the formal context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct InvestigationParams {
    /// Name of the context artifact produced.
    pub output: Option<String>,
    /// Ontology attributes as context columns; empty means all, in
    /// ontology order.
    pub attributes: Vec<String>,
    /// Restrict to these document ids.
    pub documents: Option<Vec<String>>,
    pub segmentation: Option<SegmentChoice>,
    /// Object-cluster rule turning groups of documents into composite objects.
    pub object_cluster: Option<String>,
    pub attribute_clusters: Vec<AttributeGroup>,
    pub cluster_mode: ClusterMode,
    pub clarify: bool,
}

impl InvestigationParams {
    pub fn output_name(&self) -> String {
        self.output.clone().unwrap_or_else(default_context)
    }
}

/// Phase 2: compose an artifact from a context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposeParams {
    /// Name of the artifact produced.
    pub output: String,
    #[serde(default = "default_context")]
    pub context: String,
    #[serde(flatten)]
    pub kind: ComposeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    #[default]
    ContextRows,
    TermFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HmmMode {
    Process {
        #[serde(default)]
        smoothing: f64,
    },
    BaumWelch {
        states: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        tol: Option<f64>,
        #[serde(default)]
        max_iter: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ComposeKind {
    Fca {
        #[serde(default)]
        limit: Option<usize>,
    },
    Tca {
        entity_rule: String,
        #[serde(default = "default_granularity")]
        granularity: Granularity,
    },
    Esom {
        #[serde(default = "default_rows")]
        rows: usize,
        #[serde(default = "default_cols")]
        cols: usize,
        #[serde(default)]
        topology: Topology,
        #[serde(default = "default_epochs")]
        epochs: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        features: FeatureKind,
        #[serde(default)]
        schedule: Option<TrainingSchedule>,
    },
    Hmm {
        entity_rule: String,
        symbols: SymbolMap,
        #[serde(default)]
        unmapped: UnmappedPolicy,
        mode: HmmMode,
        #[serde(default)]
        threshold: f64,
    },
}

fn default_granularity() -> Granularity {
    Granularity::Day
}
fn default_rows() -> usize {
    crate::esom::DEFAULT_ROWS
}
fn default_cols() -> usize {
    crate::esom::DEFAULT_COLS
}
fn default_epochs() -> usize {
    crate::esom::DEFAULT_EPOCHS
}

/// Phase 3: analysis report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzeParams {
    pub output: String,
    /// Artifacts to summarise; empty means all.
    #[serde(default)]
    pub artifacts: Vec<String>,
    /// Include the term-frequency report for thesaurus refinement.
    #[serde(default = "yes")]
    pub term_report: bool,
    /// Index terms not covered by any cluster, most frequent first.
    #[serde(default = "default_top")]
    pub top_terms: usize,
}

fn yes() -> bool {
    true
}
fn default_top() -> usize {
    25
}

/// Phase 4: bundle of artifacts and analyst annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeployParams {
    pub output: String,
    /// Artifacts to include; empty means all.
    #[serde(default)]
    pub artifacts: Vec<String>,
    /// Artifact name to note.
    #[serde(default)]
    pub annotations: BTreeMap<String, String>,
}

impl Profile {
    pub fn new(name: impl Into<String>, phase: PhaseParams) -> Self {
        Self {
            name: name.into(),
            phase,
        }
    }

    pub fn phase(&self) -> Phase {
        match self.phase {
            PhaseParams::StartInvestigation(_) => Phase::StartInvestigation,
            PhaseParams::ComposeArtifact(_) => Phase::ComposeArtifact,
            PhaseParams::AnalyzeArtifact(_) => Phase::AnalyzeArtifact,
            PhaseParams::DeployKnowledge(_) => Phase::DeployKnowledge,
        }
    }

    pub fn output_name(&self) -> String {
        match &self.phase {
            PhaseParams::StartInvestigation(p) => p.output_name(),
            PhaseParams::ComposeArtifact(p) => p.output.clone(),
            PhaseParams::AnalyzeArtifact(p) => p.output.clone(),
            PhaseParams::DeployKnowledge(p) => p.output.clone(),
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("profile serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn from_json(text: &str) -> Result<Self, ServiceError> {
        let p: Profile = serde_json::from_str(text).map_err(|e| ServiceError::BadRequest(format!("profile: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    /// Checks that do not need a session.
    pub fn validate(&self) -> Result<(), ServiceError> {
        let bad = |m: String| Err(ServiceError::BadRequest(format!("profile {}: {m}", self.name)));
        if self.name.trim().is_empty() {
            return Err(ServiceError::BadRequest("profile name is empty".into()));
        }
        if self.output_name().trim().is_empty() {
            return bad("output name is empty".into());
        }
        if let PhaseParams::ComposeArtifact(c) = &self.phase {
            match &c.kind {
                ComposeKind::Esom { rows, cols, .. } if *rows == 0 || *cols == 0 => {
                    return bad("esom grid needs positive rows and cols".into())
                }
                ComposeKind::Hmm { threshold, mode, .. } => {
                    if !(0.0..=1.0).contains(threshold) {
                        return bad(format!("threshold {threshold} outside [0, 1]"));
                    }
                    if let HmmMode::BaumWelch { states: 0, .. } = mode {
                        return bad("baum_welch needs at least one state".into());
                    }
                    if let HmmMode::Process { smoothing } = mode {
                        if !(smoothing.is_finite() && *smoothing >= 0.0) {
                            return bad("smoothing must be non-negative".into());
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}
