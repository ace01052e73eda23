//! Sessions, phase profiles, artifacts and their HTTP surface.

mod envelope;
pub mod http;
mod profile;
mod session;
mod store;

pub use envelope::{parse_envelope, render_envelope, Envelope, ENVELOPE_VERSION};
pub use profile::{
    AnalyzeParams, ComposeKind, ComposeParams, DeployParams, FeatureKind, HmmMode, InvestigationParams, Phase,
    PhaseParams, Profile, SegmentChoice,
};
pub use session::{
    Artifact, ArtifactKind, AuditEntry, LinkFailure, LinkSweep, PhaseOutcome, ReplayEntry, ReplayReport, Session,
    SessionSummary,
};
pub use store::{CreateSession, PhaseRequest, Workbench, DATA_DIR_ENV};

/// Service errors, grouped by how a client should react.
#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    /// Malformed input or a configuration the modules reject.
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    /// Phase ordering or artifact name clashes.
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::Internal(_) => "internal",
        }
    }
}

macro_rules! bad_request_from {
    ($($t:ty => $what:literal),* $(,)?) => {
        $(impl From<$t> for ServiceError {
            fn from(e: $t) -> Self {
                ServiceError::BadRequest(format!(concat!($what, ": {}"), e))
            }
        })*
    };
}

bad_request_from! {
    crate::corpus::CorpusError => "corpus",
    crate::ontology::OntologyError => "ontology",
    crate::ontology::EvalError => "attribute evaluation",
    crate::ontology::RuleError => "rule",
    crate::context::ContextError => "context",
    crate::fca::FcaError => "fca",
    crate::tca::TcaError => "tca",
    crate::esom::EsomError => "esom",
    crate::hmm::HmmError => "hmm",
}

/// Endpoint table: method, path, purpose.
pub const ENDPOINTS: &[(&str, &str, &str)] = &[
    ("GET", "/endpoints", "this table"),
    ("POST", "/sessions", "create a session from corpus and ontology XML"),
    ("GET", "/sessions", "list sessions"),
    ("GET", "/sessions/{id}", "session summary"),
    ("POST", "/sessions/{id}/phases", "run a phase (stored profile name or inline profile)"),
    ("GET", "/sessions/{id}/artifacts", "list artifacts"),
    ("GET", "/sessions/{id}/artifacts/{name}", "artifact; ?format=json|dot|cxt|checkpoint|xml&payload="),
    ("GET", "/sessions/{id}/documents/{doc}", "document or composite; ?format=json|xml"),
    ("GET", "/sessions/{id}/resolve", "object for a label URL; ?url="),
    ("GET", "/sessions/{id}/profiles", "list stored profiles"),
    ("GET", "/sessions/{id}/profiles/{name}", "stored profile"),
    ("PUT", "/sessions/{id}/profiles/{name}", "create or replace a profile"),
    ("DELETE", "/sessions/{id}/profiles/{name}", "delete a profile"),
    ("GET", "/sessions/{id}/audit", "phase run log"),
    ("POST", "/sessions/{id}/replay", "re-run the audit log and compare artifacts"),
    ("GET", "/sessions/{id}/links", "resolve every URL in every artifact"),
];
