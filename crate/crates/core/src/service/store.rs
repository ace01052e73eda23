use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use chrono::Utc;
use serde::{Deserialize, Serialize};

use super::profile::Profile;
use super::session::{PhaseOutcome, Session, SessionSummary};
use super::ServiceError;

/// Environment variable naming the session directory.
pub const DATA_DIR_ENV: &str = "WORKBENCH_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSession {
    /// Corpus XML.
    pub corpus: String,
    /// Ontology XML.
    pub ontology: String,
    #[serde(default)]
    pub source: Option<String>,
}

/// Body of a phase request: a stored profile by name (master mode) or an
/// inline profile (advanced mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
#[allow(clippy::large_enum_variant)]
pub enum PhaseRequest {
    Stored { profile: String },
    Inline(Profile),
}

type Shared = Arc<RwLock<Session>>;

/// Session registry. With a data directory every session lives in one JSON
/// file there and is written after each change.
pub struct Workbench {
    data_dir: Option<PathBuf>,
    sessions: RwLock<BTreeMap<String, Shared>>,
}

fn poisoned<T>(_: T) -> ServiceError {
    ServiceError::Internal("lock poisoned".into())
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Workbench {
    pub fn in_memory() -> Self {
        Self {
            data_dir: None,
            sessions: RwLock::new(BTreeMap::new()),
        }
    }

    pub fn with_data_dir(dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)
            .map_err(|e| ServiceError::Internal(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            data_dir: Some(dir),
            sessions: RwLock::new(BTreeMap::new()),
        })
    }

    /// Uses the directory in `WORKBENCH_DATA_DIR`, or memory when unset.
    pub fn from_env() -> Result<Self, ServiceError> {
        match std::env::var_os(DATA_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Self::with_data_dir(PathBuf::from(dir)),
            _ => Ok(Self::in_memory()),
        }
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    fn path_for(&self, id: &str) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| d.join(format!("{id}.json")))
    }

    fn persist(&self, session: &Session) -> Result<(), ServiceError> {
        let Some(path) = self.path_for(session.id()) else {
            return Ok(());
        };
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, session.to_json())
            .and_then(|_| std::fs::rename(&tmp, &path))
            .map_err(|e| ServiceError::Internal(format!("cannot write {}: {e}", path.display())))
    }

    pub fn create_session(&self, req: &CreateSession) -> Result<SessionSummary, ServiceError> {
        let id = uuid::Uuid::new_v4().to_string();
        let source = req.source.clone().unwrap_or_else(|| "upload".into());
        let session = Session::create(id.clone(), &req.corpus, &req.ontology, &source, Utc::now())?;
        self.persist(&session)?;
        let summary = session.summary();
        self.sessions
            .write()
            .map_err(poisoned)?
            .insert(id, Arc::new(RwLock::new(session)));
        Ok(summary)
    }

    /// Registers an already built session.
    pub fn insert(&self, session: Session) -> Result<SessionSummary, ServiceError> {
        if !valid_id(session.id()) {
            return Err(ServiceError::BadRequest(format!("invalid session id {:?}", session.id())));
        }
        self.persist(&session)?;
        let summary = session.summary();
        self.sessions
            .write()
            .map_err(poisoned)?
            .insert(session.id().to_string(), Arc::new(RwLock::new(session)));
        Ok(summary)
    }

    fn get(&self, id: &str) -> Result<Shared, ServiceError> {
        if let Some(s) = self.sessions.read().map_err(poisoned)?.get(id) {
            return Ok(s.clone());
        }
        let not_found = || ServiceError::NotFound(format!("unknown session {id:?}"));
        if !valid_id(id) {
            return Err(not_found());
        }
        let path = self.path_for(id).ok_or_else(not_found)?;
        let text = std::fs::read_to_string(&path).map_err(|_| not_found())?;
        let session = Arc::new(RwLock::new(Session::from_json(&text)?));
        let mut map = self.sessions.write().map_err(poisoned)?;
        Ok(map.entry(id.to_string()).or_insert(session).clone())
    }

    pub fn list_sessions(&self) -> Result<Vec<String>, ServiceError> {
        let mut ids: Vec<String> = self.sessions.read().map_err(poisoned)?.keys().cloned().collect();
        if let Some(dir) = &self.data_dir {
            if let Ok(entries) = std::fs::read_dir(dir) {
                for e in entries.flatten() {
                    let name = e.file_name().to_string_lossy().into_owned();
                    if let Some(id) = name.strip_suffix(".json") {
                        if valid_id(id) && !ids.iter().any(|x| x == id) {
                            ids.push(id.to_string());
                        }
                    }
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Read access; concurrent with other reads.
    pub fn read<T>(&self, id: &str, f: impl FnOnce(&Session) -> Result<T, ServiceError>) -> Result<T, ServiceError> {
        let s = self.get(id)?;
        let guard = s.read().map_err(poisoned)?;
        f(&guard)
    }

    /// Write access; serialised per session and persisted on success.
    pub fn write<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<T, ServiceError>) -> Result<T, ServiceError> {
        let s = self.get(id)?;
        let mut guard = s.write().map_err(poisoned)?;
        let out = f(&mut guard)?;
        self.persist(&guard)?;
        Ok(out)
    }

    pub fn run_phase(&self, id: &str, req: &PhaseRequest) -> Result<PhaseOutcome, ServiceError> {
        self.write(id, |s| match req {
            PhaseRequest::Stored { profile } => s.run_stored(profile),
            PhaseRequest::Inline(p) => s.run_phase(p),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CORPUS: &str = r#"<corpus language="en">
        <document id="d1" url="http://x/d1" timestamp="2009-01-01"><title>data mining</title></document>
    </corpus>"#;
    const ONTOLOGY: &str = r#"<ontology><cluster name="kd"><term>data mining</term></cluster>
        <attribute kind="textmining" name="kd"><clusterRef name="kd"/></attribute></ontology>"#;

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let req = CreateSession {
            corpus: CORPUS.into(),
            ontology: ONTOLOGY.into(),
            source: None,
        };
        let id = {
            let wb = Workbench::with_data_dir(dir.path()).unwrap();
            let s = wb.create_session(&req).unwrap();
            let p = Profile::from_json(r#"{"name":"s","phase":"start_investigation","parameters":{}}"#).unwrap();
            wb.run_phase(&s.id, &PhaseRequest::Inline(p)).unwrap();
            s.id
        };
        let wb = Workbench::with_data_dir(dir.path()).unwrap();
        assert_eq!(wb.list_sessions().unwrap(), vec![id.clone()]);
        let ctx = wb.read(&id, |s| s.get_artifact("context", "json", None)).unwrap();
        assert!(ctx.contains("\"d1\""));
        assert!(matches!(wb.read("../etc", |_| Ok(())), Err(ServiceError::NotFound(_))));
    }

    #[test]
    fn bad_ontology_creates_nothing() {
        let wb = Workbench::in_memory();
        let req = CreateSession {
            corpus: CORPUS.into(),
            ontology: "<ontology><cluster".into(),
            source: None,
        };
        assert!(matches!(wb.create_session(&req), Err(ServiceError::BadRequest(_))));
        assert!(wb.list_sessions().unwrap().is_empty());
    }
}
