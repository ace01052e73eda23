use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{HmmError, HmmModel};
use crate::corpus::{Document, InvertedIndex};
use crate::ontology::{MissingKeyPolicy, ObjectClusterRule, Ontology, MISSING_KEY_GROUP};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSequence {
    pub entity: String,
    pub documents: Vec<String>,
    pub symbols: Vec<usize>,
    pub timestamps: Vec<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum SymbolSource {
    /// Value of a structured field, such as an activity code.
    Field(String),
    /// Name of the first listed attribute that holds for the document.
    Attributes(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UnmappedPolicy {
    #[default]
    Error,
    Skip,
}

/// Maps documents to observation symbols. `groups` merges raw values
/// (e.g. activity codes) into coarser symbols; `symbols` fixes the
/// vocabulary order, otherwise the sorted distinct symbols are used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolMap {
    pub source: SymbolSource,
    #[serde(default)]
    pub groups: BTreeMap<String, String>,
    #[serde(default)]
    pub symbols: Option<Vec<String>>,
}

impl SymbolMap {
    pub fn field(name: impl Into<String>) -> Self {
        Self {
            source: SymbolSource::Field(name.into()),
            groups: BTreeMap::new(),
            symbols: None,
        }
    }

    pub fn with_groups(mut self, groups: BTreeMap<String, String>) -> Self {
        self.groups = groups;
        self
    }

    pub fn with_symbols(mut self, symbols: Vec<String>) -> Self {
        self.symbols = Some(symbols);
        self
    }

    /// Raw value for the document, before grouping.
    fn raw_value(&self, doc: &Document, eval: Option<(&Ontology, &InvertedIndex)>) -> Result<Option<String>, HmmError> {
        match &self.source {
            SymbolSource::Field(f) => Ok(doc.field(f).map(|v| v.trim().to_string()).filter(|v| !v.is_empty())),
            SymbolSource::Attributes(attrs) => {
                let (ont, index) = eval.ok_or(HmmError::NoEvaluator)?;
                for a in attrs {
                    if ont.evaluate(a, doc, index)? {
                        return Ok(Some(a.clone()));
                    }
                }
                Ok(None)
            }
        }
    }

    fn symbol_name(&self, raw: &str) -> Option<String> {
        let name = if self.groups.is_empty() {
            raw.to_string()
        } else {
            self.groups.get(raw)?.clone()
        };
        match &self.symbols {
            Some(v) if !v.contains(&name) => None,
            _ => Some(name),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSequences {
    /// One per entity, ordered by entity key.
    pub sequences: Vec<EventSequence>,
    pub symbol_names: Vec<String>,
    pub warnings: Vec<String>,
}

impl EventSequences {
    pub fn symbol_lists(&self) -> Vec<Vec<usize>> {
        self.sequences.iter().map(|s| s.symbols.clone()).collect()
    }
}

/// Per entity, time-ordered symbol sequences. Documents tied in time are
/// ordered by id.
pub fn sequences_from_corpus(
    documents: &[Document],
    entity_rule: &ObjectClusterRule,
    map: &SymbolMap,
    policy: UnmappedPolicy,
    eval: Option<(&Ontology, &InvertedIndex)>,
) -> Result<EventSequences, HmmError> {
    let mut warnings = Vec::new();
    let mut events: BTreeMap<String, Vec<(DateTime<Utc>, String, String)>> = BTreeMap::new();
    for doc in documents {
        let ts = doc.timestamp.ok_or_else(|| HmmError::MissingTimestamp(doc.id.clone()))?;
        let entity = match (entity_rule.key_of(doc), entity_rule.missing) {
            (Some(k), _) => k,
            (None, MissingKeyPolicy::Skip) => {
                warnings.push(format!("document {} has no entity key, skipped", doc.id));
                continue;
            }
            (None, MissingKeyPolicy::OwnGroup) => MISSING_KEY_GROUP.to_string(),
            (None, MissingKeyPolicy::Error) => {
                return Err(HmmError::MissingKey {
                    rule: entity_rule.name.clone(),
                    document: doc.id.clone(),
                })
            }
        };
        let raw = map.raw_value(doc, eval)?;
        let symbol = raw.as_deref().and_then(|r| map.symbol_name(r));
        match (symbol, policy) {
            (Some(s), _) => events.entry(entity).or_default().push((ts, doc.id.clone(), s)),
            (None, UnmappedPolicy::Skip) => {
                warnings.push(format!("document {} has no symbol ({:?}), skipped", doc.id, raw.unwrap_or_default()))
            }
            (None, UnmappedPolicy::Error) => {
                return Err(HmmError::Unmapped {
                    document: doc.id.clone(),
                    value: raw.unwrap_or_default(),
                })
            }
        }
    }

    let symbol_names = match &map.symbols {
        Some(v) => v.clone(),
        None => events
            .values()
            .flatten()
            .map(|(_, _, s)| s.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let index: BTreeMap<&str, usize> = symbol_names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let sequences = events
        .into_iter()
        .map(|(entity, mut evs)| {
            evs.sort();
            EventSequence {
                entity,
                documents: evs.iter().map(|e| e.1.clone()).collect(),
                symbols: evs.iter().map(|e| index[e.2.as_str()]).collect(),
                timestamps: evs.iter().map(|e| e.0).collect(),
            }
        })
        .collect();
    Ok(EventSequences {
        sequences,
        symbol_names,
        warnings,
    })
}

/// Process model with one state per symbol: `N = M`, identity emissions,
/// transitions and initial distribution by counting. `smoothing` adds a
/// pseudo-count to every transition and start (0 disables it). States never
/// left get a uniform A row and are listed in `uniform_rows`.
pub fn fit_process_model(sequences: &[Vec<usize>], m: usize, smoothing: f64) -> Result<HmmModel, HmmError> {
    if m == 0 {
        return Err(HmmError::Invalid("M must be at least 1".into()));
    }
    if !(smoothing.is_finite() && smoothing >= 0.0) {
        return Err(HmmError::Invalid(format!("smoothing {smoothing} must be finite and non-negative")));
    }
    let mut starts = vec![0.0; m];
    let mut counts = vec![vec![0.0; m]; m];
    let mut used = 0usize;
    for s in sequences.iter().filter(|s| !s.is_empty()) {
        if let Some(position) = s.iter().position(|&o| o >= m) {
            return Err(HmmError::Symbol {
                symbol: s[position],
                position,
                m,
            });
        }
        used += 1;
        starts[s[0]] += 1.0;
        for w in s.windows(2) {
            counts[w[0]][w[1]] += 1.0;
        }
    }
    if used == 0 {
        return Err(HmmError::NoData);
    }
    let t: Vec<f64> = starts
        .iter()
        .map(|c| (c + smoothing) / (used as f64 + smoothing * m as f64))
        .collect();
    let mut uniform_rows = Vec::new();
    let a = counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let out: f64 = row.iter().sum();
            if out == 0.0 {
                uniform_rows.push(i);
                vec![1.0 / m as f64; m]
            } else {
                let denom = out + smoothing * m as f64;
                row.iter().map(|c| (c + smoothing) / denom).collect()
            }
        })
        .collect();
    let b = (0..m).map(|i| (0..m).map(|k| if i == k { 1.0 } else { 0.0 }).collect()).collect();
    let model = HmmModel {
        n: m,
        m,
        a,
        b,
        t,
        symbol_names: super::default_names(m),
        seed: None,
        trace: Vec::new(),
        uniform_rows,
    };
    model.validate()?;
    Ok(model)
}
