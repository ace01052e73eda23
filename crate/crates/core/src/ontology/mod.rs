//! The layered attribute ontology.
//!
//! Search terms are grouped into term clusters; attributes detect a cluster
//! in chosen sections (text mining), test a document timestamp (temporal) or
//! combine other attributes with AND/OR/NOT (compound). Object-cluster rules
//! merge documents into composite objects and segmentation rules partition a
//! corpus.

mod eval;
mod parse;
mod rules;
mod write;

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusError, Section};
use crate::time::Granularity;

pub use rules::{
    apply_object_cluster, apply_segmentation, CompositeObject, ObjectClustering, Segment, MISSING_KEY_GROUP,
};

/// Maximum resolved nesting depth of a compound attribute.
pub const MAX_COMPOUND_DEPTH: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchTerm {
    pub phrase: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

impl SearchTerm {
    pub fn new(phrase: impl Into<String>) -> Self {
        SearchTerm {
            phrase: phrase.into(),
            notes: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermCluster {
    pub name: String,
    pub terms: Vec<SearchTerm>,
}

/// Boolean rule over attribute names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expr {
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Not(Box<Expr>),
    Ref(String),
}

impl Expr {
    pub fn reference(name: impl Into<String>) -> Self {
        Expr::Ref(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Expr) -> Self {
        Expr::Not(Box::new(inner))
    }

    /// Attribute names referenced anywhere in the tree.
    pub fn references(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::And(xs) | Expr::Or(xs) => xs.iter().for_each(|x| x.collect_refs(out)),
            Expr::Not(x) => x.collect_refs(out),
            Expr::Ref(name) => out.push(name),
        }
    }
}

/// Hour-of-day range `[start, end)`; wraps past midnight when `start > end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourRange {
    pub start: u32,
    pub end: u32,
}

impl HourRange {
    pub fn contains(&self, hour: u32) -> bool {
        if self.start < self.end {
            (self.start..self.end).contains(&hour)
        } else {
            hour >= self.start || hour < self.end
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalPredicate {
    /// Half-open `[from, to)`; a missing bound is unbounded.
    Window {
        from: Option<DateTime<Utc>>,
        to: Option<DateTime<Utc>>,
    },
    /// Weekdays are numbered from Monday = 0. Both parts must hold when present.
    Periodic {
        weekdays: Option<BTreeSet<u32>>,
        hours: Option<HourRange>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    TextMining { cluster: String, sections: BTreeSet<Section> },
    Temporal(TemporalPredicate),
    Compound(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingKeyPolicy {
    #[default]
    Skip,
    /// Documents without a key are gathered into one extra group.
    OwnGroup,
    Error,
}

impl MissingKeyPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            MissingKeyPolicy::Skip => "skip",
            MissingKeyPolicy::OwnGroup => "own-group",
            MissingKeyPolicy::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterKey {
    Field(String),
    Timestamp(Granularity),
}

impl ClusterKey {
    pub fn parse(text: &str) -> Option<ClusterKey> {
        let (kind, arg) = text.split_once(':')?;
        match kind.trim() {
            "field" if !arg.trim().is_empty() => Some(ClusterKey::Field(arg.trim().to_string())),
            "timestamp" => arg.parse().ok().map(ClusterKey::Timestamp),
            _ => None,
        }
    }

    pub fn render(&self) -> String {
        match self {
            ClusterKey::Field(name) => format!("field:{name}"),
            ClusterKey::Timestamp(g) => format!("timestamp:{g}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectClusterRule {
    pub name: String,
    pub key: ClusterKey,
    #[serde(default)]
    pub missing: MissingKeyPolicy,
}

impl ObjectClusterRule {
    pub fn new(name: impl Into<String>, key: ClusterKey, missing: MissingKeyPolicy) -> Self {
        ObjectClusterRule {
            name: name.into(),
            key,
            missing,
        }
    }

    /// The grouping key of `doc`, or `None` when it cannot be resolved.
    pub fn key_of(&self, doc: &crate::corpus::Document) -> Option<String> {
        match &self.key {
            ClusterKey::Field(field) => doc.field(field).map(str::trim).filter(|v| !v.is_empty()).map(str::to_string),
            ClusterKey::Timestamp(g) => doc.timestamp.as_ref().map(|t| g.key(t)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentInterval {
    pub label: String,
    pub from: DateTime<Utc>,
    pub to: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentationForm {
    Predicate(Expr),
    Intervals(Vec<SegmentInterval>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationRule {
    pub name: String,
    pub form: SegmentationForm,
}

impl SegmentationRule {
    /// Rejects overlapping or empty intervals.
    pub fn validate(&self) -> Result<(), RuleError> {
        let SegmentationForm::Intervals(intervals) = &self.form else {
            return Ok(());
        };
        for iv in intervals {
            if iv.from >= iv.to {
                return Err(RuleError::EmptyInterval {
                    rule: self.name.clone(),
                    label: iv.label.clone(),
                });
            }
        }
        for (i, a) in intervals.iter().enumerate() {
            for b in &intervals[i + 1..] {
                if a.from < b.to && b.from < a.to {
                    return Err(RuleError::OverlappingIntervals {
                        rule: self.name.clone(),
                        first: a.label.clone(),
                        second: b.label.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Name-addressed collection of clusters, attributes and rules.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ontology {
    clusters: IndexMap<String, TermCluster>,
    attributes: IndexMap<String, Attribute>,
    object_cluster_rules: IndexMap<String, ObjectClusterRule>,
    segmentation_rules: IndexMap<String, SegmentationRule>,
}

impl Ontology {
    pub fn clusters(&self) -> impl Iterator<Item = &TermCluster> {
        self.clusters.values()
    }

    pub fn cluster(&self, name: &str) -> Option<&TermCluster> {
        self.clusters.get(name)
    }

    pub fn attributes(&self) -> impl Iterator<Item = &Attribute> {
        self.attributes.values()
    }

    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.attributes.get(name)
    }

    pub fn attribute_names(&self) -> Vec<String> {
        self.attributes.keys().cloned().collect()
    }

    pub fn object_cluster_rule(&self, name: &str) -> Option<&ObjectClusterRule> {
        self.object_cluster_rules.get(name)
    }

    pub fn object_cluster_rules(&self) -> impl Iterator<Item = &ObjectClusterRule> {
        self.object_cluster_rules.values()
    }

    pub fn segmentation_rule(&self, name: &str) -> Option<&SegmentationRule> {
        self.segmentation_rules.get(name)
    }

    pub fn segmentation_rules(&self) -> impl Iterator<Item = &SegmentationRule> {
        self.segmentation_rules.values()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
            && self.attributes.is_empty()
            && self.object_cluster_rules.is_empty()
            && self.segmentation_rules.is_empty()
    }

    /// Builds an ontology from parts, running the same checks as the parser.
    pub fn from_parts(
        clusters: Vec<TermCluster>,
        attributes: Vec<Attribute>,
        object_cluster_rules: Vec<ObjectClusterRule>,
        segmentation_rules: Vec<SegmentationRule>,
    ) -> Result<Self, OntologyError> {
        let mut ont = Ontology::default();
        for c in clusters {
            ont.add_cluster(c)?;
        }
        for a in attributes {
            ont.add_attribute(a)?;
        }
        for r in object_cluster_rules {
            ont.add_object_cluster_rule(r)?;
        }
        for r in segmentation_rules {
            ont.add_segmentation_rule(r)?;
        }
        ont.resolve()?;
        Ok(ont)
    }

    fn add_cluster(&mut self, cluster: TermCluster) -> Result<(), OntologyError> {
        if cluster.terms.is_empty() {
            return Err(OntologyError::Schema(format!("cluster {} has no terms", cluster.name)));
        }
        insert_unique(&mut self.clusters, "cluster", cluster.name.clone(), cluster)
    }

    fn add_attribute(&mut self, attribute: Attribute) -> Result<(), OntologyError> {
        insert_unique(&mut self.attributes, "attribute", attribute.name.clone(), attribute)
    }

    fn add_object_cluster_rule(&mut self, rule: ObjectClusterRule) -> Result<(), OntologyError> {
        insert_unique(&mut self.object_cluster_rules, "objectCluster", rule.name.clone(), rule)
    }

    fn add_segmentation_rule(&mut self, rule: SegmentationRule) -> Result<(), OntologyError> {
        rule.validate().map_err(|e| OntologyError::Schema(e.to_string()))?;
        insert_unique(&mut self.segmentation_rules, "segmentation", rule.name.clone(), rule)
    }

    /// Checks every reference, rejects compound cycles and caps depth.
    fn resolve(&self) -> Result<(), OntologyError> {
        for attr in self.attributes.values() {
            match &attr.kind {
                AttributeKind::TextMining { cluster, .. } => {
                    if !self.clusters.contains_key(cluster) {
                        return Err(OntologyError::UnknownReference {
                            from: attr.name.clone(),
                            name: cluster.clone(),
                        });
                    }
                }
                AttributeKind::Compound(expr) => self.check_refs(&attr.name, expr)?,
                AttributeKind::Temporal(_) => {}
            }
        }
        for rule in self.segmentation_rules.values() {
            if let SegmentationForm::Predicate(expr) = &rule.form {
                self.check_refs(&rule.name, expr)?;
            }
        }
        self.check_acyclic()?;
        let mut memo = std::collections::HashMap::new();
        for attr in self.attributes.values() {
            let depth = self.attribute_depth(&attr.name, &mut memo);
            if depth > MAX_COMPOUND_DEPTH {
                return Err(OntologyError::TooDeep {
                    name: attr.name.clone(),
                    depth,
                });
            }
        }
        Ok(())
    }

    fn check_refs(&self, owner: &str, expr: &Expr) -> Result<(), OntologyError> {
        for name in expr.references() {
            if !self.attributes.contains_key(name) {
                return Err(OntologyError::UnknownReference {
                    from: owner.to_string(),
                    name: name.to_string(),
                });
            }
        }
        Ok(())
    }

    fn check_acyclic(&self) -> Result<(), OntologyError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Fresh,
            Active,
            Done,
        }
        fn visit<'a>(
            ont: &'a Ontology,
            name: &'a str,
            marks: &mut std::collections::HashMap<&'a str, Mark>,
            path: &mut Vec<&'a str>,
        ) -> Result<(), OntologyError> {
            match marks.get(name).copied().unwrap_or(Mark::Fresh) {
                Mark::Done => return Ok(()),
                Mark::Active => {
                    let start = path.iter().position(|&p| p == name).unwrap_or(0);
                    let mut cycle: Vec<String> = path[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(name.to_string());
                    return Err(OntologyError::Cycle(cycle));
                }
                Mark::Fresh => {}
            }
            marks.insert(name, Mark::Active);
            path.push(name);
            if let Some(Attribute {
                kind: AttributeKind::Compound(expr),
                ..
            }) = ont.attributes.get(name)
            {
                for next in expr.references() {
                    visit(ont, next, marks, path)?;
                }
            }
            path.pop();
            marks.insert(name, Mark::Done);
            Ok(())
        }

        let mut marks = std::collections::HashMap::new();
        for name in self.attributes.keys() {
            visit(self, name, &mut marks, &mut Vec::new())?;
        }
        Ok(())
    }

    fn attribute_depth<'a>(&'a self, name: &'a str, memo: &mut std::collections::HashMap<&'a str, usize>) -> usize {
        if let Some(&d) = memo.get(name) {
            return d;
        }
        let depth = match self.attributes.get(name).map(|a| &a.kind) {
            Some(AttributeKind::Compound(expr)) => self.expr_depth(expr, memo),
            _ => 1,
        };
        memo.insert(name, depth);
        depth
    }

    fn expr_depth<'a>(&'a self, expr: &'a Expr, memo: &mut std::collections::HashMap<&'a str, usize>) -> usize {
        match expr {
            Expr::And(xs) | Expr::Or(xs) => 1 + xs.iter().map(|x| self.expr_depth(x, memo)).max().unwrap_or(0),
            Expr::Not(x) => 1 + self.expr_depth(x, memo),
            Expr::Ref(name) => self.attribute_depth(name, memo),
        }
    }
}

fn insert_unique<T>(map: &mut IndexMap<String, T>, kind: &'static str, name: String, value: T) -> Result<(), OntologyError> {
    if name.trim().is_empty() {
        return Err(OntologyError::Schema(format!("{kind} without a name")));
    }
    if map.contains_key(&name) {
        return Err(OntologyError::Duplicate { kind, name });
    }
    map.insert(name, value);
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum OntologyError {
    #[error("malformed XML at line {line}, column {column}: {message}")]
    Xml { line: u32, column: u32, message: String },
    #[error("ontology schema: {0}")]
    Schema(String),
    #[error("duplicate {kind} name: {name}")]
    Duplicate { kind: &'static str, name: String },
    #[error("{from} refers to unknown name {name}")]
    UnknownReference { from: String, name: String },
    #[error("compound attribute cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("compound attribute {name} nests {depth} levels deep (limit {MAX_COMPOUND_DEPTH})")]
    TooDeep { name: String, depth: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("unknown attribute: {0}")]
    UnknownAttribute(String),
    #[error("temporal attribute {attribute} needs a timestamp but document {document} has none")]
    MissingTimestamp { attribute: String, document: String },
    #[error("document {0} is not in the index")]
    DocumentNotIndexed(String),
    #[error("attribute {attribute} reads section {section}, which is not indexed")]
    SectionNotIndexed { attribute: String, section: Section },
    #[error("term in cluster {cluster}: {source}")]
    Term {
        cluster: String,
        #[source]
        source: CorpusError,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("segmentation {rule}: intervals {first} and {second} overlap")]
    OverlappingIntervals { rule: String, first: String, second: String },
    #[error("segmentation {rule}: interval {label} is empty")]
    EmptyInterval { rule: String, label: String },
    #[error("segmentation {rule}: document {document} has no timestamp")]
    MissingTimestamp { rule: String, document: String },
    #[error("object-cluster {rule}: document {document} has no key")]
    MissingKey { rule: String, document: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub use eval::evaluate_attribute;
pub use parse::parse_ontology;
