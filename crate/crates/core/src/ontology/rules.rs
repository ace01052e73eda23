use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{MissingKeyPolicy, ObjectClusterRule, Ontology, RuleError, SegmentationForm, SegmentationRule};
use crate::corpus::{Corpus, Document, InvertedIndex, Section};

/// Label of the group collecting key-less documents under `own-group`.
pub const MISSING_KEY_GROUP: &str = "(missing)";

#[derive(Debug, Clone)]
pub struct Segment {
    pub label: String,
    pub corpus: Corpus,
}

/// Partitions `corpus` by a segmentation rule.
///
/// Predicate rules produce `match` and `non-match`; interval rules produce
/// one segment per interval, in rule order, followed by `outside`.
pub fn apply_segmentation(
    corpus: &Corpus,
    rule: &SegmentationRule,
    ontology: &Ontology,
    index: &InvertedIndex,
) -> Result<Vec<Segment>, RuleError> {
    rule.validate()?;
    let mut buckets: Vec<(String, Vec<&str>)> = match &rule.form {
        SegmentationForm::Predicate(_) => vec![("match".into(), vec![]), ("non-match".into(), vec![])],
        SegmentationForm::Intervals(ivs) => ivs
            .iter()
            .map(|iv| (iv.label.clone(), vec![]))
            .chain(std::iter::once(("outside".to_string(), vec![])))
            .collect(),
    };
    for doc in corpus.documents() {
        let slot = match &rule.form {
            SegmentationForm::Predicate(expr) => usize::from(!ontology.evaluate_expr(expr, doc, index)?),
            SegmentationForm::Intervals(ivs) => {
                let t = doc.timestamp.ok_or_else(|| RuleError::MissingTimestamp {
                    rule: rule.name.clone(),
                    document: doc.id.clone(),
                })?;
                ivs.iter().position(|iv| iv.from <= t && t < iv.to).unwrap_or(ivs.len())
            }
        };
        buckets[slot].1.push(&doc.id);
    }
    Ok(buckets
        .into_iter()
        .map(|(label, ids)| Segment {
            label,
            corpus: corpus.subset(ids),
        })
        .collect())
}

/// Documents merged by an object-cluster rule into one analysis object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeObject {
    pub id: String,
    pub rule: String,
    pub key: String,
    pub url: String,
    pub members: Vec<String>,
    pub member_urls: Vec<String>,
    pub sections: BTreeMap<Section, String>,
    /// Earliest member timestamp.
    pub timestamp: Option<DateTime<Utc>>,
}

impl CompositeObject {
    pub fn composite_id(rule: &str, key: &str) -> String {
        format!("{rule}:{key}")
    }

    pub fn composite_url(rule: &str, key: &str) -> String {
        format!("urn:composite:{rule}:{key}")
    }

    /// The composite as an indexable document: member section texts are
    /// newline-joined in member order.
    pub fn to_document(&self) -> Document {
        let mut doc = Document::new(self.id.clone(), self.url.clone())
            .with_field("rule", self.rule.clone())
            .with_field("key", self.key.clone())
            .with_field("members", self.members.join(" "));
        doc.sections = self.sections.clone();
        doc.timestamp = self.timestamp;
        doc
    }
}

#[derive(Debug, Clone, Default)]
pub struct ObjectClustering {
    /// One composite per distinct key, ordered by key.
    pub composites: Vec<CompositeObject>,
    pub skipped: Vec<String>,
    pub warnings: Vec<String>,
}

/// Groups documents by the rule's key.
pub fn apply_object_cluster(documents: &[Document], rule: &ObjectClusterRule) -> Result<ObjectClustering, RuleError> {
    let mut groups: BTreeMap<String, Vec<&Document>> = BTreeMap::new();
    let mut out = ObjectClustering::default();
    for doc in documents {
        let key = match (rule.key_of(doc), rule.missing) {
            (Some(k), _) => k,
            (None, MissingKeyPolicy::Skip) => {
                out.skipped.push(doc.id.clone());
                out.warnings
                    .push(format!("object-cluster {}: document {} has no key, skipped", rule.name, doc.id));
                continue;
            }
            (None, MissingKeyPolicy::OwnGroup) => MISSING_KEY_GROUP.to_string(),
            (None, MissingKeyPolicy::Error) => {
                return Err(RuleError::MissingKey {
                    rule: rule.name.clone(),
                    document: doc.id.clone(),
                })
            }
        };
        groups.entry(key).or_default().push(doc);
    }
    out.composites = groups
        .into_iter()
        .map(|(key, members)| {
            let sections = Section::ALL
                .iter()
                .map(|&s| {
                    let text = members
                        .iter()
                        .map(|d| d.section(s))
                        .filter(|t| !t.is_empty())
                        .collect::<Vec<_>>()
                        .join("\n");
                    (s, text)
                })
                .collect();
            CompositeObject {
                id: CompositeObject::composite_id(&rule.name, &key),
                url: CompositeObject::composite_url(&rule.name, &key),
                rule: rule.name.clone(),
                members: members.iter().map(|d| d.id.clone()).collect(),
                member_urls: members.iter().map(|d| d.source_url.clone()).collect(),
                timestamp: members.iter().filter_map(|d| d.timestamp).min(),
                sections,
                key,
            }
        })
        .collect();
    Ok(out)
}
