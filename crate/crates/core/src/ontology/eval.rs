use chrono::{Datelike, Timelike};

use super::{Attribute, AttributeKind, EvalError, Expr, Ontology, TemporalPredicate};
use crate::corpus::{Document, InvertedIndex};

impl TemporalPredicate {
    pub fn holds(&self, t: &chrono::DateTime<chrono::Utc>) -> bool {
        match self {
            TemporalPredicate::Window { from, to } => {
                from.is_none_or(|f| *t >= f) && to.is_none_or(|e| *t < e)
            }
            TemporalPredicate::Periodic { weekdays, hours } => {
                weekdays
                    .as_ref()
                    .is_none_or(|days| days.contains(&t.weekday().num_days_from_monday()))
                    && hours.as_ref().is_none_or(|h| h.contains(t.hour()))
            }
        }
    }
}

impl Ontology {
    /// Evaluates the named attribute on `doc`.
    pub fn evaluate(&self, attribute: &str, doc: &Document, index: &InvertedIndex) -> Result<bool, EvalError> {
        let attr = self
            .attribute(attribute)
            .ok_or_else(|| EvalError::UnknownAttribute(attribute.to_string()))?;
        self.evaluate_attribute(attr, doc, index)
    }

    /// Text-mining attributes hold when any search term of their cluster
    /// phrase-matches inside the attribute's sections; temporal attributes
    /// test the timestamp; compounds recurse.
    pub fn evaluate_attribute(&self, attr: &Attribute, doc: &Document, index: &InvertedIndex) -> Result<bool, EvalError> {
        match &attr.kind {
            AttributeKind::TextMining { cluster, sections } => {
                if !index.contains_document(&doc.id) {
                    return Err(EvalError::DocumentNotIndexed(doc.id.clone()));
                }
                if let Some(&missing) = sections.iter().find(|s| !index.sections().contains(s)) {
                    return Err(EvalError::SectionNotIndexed {
                        attribute: attr.name.clone(),
                        section: missing,
                    });
                }
                let cluster = self
                    .cluster(cluster)
                    .ok_or_else(|| EvalError::UnknownAttribute(cluster.clone()))?;
                for term in &cluster.terms {
                    let tokens = index.analyze_phrase(&term.phrase).map_err(|source| EvalError::Term {
                        cluster: cluster.name.clone(),
                        source,
                    })?;
                    if index.phrase_in_document(&tokens, &doc.id, Some(sections)) {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            AttributeKind::Temporal(pred) => {
                let t = doc.timestamp.as_ref().ok_or_else(|| EvalError::MissingTimestamp {
                    attribute: attr.name.clone(),
                    document: doc.id.clone(),
                })?;
                Ok(pred.holds(t))
            }
            AttributeKind::Compound(expr) => self.evaluate_expr(expr, doc, index),
        }
    }

    /// Evaluates a boolean expression. Every operand is evaluated so that
    /// errors surface regardless of short-circuiting.
    pub fn evaluate_expr(&self, expr: &Expr, doc: &Document, index: &InvertedIndex) -> Result<bool, EvalError> {
        match expr {
            Expr::And(ops) => {
                let mut all = true;
                for op in ops {
                    all &= self.evaluate_expr(op, doc, index)?;
                }
                Ok(all)
            }
            Expr::Or(ops) => {
                let mut any = false;
                for op in ops {
                    any |= self.evaluate_expr(op, doc, index)?;
                }
                Ok(any)
            }
            Expr::Not(inner) => Ok(!self.evaluate_expr(inner, doc, index)?),
            Expr::Ref(name) => self.evaluate(name, doc, index),
        }
    }

    /// Total occurrences of the cluster's search terms in `doc`, used for
    /// term-frequency feature vectors and thesaurus reports. Non text-mining
    /// attributes count 1 when they hold.
    pub fn attribute_frequency(&self, attribute: &str, doc: &Document, index: &InvertedIndex) -> Result<usize, EvalError> {
        let attr = self
            .attribute(attribute)
            .ok_or_else(|| EvalError::UnknownAttribute(attribute.to_string()))?;
        match &attr.kind {
            AttributeKind::TextMining { cluster, sections } => {
                let cluster = self
                    .cluster(cluster)
                    .ok_or_else(|| EvalError::UnknownAttribute(cluster.clone()))?;
                let mut total = 0;
                for term in &cluster.terms {
                    let tokens = index.analyze_phrase(&term.phrase).map_err(|source| EvalError::Term {
                        cluster: cluster.name.clone(),
                        source,
                    })?;
                    total += index.phrase_count(&tokens, &doc.id, Some(sections));
                }
                Ok(total)
            }
            _ => Ok(usize::from(self.evaluate_attribute(attr, doc, index)?)),
        }
    }

    /// Confirms every search term survives analysis in the index language.
    pub fn validate_terms(&self, index: &InvertedIndex) -> Result<(), EvalError> {
        for cluster in self.clusters() {
            for term in &cluster.terms {
                index.analyze_phrase(&term.phrase).map_err(|source| EvalError::Term {
                    cluster: cluster.name.clone(),
                    source,
                })?;
            }
        }
        Ok(())
    }
}

/// Free-function form of [`Ontology::evaluate_attribute`].
pub fn evaluate_attribute(
    ontology: &Ontology,
    attr: &Attribute,
    doc: &Document,
    index: &InvertedIndex,
) -> Result<bool, EvalError> {
    ontology.evaluate_attribute(attr, doc, index)
}
