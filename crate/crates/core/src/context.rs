//! Formal contexts (cross tables), derivation operators and attribute
//! clustering.

use std::collections::{HashMap, HashSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::bits::BitSet;
use crate::corpus::{Document, InvertedIndex};
use crate::ontology::{EvalError, Ontology};

/// A row of the cross table: an object with its display label and the URL
/// that opens it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContextObject {
    pub id: String,
    pub label: String,
    pub url: String,
}

impl ContextObject {
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        ContextObject {
            label: id.clone(),
            url: String::new(),
            id,
        }
    }

    pub fn from_document(doc: &Document) -> Self {
        ContextObject {
            id: doc.id.clone(),
            label: doc.id.clone(),
            url: doc.source_url.clone(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ContextError {
    #[error("duplicate object id: {0}")]
    DuplicateObject(String),
    #[error("duplicate attribute name: {0}")]
    DuplicateAttribute(String),
    #[error("incidence has {rows} rows of width {width}, expected {objects} x {attributes}")]
    Dimensions {
        rows: usize,
        width: usize,
        objects: usize,
        attributes: usize,
    },
    #[error("unknown attribute: {0}")]
    UnknownAttribute(String),
    #[error("unknown object: {0}")]
    UnknownObject(String),
    #[error("attribute clustering is not a partition: {0}")]
    NotAPartition(String),
    #[error("evaluating {attribute} on {object}: {source}")]
    Evaluation {
        object: String,
        attribute: String,
        #[source]
        source: EvalError,
    },
    #[error("cross table format: {0}")]
    Format(String),
}

/// The cross table `(G, M, I)`, stored both as packed rows per object and
/// packed columns per attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormalContext {
    objects: Vec<ContextObject>,
    attributes: Vec<String>,
    rows: Vec<BitSet>,
    columns: Vec<BitSet>,
}

impl FormalContext {
    pub fn new(objects: Vec<ContextObject>, attributes: Vec<String>, rows: Vec<BitSet>) -> Result<Self, ContextError> {
        let mut seen = HashSet::new();
        for o in &objects {
            if !seen.insert(o.id.as_str()) {
                return Err(ContextError::DuplicateObject(o.id.clone()));
            }
        }
        let mut seen = HashSet::new();
        for a in &attributes {
            if !seen.insert(a.as_str()) {
                return Err(ContextError::DuplicateAttribute(a.clone()));
            }
        }
        if rows.len() != objects.len() || rows.iter().any(|r| r.universe() != attributes.len()) {
            return Err(ContextError::Dimensions {
                rows: rows.len(),
                width: rows.first().map_or(attributes.len(), BitSet::universe),
                objects: objects.len(),
                attributes: attributes.len(),
            });
        }
        let mut columns = vec![BitSet::new(objects.len()); attributes.len()];
        for (g, row) in rows.iter().enumerate() {
            for m in row.iter() {
                columns[m].insert(g);
            }
        }
        Ok(FormalContext {
            objects,
            attributes,
            rows,
            columns,
        })
    }

    /// Context from a boolean matrix with plain object ids.
    pub fn from_bools<S: Into<String>, T: Into<String>>(
        objects: impl IntoIterator<Item = S>,
        attributes: impl IntoIterator<Item = T>,
        incidence: &[Vec<bool>],
    ) -> Result<Self, ContextError> {
        let objects: Vec<_> = objects.into_iter().map(|o| ContextObject::new(o)).collect();
        let attributes: Vec<String> = attributes.into_iter().map(Into::into).collect();
        let width = attributes.len();
        let rows = incidence
            .iter()
            .map(|r| {
                if r.len() != width {
                    return Err(ContextError::Dimensions {
                        rows: incidence.len(),
                        width: r.len(),
                        objects: objects.len(),
                        attributes: width,
                    });
                }
                Ok(BitSet::from_indices(width, r.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        FormalContext::new(objects, attributes, rows)
    }

    pub fn objects(&self) -> &[ContextObject] {
        &self.objects
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn attribute_count(&self) -> usize {
        self.attributes.len()
    }

    pub fn incidence(&self, object: usize, attribute: usize) -> bool {
        self.rows[object].contains(attribute)
    }

    pub fn row(&self, object: usize) -> &BitSet {
        &self.rows[object]
    }

    pub fn column(&self, attribute: usize) -> &BitSet {
        &self.columns[attribute]
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a == name)
    }

    /// `B'`: objects having every attribute in `attributes`.
    pub fn extent_of(&self, attributes: &BitSet) -> BitSet {
        let mut extent = BitSet::full(self.objects.len());
        for m in attributes.iter() {
            extent.intersect_with(&self.columns[m]);
        }
        extent
    }

    /// `A'`: attributes shared by every object in `objects`.
    pub fn intent_of(&self, objects: &BitSet) -> BitSet {
        let mut intent = BitSet::full(self.attributes.len());
        for g in objects.iter() {
            intent.intersect_with(&self.rows[g]);
        }
        intent
    }

    /// `A''` for a set of objects.
    pub fn close_objects(&self, objects: &BitSet) -> BitSet {
        self.extent_of(&self.intent_of(objects))
    }

    /// `B''` for a set of attributes.
    pub fn close_attributes(&self, attributes: &BitSet) -> BitSet {
        self.intent_of(&self.extent_of(attributes))
    }

    pub fn attribute_set<S: AsRef<str>>(&self, names: &[S]) -> Result<BitSet, ContextError> {
        let mut set = BitSet::new(self.attributes.len());
        for n in names {
            let i = self
                .attribute_index(n.as_ref())
                .ok_or_else(|| ContextError::UnknownAttribute(n.as_ref().to_string()))?;
            set.insert(i);
        }
        Ok(set)
    }

    pub fn object_set<S: AsRef<str>>(&self, ids: &[S]) -> Result<BitSet, ContextError> {
        let mut set = BitSet::new(self.objects.len());
        for n in ids {
            let i = self
                .object_index(n.as_ref())
                .ok_or_else(|| ContextError::UnknownObject(n.as_ref().to_string()))?;
            set.insert(i);
        }
        Ok(set)
    }

    /// Object ids having all named attributes, in context order.
    pub fn derive_extent<S: AsRef<str>>(&self, attributes: &[S]) -> Result<Vec<String>, ContextError> {
        let extent = self.extent_of(&self.attribute_set(attributes)?);
        Ok(extent.iter().map(|g| self.objects[g].id.clone()).collect())
    }

    /// Attribute names shared by all named objects, in context order.
    pub fn derive_intent<S: AsRef<str>>(&self, objects: &[S]) -> Result<Vec<String>, ContextError> {
        let intent = self.intent_of(&self.object_set(objects)?);
        Ok(intent.iter().map(|m| self.attributes[m].clone()).collect())
    }

    /// One column per group: OR of member columns in `Any` mode, AND in `All`.
    pub fn cluster_attributes(&self, clustering: &AttributeClustering, mode: ClusterMode) -> Result<FormalContext, ContextError> {
        let mut owner: HashMap<&str, usize> = HashMap::new();
        for (gi, group) in clustering.groups.iter().enumerate() {
            for member in &group.members {
                if self.attribute_index(member).is_none() {
                    return Err(ContextError::NotAPartition(format!("{member} is not an attribute")));
                }
                if owner.insert(member.as_str(), gi).is_some() {
                    return Err(ContextError::NotAPartition(format!("{member} appears in two groups")));
                }
            }
            if group.members.is_empty() {
                return Err(ContextError::NotAPartition(format!("group {} is empty", group.name)));
            }
        }
        if let Some(a) = self.attributes.iter().find(|a| !owner.contains_key(a.as_str())) {
            return Err(ContextError::NotAPartition(format!("{a} belongs to no group")));
        }
        let width = clustering.groups.len();
        let rows = self
            .rows
            .iter()
            .map(|row| {
                BitSet::from_indices(
                    width,
                    clustering.groups.iter().enumerate().filter_map(|(gi, group)| {
                        let mut members = group.members.iter().map(|m| row.contains(self.attribute_index(m).unwrap()));
                        let on = match mode {
                            ClusterMode::Any => members.any(|b| b),
                            ClusterMode::All => members.all(|b| b),
                        };
                        on.then_some(gi)
                    }),
                )
            })
            .collect();
        FormalContext::new(
            self.objects.clone(),
            clustering.groups.iter().map(|g| g.name.clone()).collect(),
            rows,
        )
    }

    /// Merges objects with identical rows and attributes with identical
    /// columns, keeping the first of each class.
    pub fn clarified(&self) -> FormalContext {
        let keep_objects = first_of_each(&self.rows);
        let keep_attributes = first_of_each(&self.columns);
        self.restrict(&keep_objects, &keep_attributes)
    }

    /// Clarifies, then drops reducible objects and attributes: those whose
    /// row (column) is the intersection of strictly larger rows (columns).
    pub fn reduced(&self) -> FormalContext {
        let clar = self.clarified();
        let keep_objects = irreducible(&clar.rows, clar.attributes.len());
        let keep_attributes = irreducible(&clar.columns, clar.objects.len());
        clar.restrict(&keep_objects, &keep_attributes)
    }

    fn restrict(&self, objects: &[usize], attributes: &[usize]) -> FormalContext {
        let rows = objects
            .iter()
            .map(|&g| {
                BitSet::from_indices(
                    attributes.len(),
                    attributes.iter().enumerate().filter(|(_, &m)| self.rows[g].contains(m)).map(|(i, _)| i),
                )
            })
            .collect();
        FormalContext::new(
            objects.iter().map(|&g| self.objects[g].clone()).collect(),
            attributes.iter().map(|&m| self.attributes[m].clone()).collect(),
            rows,
        )
        .expect("restriction of a valid context is valid")
    }

    /// Burmeister `.cxt` cross table. Labels and URLs are not represented.
    pub fn to_burmeister(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "B\n\n{}\n{}\n\n", self.objects.len(), self.attributes.len());
        for o in &self.objects {
            out.push_str(&o.id);
            out.push('\n');
        }
        for a in &self.attributes {
            out.push_str(a);
            out.push('\n');
        }
        for row in &self.rows {
            out.push_str(&row_string(row));
            out.push('\n');
        }
        out
    }

    pub fn from_burmeister(text: &str) -> Result<FormalContext, ContextError> {
        let fail = |msg: &str| ContextError::Format(msg.to_string());
        let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
        if lines.next().map(str::trim) != Some("B") {
            return Err(fail("first line must be B"));
        }
        let mut counts = Vec::new();
        for line in lines.by_ref() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            counts.push(line.parse::<usize>().map_err(|_| fail("expected object and attribute counts"))?);
            if counts.len() == 2 {
                break;
            }
        }
        let [n, m] = counts[..] else {
            return Err(fail("missing counts"));
        };
        let mut rest = lines.skip_while(|l| l.trim().is_empty());
        let mut take = |k: usize, what: &str| -> Result<Vec<String>, ContextError> {
            (0..k)
                .map(|_| rest.next().map(str::to_string).ok_or_else(|| fail(&format!("missing {what}"))))
                .collect()
        };
        let objects = take(n, "object names")?;
        let attributes = take(m, "attribute names")?;
        let grid = take(n, "incidence rows")?;
        let rows = grid
            .iter()
            .map(|line| parse_row(line.trim(), m))
            .collect::<Result<Vec<_>, _>>()?;
        FormalContext::new(objects.into_iter().map(ContextObject::new).collect(), attributes, rows)
    }

    pub fn to_json(&self) -> String {
        let json = ContextJson {
            objects: self.objects.clone(),
            attributes: self.attributes.clone(),
            incidence: self.rows.iter().map(row_string).collect(),
        };
        serde_json::to_string_pretty(&json).expect("context serializes")
    }

    pub fn from_json(text: &str) -> Result<FormalContext, ContextError> {
        let json: ContextJson = serde_json::from_str(text).map_err(|e| ContextError::Format(e.to_string()))?;
        let width = json.attributes.len();
        let rows = json
            .incidence
            .iter()
            .map(|r| parse_row(r, width))
            .collect::<Result<Vec<_>, _>>()?;
        FormalContext::new(json.objects, json.attributes, rows)
    }
}

#[derive(Serialize, Deserialize)]
struct ContextJson {
    objects: Vec<ContextObject>,
    attributes: Vec<String>,
    incidence: Vec<String>,
}

fn row_string(row: &BitSet) -> String {
    (0..row.universe()).map(|m| if row.contains(m) { 'X' } else { '.' }).collect()
}

fn parse_row(line: &str, width: usize) -> Result<BitSet, ContextError> {
    let cells: Vec<char> = line.chars().collect();
    if cells.len() != width {
        return Err(ContextError::Format(format!("row {line:?} has {} cells, expected {width}", cells.len())));
    }
    let mut row = BitSet::new(width);
    for (i, c) in cells.into_iter().enumerate() {
        match c {
            'X' | 'x' => row.insert(i),
            '.' => {}
            other => return Err(ContextError::Format(format!("unexpected cell {other:?}"))),
        }
    }
    Ok(row)
}

fn first_of_each(sets: &[BitSet]) -> Vec<usize> {
    let mut seen = HashSet::new();
    (0..sets.len()).filter(|&i| seen.insert(&sets[i])).collect()
}

fn irreducible(sets: &[BitSet], width: usize) -> Vec<usize> {
    (0..sets.len())
        .filter(|&i| {
            let mut meet = BitSet::full(width);
            for (j, other) in sets.iter().enumerate() {
                if j != i && sets[i].is_strict_subset(other) {
                    meet.intersect_with(other);
                }
            }
            meet != sets[i]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMode {
    #[default]
    Any,
    All,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeGroup {
    pub name: String,
    pub members: Vec<String>,
}

/// A partition of a context's attributes into named groups.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AttributeClustering {
    pub groups: Vec<AttributeGroup>,
}

impl AttributeClustering {
    pub fn group(mut self, name: impl Into<String>, members: &[&str]) -> Self {
        self.groups.push(AttributeGroup {
            name: name.into(),
            members: members.iter().map(|m| m.to_string()).collect(),
        });
        self
    }

    /// Every attribute in its own group.
    pub fn singletons(ctx: &FormalContext) -> Self {
        AttributeClustering {
            groups: ctx
                .attributes()
                .iter()
                .map(|a| AttributeGroup {
                    name: a.clone(),
                    members: vec![a.clone()],
                })
                .collect(),
        }
    }
}

/// Evaluates every attribute on every document: `I(g, m) = evaluate(m, g)`.
pub fn build_context<S: AsRef<str>>(
    objects: &[Document],
    attributes: &[S],
    ontology: &Ontology,
    index: &InvertedIndex,
) -> Result<FormalContext, ContextError> {
    let width = attributes.len();
    for a in attributes {
        if ontology.attribute(a.as_ref()).is_none() {
            return Err(ContextError::UnknownAttribute(a.as_ref().to_string()));
        }
    }
    let mut rows = Vec::with_capacity(objects.len());
    for doc in objects {
        let mut row = BitSet::new(width);
        for (m, a) in attributes.iter().enumerate() {
            let holds = ontology
                .evaluate(a.as_ref(), doc, index)
                .map_err(|source| ContextError::Evaluation {
                    object: doc.id.clone(),
                    attribute: a.as_ref().to_string(),
                    source,
                })?;
            if holds {
                row.insert(m);
            }
        }
        rows.push(row);
    }
    FormalContext::new(
        objects.iter().map(ContextObject::from_document).collect(),
        attributes.iter().map(|a| a.as_ref().to_string()).collect(),
        rows,
    )
}

/// Free-function form of [`FormalContext::cluster_attributes`].
pub fn cluster_attributes(
    ctx: &FormalContext,
    clustering: &AttributeClustering,
    mode: ClusterMode,
) -> Result<FormalContext, ContextError> {
    ctx.cluster_attributes(clustering, mode)
}
