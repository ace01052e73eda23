//! Formal concepts, the concept lattice and its export.
//!
//! Concepts are enumerated with Close-by-One over attributes and returned in
//! lectic order of their extents. The covering relation is computed by
//! upper-neighbour search from each concept's extent.

use std::collections::HashMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::bits::BitSet;
use crate::context::{ContextObject, FormalContext};

/// Default bound on the number of concepts a single enumeration may produce.
pub const DEFAULT_CONCEPT_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FormalConcept {
    pub extent: BitSet,
    pub intent: BitSet,
}

#[derive(Debug, thiserror::Error)]
pub enum FcaError {
    #[error("context has more than {limit} concepts")]
    TooManyConcepts { limit: usize },
    #[error("concept list is inconsistent with the context: {0}")]
    Inconsistent(String),
    #[error("unknown export format: {0}")]
    UnknownFormat(String),
}

/// All formal concepts of `ctx`, bounded by [`DEFAULT_CONCEPT_LIMIT`].
pub fn compute_concepts(ctx: &FormalContext) -> Result<Vec<FormalConcept>, FcaError> {
    compute_concepts_bounded(ctx, DEFAULT_CONCEPT_LIMIT)
}

/// Close-by-One enumeration. Each concept is generated exactly once: a
/// branch adding attribute `j` survives only if closing does not introduce
/// any attribute below `j` that was not already present.
pub fn compute_concepts_bounded(ctx: &FormalContext, limit: usize) -> Result<Vec<FormalConcept>, FcaError> {
    let top_extent = BitSet::full(ctx.object_count());
    let top_intent = ctx.intent_of(&top_extent);
    let mut out = Vec::new();
    push_bounded(&mut out, FormalConcept {
        extent: top_extent,
        intent: top_intent,
    }, limit)?;
    let (extent, intent) = (out[0].extent.clone(), out[0].intent.clone());
    close_by_one(ctx, &extent, &intent, 0, &mut out, limit)?;
    out.sort_by(|a, b| a.extent.cmp(&b.extent));
    Ok(out)
}

fn push_bounded(out: &mut Vec<FormalConcept>, concept: FormalConcept, limit: usize) -> Result<(), FcaError> {
    if out.len() >= limit {
        return Err(FcaError::TooManyConcepts { limit });
    }
    out.push(concept);
    Ok(())
}

fn close_by_one(
    ctx: &FormalContext,
    extent: &BitSet,
    intent: &BitSet,
    start: usize,
    out: &mut Vec<FormalConcept>,
    limit: usize,
) -> Result<(), FcaError> {
    for j in start..ctx.attribute_count() {
        if intent.contains(j) {
            continue;
        }
        let next_extent = extent.intersection(ctx.column(j));
        let next_intent = ctx.intent_of(&next_extent);
        if !next_intent.agrees_below(intent, j) {
            continue;
        }
        push_bounded(out, FormalConcept {
            extent: next_extent.clone(),
            intent: next_intent.clone(),
        }, limit)?;
        close_by_one(ctx, &next_extent, &next_intent, j + 1, out, limit)?;
    }
    Ok(())
}

/// Concepts with their covering relation and reduced labelling.
#[derive(Debug, Clone)]
pub struct ConceptLattice {
    concepts: Vec<FormalConcept>,
    /// `(lower, upper)` index pairs, sorted.
    covering: Vec<(usize, usize)>,
    upper: Vec<Vec<usize>>,
    lower: Vec<Vec<usize>>,
    own_objects: Vec<Vec<usize>>,
    own_attributes: Vec<Vec<usize>>,
    object_concepts: Vec<usize>,
    attribute_concepts: Vec<usize>,
    layers: Vec<usize>,
    top: usize,
    bottom: usize,
    objects: Vec<ContextObject>,
    attributes: Vec<String>,
}

/// Builds the lattice of `concepts`, which must be the complete concept set
/// of `ctx`.
pub fn build_lattice(ctx: &FormalContext, concepts: Vec<FormalConcept>) -> Result<ConceptLattice, FcaError> {
    let by_extent: HashMap<&BitSet, usize> = concepts.iter().enumerate().map(|(i, c)| (&c.extent, i)).collect();
    if by_extent.len() != concepts.len() {
        return Err(FcaError::Inconsistent("duplicate extents".into()));
    }
    let lookup = |extent: &BitSet| -> Result<usize, FcaError> {
        by_extent
            .get(extent)
            .copied()
            .ok_or_else(|| FcaError::Inconsistent(format!("closed extent {extent:?} is missing")))
    };
    for c in &concepts {
        if ctx.intent_of(&c.extent) != c.intent || ctx.extent_of(&c.intent) != c.extent {
            return Err(FcaError::Inconsistent(format!("{:?} is not a closure pair", c.extent)));
        }
    }

    let n = concepts.len();
    let mut upper = vec![Vec::new(); n];
    let mut lower = vec![Vec::new(); n];
    for (i, c) in concepts.iter().enumerate() {
        for neighbour in upper_neighbours(ctx, &c.extent) {
            let j = lookup(&neighbour)?;
            upper[i].push(j);
            lower[j].push(i);
        }
    }
    for list in upper.iter_mut().chain(lower.iter_mut()) {
        list.sort_unstable();
    }
    let mut covering: Vec<(usize, usize)> = upper
        .iter()
        .enumerate()
        .flat_map(|(i, ups)| ups.iter().map(move |&j| (i, j)))
        .collect();
    covering.sort_unstable();

    let top = lookup(&BitSet::full(ctx.object_count()))?;
    let bottom = lookup(&ctx.extent_of(&BitSet::full(ctx.attribute_count())))?;

    let mut own_objects = vec![Vec::new(); n];
    let mut object_concepts = Vec::with_capacity(ctx.object_count());
    for g in 0..ctx.object_count() {
        let extent = ctx.close_objects(&BitSet::from_indices(ctx.object_count(), [g]));
        let c = lookup(&extent)?;
        own_objects[c].push(g);
        object_concepts.push(c);
    }
    let mut own_attributes = vec![Vec::new(); n];
    let mut attribute_concepts = Vec::with_capacity(ctx.attribute_count());
    for m in 0..ctx.attribute_count() {
        let c = lookup(ctx.column(m))?;
        own_attributes[c].push(m);
        attribute_concepts.push(c);
    }

    // Longest path from the top: visit concepts by decreasing extent size so
    // every upper cover is settled first.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(concepts[i].extent.count()));
    let mut layers = vec![0usize; n];
    for &i in &order {
        layers[i] = upper[i].iter().map(|&u| layers[u] + 1).max().unwrap_or(0);
    }

    Ok(ConceptLattice {
        concepts,
        covering,
        upper,
        lower,
        own_objects,
        own_attributes,
        object_concepts,
        attribute_concepts,
        layers,
        top,
        bottom,
        objects: ctx.objects().to_vec(),
        attributes: ctx.attributes().to_vec(),
    })
}

/// Extents of the upper covers of the concept with extent `extent`.
fn upper_neighbours(ctx: &FormalContext, extent: &BitSet) -> Vec<BitSet> {
    let universe = ctx.object_count();
    let mut candidates = BitSet::full(universe);
    candidates.difference_with(extent);
    let mut min = candidates.clone();
    let mut out = Vec::new();
    for g in candidates.iter() {
        let mut seed = extent.clone();
        seed.insert(g);
        let closed = ctx.close_objects(&seed);
        let mut gained = closed.clone();
        gained.difference_with(extent);
        gained.remove(g);
        if gained.is_disjoint(&min) {
            out.push(closed);
        } else {
            min.remove(g);
        }
    }
    out
}

impl ConceptLattice {
    /// Enumerates and builds in one step.
    pub fn from_context(ctx: &FormalContext) -> Result<Self, FcaError> {
        build_lattice(ctx, compute_concepts(ctx)?)
    }

    pub fn concepts(&self) -> &[FormalConcept] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn covering(&self) -> &[(usize, usize)] {
        &self.covering
    }

    pub fn upper_covers(&self, concept: usize) -> &[usize] {
        &self.upper[concept]
    }

    pub fn lower_covers(&self, concept: usize) -> &[usize] {
        &self.lower[concept]
    }

    pub fn own_objects(&self, concept: usize) -> &[usize] {
        &self.own_objects[concept]
    }

    pub fn own_attributes(&self, concept: usize) -> &[usize] {
        &self.own_attributes[concept]
    }

    /// Index of the object concept of object `g`, the smallest concept whose
    /// extent contains it.
    pub fn object_concept(&self, g: usize) -> usize {
        self.object_concepts[g]
    }

    pub fn attribute_concept(&self, m: usize) -> usize {
        self.attribute_concepts[m]
    }

    pub fn layer(&self, concept: usize) -> usize {
        self.layers[concept]
    }

    pub fn layer_count(&self) -> usize {
        self.layers.iter().max().map_or(0, |m| m + 1)
    }

    pub fn top(&self) -> usize {
        self.top
    }

    pub fn bottom(&self) -> usize {
        self.bottom
    }

    pub fn objects(&self) -> &[ContextObject] {
        &self.objects
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn to_json_model(&self) -> LatticeJson {
        let nodes = self
            .concepts
            .iter()
            .enumerate()
            .map(|(i, c)| LatticeNode {
                id: i,
                layer: self.layers[i],
                extent_size: c.extent.count(),
                intent_size: c.intent.count(),
                extent: c.extent.iter().map(|g| self.objects[g].id.clone()).collect(),
                intent: c.intent.iter().map(|m| self.attributes[m].clone()).collect(),
                own_objects: self.own_objects[i]
                    .iter()
                    .map(|&g| ObjectLabel {
                        id: self.objects[g].id.clone(),
                        label: self.objects[g].label.clone(),
                        url: self.objects[g].url.clone(),
                    })
                    .collect(),
                own_attributes: self.own_attributes[i].iter().map(|&m| self.attributes[m].clone()).collect(),
            })
            .collect();
        LatticeJson {
            format: "concept-lattice".into(),
            version: 1,
            object_count: self.objects.len(),
            attribute_count: self.attributes.len(),
            top: self.top,
            bottom: self.bottom,
            layers: self.layer_count(),
            nodes,
            edges: self.covering.iter().map(|&(lower, upper)| LatticeEdge { lower, upper }).collect(),
            track_list: None,
        }
    }

    pub fn to_json(&self) -> String {
        self.to_json_model().render()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph lattice {\n  rankdir=BT;\n  node [shape=box];\n");
        for (i, c) in self.concepts.iter().enumerate() {
            let objs: Vec<&str> = self.own_objects[i].iter().map(|&g| self.objects[g].label.as_str()).collect();
            let attrs: Vec<&str> = self.own_attributes[i].iter().map(|&m| self.attributes[m].as_str()).collect();
            let label = format!(
                "{}\\n{}\\n|{}| / |{}|",
                dot_escape(&attrs.join(", ")),
                dot_escape(&objs.join(", ")),
                c.extent.count(),
                c.intent.count()
            );
            let _ = writeln!(out, "  c{i} [label=\"{label}\"];");
        }
        for &(lower, upper) in &self.covering {
            let _ = writeln!(out, "  c{lower} -> c{upper};");
        }
        out.push_str("}\n");
        out
    }

    pub fn export(&self, format: &str) -> Result<String, FcaError> {
        match format {
            "json" => Ok(self.to_json()),
            "dot" => Ok(self.to_dot()),
            other => Err(FcaError::UnknownFormat(other.to_string())),
        }
    }
}

/// Free-function form of [`ConceptLattice::export`].
pub fn export_lattice(lattice: &ConceptLattice, format: &str) -> Result<String, FcaError> {
    lattice.export(format)
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectLabel {
    pub id: String,
    pub label: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LatticeNode {
    pub id: usize,
    pub layer: usize,
    pub extent_size: usize,
    pub intent_size: usize,
    pub extent: Vec<String>,
    pub intent: Vec<String>,
    pub own_objects: Vec<ObjectLabel>,
    pub own_attributes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeEdge {
    pub lower: usize,
    pub upper: usize,
}

/// Wire form of a lattice, optionally carrying life tracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LatticeJson {
    pub format: String,
    pub version: u32,
    pub object_count: usize,
    pub attribute_count: usize,
    pub top: usize,
    pub bottom: usize,
    /// Number of layers; node layers range over `0..layers`.
    pub layers: usize,
    pub nodes: Vec<LatticeNode>,
    pub edges: Vec<LatticeEdge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_list: Option<Vec<crate::tca::TrackJson>>,
}

impl LatticeJson {
    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("lattice serializes");
        s.push('\n');
        s
    }
}
