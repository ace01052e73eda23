use std::collections::BTreeSet;

use roxmltree::Node;

use super::{
    Attribute, AttributeKind, ClusterKey, Expr, HourRange, MissingKeyPolicy, ObjectClusterRule, Ontology,
    OntologyError, SearchTerm, SegmentInterval, SegmentationForm, SegmentationRule, TemporalPredicate, TermCluster,
};
use crate::corpus::Section;
use crate::time::{format_timestamp, parse_timestamp};
use crate::xml::{node_text, position};

struct Parser<'a, 'input> {
    tree: &'a roxmltree::Document<'input>,
}

/// Parses and fully resolves ontology XML.
pub fn parse_ontology(xml: &str) -> Result<Ontology, OntologyError> {
    let tree = roxmltree::Document::parse(xml).map_err(|e| {
        let pos = e.pos();
        OntologyError::Xml {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let root = tree.root_element();
    if root.tag_name().name() != "ontology" {
        return Err(OntologyError::Schema(format!(
            "root element is <{}>, expected <ontology>",
            root.tag_name().name()
        )));
    }
    let p = Parser { tree: &tree };
    let mut clusters = Vec::new();
    let mut attributes = Vec::new();
    let mut object_rules = Vec::new();
    let mut segmentations = Vec::new();
    for node in elements(root) {
        match node.tag_name().name() {
            "cluster" => clusters.push(p.cluster(node)?),
            "attribute" => attributes.push(p.attribute(node)?),
            "objectCluster" => object_rules.push(p.object_cluster(node)?),
            "segmentation" => segmentations.push(p.segmentation(node)?),
            other => return Err(p.error(node, format!("unexpected <{other}>"))),
        }
    }
    Ontology::from_parts(clusters, attributes, object_rules, segmentations)
}

impl Ontology {
    pub fn from_xml(xml: &str) -> Result<Self, OntologyError> {
        parse_ontology(xml)
    }
}

fn elements<'a, 'input>(node: Node<'a, 'input>) -> impl Iterator<Item = Node<'a, 'input>> {
    node.children().filter(|n| n.is_element())
}

impl Parser<'_, '_> {
    fn error(&self, node: Node<'_, '_>, message: String) -> OntologyError {
        let (line, column) = position(self.tree, node);
        OntologyError::Schema(format!("{message} (line {line}, column {column})"))
    }

    fn required<'n>(&self, node: Node<'n, '_>, attr: &str) -> Result<&'n str, OntologyError> {
        node.attribute(attr)
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| self.error(node, format!("<{}> lacks {attr}", node.tag_name().name())))
    }

    fn timestamp(&self, node: Node<'_, '_>, attr: &str) -> Result<Option<chrono::DateTime<chrono::Utc>>, OntologyError> {
        match node.attribute(attr) {
            None => Ok(None),
            Some(raw) => parse_timestamp(raw)
                .map(Some)
                .ok_or_else(|| self.error(node, format!("unparseable {attr} timestamp {raw:?}"))),
        }
    }

    fn cluster(&self, node: Node<'_, '_>) -> Result<TermCluster, OntologyError> {
        let name = self.required(node, "name")?.to_string();
        let mut terms = Vec::new();
        for child in elements(node) {
            if child.tag_name().name() != "term" {
                return Err(self.error(child, format!("unexpected <{}> in cluster", child.tag_name().name())));
            }
            let phrase = node_text(child).trim().to_string();
            if !phrase.chars().any(char::is_alphabetic) {
                return Err(self.error(child, format!("search term {phrase:?} in {name} has no letters")));
            }
            terms.push(SearchTerm {
                phrase,
                notes: child.attribute("notes").unwrap_or("").to_string(),
            });
        }
        if terms.is_empty() {
            return Err(self.error(node, format!("cluster {name} has no terms")));
        }
        Ok(TermCluster { name, terms })
    }

    fn attribute(&self, node: Node<'_, '_>) -> Result<Attribute, OntologyError> {
        let name = self.required(node, "name")?.to_string();
        let kind = match self.required(node, "kind")? {
            "textmining" => self.text_mining(node)?,
            "temporal" => self.temporal(node)?,
            "compound" => {
                let children: Vec<_> = elements(node).collect();
                if children.len() != 1 {
                    return Err(self.error(node, format!("compound {name} needs exactly one expression")));
                }
                AttributeKind::Compound(self.expr(children[0], 1)?)
            }
            other => return Err(self.error(node, format!("unknown attribute kind {other:?}"))),
        };
        Ok(Attribute { name, kind })
    }

    fn text_mining(&self, node: Node<'_, '_>) -> Result<AttributeKind, OntologyError> {
        let mut cluster = None;
        let mut sections: BTreeSet<Section> = BTreeSet::new();
        for child in elements(node) {
            match child.tag_name().name() {
                "clusterRef" => cluster = Some(self.required(child, "name")?.to_string()),
                "sections" => {
                    let text = child.attribute("names").map(str::to_string).unwrap_or_else(|| node_text(child));
                    sections = Section::parse_list(&text).map_err(|e| self.error(child, e.to_string()))?;
                }
                other => return Err(self.error(child, format!("unexpected <{other}> in textmining attribute"))),
            }
        }
        let cluster = cluster.ok_or_else(|| self.error(node, "textmining attribute lacks <clusterRef>".into()))?;
        if sections.is_empty() {
            sections = Section::ALL.into_iter().collect();
        }
        Ok(AttributeKind::TextMining { cluster, sections })
    }

    fn temporal(&self, node: Node<'_, '_>) -> Result<AttributeKind, OntologyError> {
        let children: Vec<_> = elements(node).collect();
        let [child] = children.as_slice() else {
            return Err(self.error(node, "temporal attribute needs one <window> or <periodic>".into()));
        };
        let pred = match child.tag_name().name() {
            "window" => {
                let from = self.timestamp(*child, "from")?;
                let to = self.timestamp(*child, "to")?;
                if let (Some(f), Some(t)) = (from, to) {
                    if f >= t {
                        return Err(self.error(*child, "window is empty".into()));
                    }
                }
                TemporalPredicate::Window { from, to }
            }
            "periodic" => {
                let weekdays = child.attribute("weekdays").map(|w| self.weekdays(*child, w)).transpose()?;
                let hours = child.attribute("hours").map(|h| self.hours(*child, h)).transpose()?;
                if weekdays.is_none() && hours.is_none() {
                    return Err(self.error(*child, "<periodic> needs weekdays or hours".into()));
                }
                TemporalPredicate::Periodic { weekdays, hours }
            }
            other => return Err(self.error(*child, format!("unexpected <{other}> in temporal attribute"))),
        };
        Ok(AttributeKind::Temporal(pred))
    }

    fn weekdays(&self, node: Node<'_, '_>, text: &str) -> Result<BTreeSet<u32>, OntologyError> {
        const NAMES: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];
        text.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                let s = s.to_lowercase();
                NAMES
                    .iter()
                    .position(|n| s.starts_with(n))
                    .map(|i| i as u32)
                    .ok_or_else(|| self.error(node, format!("unknown weekday {s:?}")))
            })
            .collect()
    }

    fn hours(&self, node: Node<'_, '_>, text: &str) -> Result<HourRange, OntologyError> {
        let bad = || self.error(node, format!("hours must look like 22-6, got {text:?}"));
        let (a, b) = text.split_once('-').ok_or_else(bad)?;
        let start: u32 = a.trim().parse().map_err(|_| bad())?;
        let end: u32 = b.trim().parse().map_err(|_| bad())?;
        if start > 23 || end > 24 || start == end {
            return Err(bad());
        }
        Ok(HourRange { start, end })
    }

    fn expr(&self, node: Node<'_, '_>, depth: usize) -> Result<Expr, OntologyError> {
        if depth > super::MAX_COMPOUND_DEPTH {
            return Err(self.error(node, format!("expression nests deeper than {}", super::MAX_COMPOUND_DEPTH)));
        }
        let children: Vec<_> = elements(node).collect();
        match node.tag_name().name() {
            "ref" => Ok(Expr::Ref(self.required(node, "name")?.to_string())),
            "not" => match children.as_slice() {
                [only] => Ok(Expr::not(self.expr(*only, depth + 1)?)),
                _ => Err(self.error(node, "<not> takes exactly one operand".into())),
            },
            tag @ ("and" | "or") => {
                if children.is_empty() {
                    return Err(self.error(node, format!("<{tag}> needs operands")));
                }
                let ops = children
                    .iter()
                    .map(|c| self.expr(*c, depth + 1))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(if tag == "and" { Expr::And(ops) } else { Expr::Or(ops) })
            }
            other => Err(self.error(node, format!("unexpected <{other}> in expression"))),
        }
    }

    fn object_cluster(&self, node: Node<'_, '_>) -> Result<ObjectClusterRule, OntologyError> {
        let name = self.required(node, "name")?.to_string();
        let raw = self.required(node, "key")?;
        let key = ClusterKey::parse(raw)
            .ok_or_else(|| self.error(node, format!("key must be field:<name> or timestamp:<unit>, got {raw:?}")))?;
        let missing = match node.attribute("missing").unwrap_or("skip") {
            "skip" => MissingKeyPolicy::Skip,
            "own-group" => MissingKeyPolicy::OwnGroup,
            "error" => MissingKeyPolicy::Error,
            other => return Err(self.error(node, format!("unknown missing-key policy {other:?}"))),
        };
        Ok(ObjectClusterRule { name, key, missing })
    }

    fn segmentation(&self, node: Node<'_, '_>) -> Result<SegmentationRule, OntologyError> {
        let name = self.required(node, "name")?.to_string();
        let children: Vec<_> = elements(node).collect();
        let form = if !children.is_empty() && children.iter().all(|c| c.tag_name().name() == "interval") {
            let mut intervals = Vec::new();
            for c in children {
                let (Some(from), Some(to)) = (self.timestamp(c, "from")?, self.timestamp(c, "to")?) else {
                    return Err(self.error(c, "<interval> needs from and to".into()));
                };
                let label = c
                    .attribute("label")
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("{}..{}", format_timestamp(&from), format_timestamp(&to)));
                intervals.push(SegmentInterval { label, from, to });
            }
            SegmentationForm::Intervals(intervals)
        } else if let [only] = children.as_slice() {
            SegmentationForm::Predicate(self.expr(*only, 1)?)
        } else {
            return Err(self.error(node, format!("segmentation {name} needs intervals or one predicate")));
        };
        Ok(SegmentationRule { name, form })
    }
}
