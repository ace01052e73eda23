use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::{CorpusError, Language};
use crate::time::{format_timestamp, parse_timestamp};
use crate::xml::{escape_attr, escape_text, node_text, position};

/// Canonical document sections, in document order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Title,
    Authors,
    Abstract,
    Keywords,
    Body,
}

impl Section {
    pub const ALL: [Section; 5] = [
        Section::Title,
        Section::Authors,
        Section::Abstract,
        Section::Keywords,
        Section::Body,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Section::Title => "title",
            Section::Authors => "authors",
            Section::Abstract => "abstract",
            Section::Keywords => "keywords",
            Section::Body => "body",
        }
    }

    /// Parses a whitespace- or comma-separated list of section names.
    pub fn parse_list(text: &str) -> Result<BTreeSet<Section>, CorpusError> {
        text.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(Section::from_str)
            .collect()
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Section {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Section::ALL
            .into_iter()
            .find(|sec| sec.as_str() == s)
            .ok_or_else(|| CorpusError::UnknownSection(s.to_string()))
    }
}

/// One timestamped report, article or activity record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    /// Every canonical section is present; missing ones hold an empty string.
    pub sections: BTreeMap<Section, String>,
    pub timestamp: Option<DateTime<Utc>>,
    pub structured_fields: BTreeMap<String, String>,
    pub source_url: String,
}

impl Document {
    pub fn new(id: impl Into<String>, source_url: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            sections: Section::ALL.iter().map(|&s| (s, String::new())).collect(),
            timestamp: None,
            structured_fields: BTreeMap::new(),
            source_url: source_url.into(),
        }
    }

    pub fn with_section(mut self, section: Section, text: impl Into<String>) -> Self {
        self.sections.insert(section, text.into());
        self
    }

    pub fn with_timestamp(mut self, t: DateTime<Utc>) -> Self {
        self.timestamp = Some(t);
        self
    }

    pub fn with_field(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.structured_fields.insert(name.into(), value.into());
        self
    }

    pub fn title(&self) -> &str {
        self.section(Section::Title)
    }

    pub fn section(&self, section: Section) -> &str {
        self.sections.get(&section).map(String::as_str).unwrap_or("")
    }

    pub fn field(&self, name: &str) -> Option<&str> {
        self.structured_fields.get(name).map(String::as_str)
    }
}

/// Newline-joined text of the requested sections, in document order.
/// Empty sections contribute nothing.
pub fn select_sections(doc: &Document, names: &BTreeSet<Section>) -> String {
    Section::ALL
        .iter()
        .filter(|s| names.contains(s))
        .map(|&s| doc.section(s))
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Same as [`select_sections`] for section names given as strings.
pub fn select_sections_by_name<S: AsRef<str>>(doc: &Document, names: &[S]) -> Result<String, CorpusError> {
    let set = names
        .iter()
        .map(|n| Section::from_str(n.as_ref()))
        .collect::<Result<BTreeSet<_>, _>>()?;
    Ok(select_sections(doc, &set))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub ingested_at: DateTime<Utc>,
}

/// An ordered, id-unique collection of documents in one language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    documents: Vec<Document>,
    language: Language,
    provenance: Provenance,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, language: Language, provenance: Provenance) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
            if doc.source_url.trim().is_empty() {
                return Err(CorpusError::MissingUrl(doc.id.clone()));
            }
        }
        Ok(Corpus {
            documents,
            language,
            provenance,
        })
    }

    /// Parses corpus XML. `ingested_at` bounds acceptable timestamps: nothing
    /// may lie more than 24 hours past it.
    pub fn from_xml(xml: &str, source: &str, ingested_at: DateTime<Utc>) -> Result<Self, CorpusError> {
        let tree = roxmltree::Document::parse(xml).map_err(|e| {
            let pos = e.pos();
            CorpusError::Xml {
                line: pos.row,
                column: pos.col,
                message: e.to_string(),
            }
        })?;
        let root = tree.root_element();
        if root.tag_name().name() != "corpus" {
            return Err(CorpusError::Schema(format!(
                "root element is <{}>, expected <corpus>",
                root.tag_name().name()
            )));
        }
        let language = match root.attribute("language") {
            Some(code) => Language::from_str(code)?,
            None => return Err(CorpusError::Schema("<corpus> lacks a language attribute".into())),
        };
        let horizon = ingested_at + Duration::hours(24);

        let mut documents = Vec::new();
        for node in root.children().filter(|n| n.is_element()) {
            if node.tag_name().name() != "document" {
                let (line, column) = position(&tree, node);
                return Err(CorpusError::Schema(format!(
                    "unexpected <{}> at line {line}, column {column}",
                    node.tag_name().name()
                )));
            }
            documents.push(parse_document(&tree, node, horizon)?);
        }
        Corpus::new(
            documents,
            language,
            Provenance {
                source: source.to_string(),
                ingested_at,
            },
        )
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Whether every document carries a timestamp, i.e. the corpus is usable
    /// for temporal analysis.
    pub fn is_temporal(&self) -> bool {
        self.documents.iter().all(|d| d.timestamp.is_some())
    }

    /// A corpus over a subset of these documents, keeping language and
    /// provenance.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Corpus {
        let wanted: HashSet<&str> = ids.into_iter().collect();
        Corpus {
            documents: self
                .documents
                .iter()
                .filter(|d| wanted.contains(d.id.as_str()))
                .cloned()
                .collect(),
            language: self.language,
            provenance: self.provenance.clone(),
        }
    }

    pub fn to_xml(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        out.push_str(&format!("<corpus language=\"{}\">\n", self.language.code()));
        for doc in &self.documents {
            out.push_str(&document_xml(doc, "  "));
        }
        out.push_str("</corpus>\n");
        out
    }
}

pub(crate) fn document_xml(doc: &Document, indent: &str) -> String {
    let mut out = format!("{indent}<document id=\"{}\"", escape_attr(&doc.id));
    if let Some(t) = &doc.timestamp {
        out.push_str(&format!(" timestamp=\"{}\"", format_timestamp(t)));
    }
    out.push_str(&format!(" url=\"{}\">\n", escape_attr(&doc.source_url)));
    for section in Section::ALL {
        let text = doc.section(section);
        if !text.is_empty() {
            out.push_str(&format!("{indent}  <{section}>{}</{section}>\n", escape_text(text)));
        }
    }
    for (name, value) in &doc.structured_fields {
        out.push_str(&format!(
            "{indent}  <field name=\"{}\">{}</field>\n",
            escape_attr(name),
            escape_text(value)
        ));
    }
    out.push_str(&format!("{indent}</document>\n"));
    out
}

fn parse_document(
    tree: &roxmltree::Document<'_>,
    node: roxmltree::Node<'_, '_>,
    horizon: DateTime<Utc>,
) -> Result<Document, CorpusError> {
    let (line, column) = position(tree, node);
    let id = node
        .attribute("id")
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| CorpusError::Schema(format!("<document> at line {line}, column {column} lacks an id")))?;
    let url = node.attribute("url").map(str::trim).unwrap_or("");
    if url.is_empty() {
        return Err(CorpusError::MissingUrl(id.to_string()));
    }
    let mut doc = Document::new(id, url);
    if let Some(raw) = node.attribute("timestamp") {
        let t = parse_timestamp(raw).ok_or_else(|| CorpusError::BadTimestamp {
            id: id.to_string(),
            value: raw.to_string(),
        })?;
        if t > horizon {
            return Err(CorpusError::FutureTimestamp {
                id: id.to_string(),
                value: raw.to_string(),
            });
        }
        doc.timestamp = Some(t);
    }

    for child in node.children().filter(|n| n.is_element()) {
        let tag = child.tag_name().name();
        let text = node_text(child).trim().to_string();
        let (name, value) = match Section::from_str(tag) {
            Ok(section) => {
                doc.sections.insert(section, text);
                continue;
            }
            Err(_) if tag == "field" => match child.attribute("name") {
                Some(name) => (name.to_string(), text),
                None => {
                    let (line, column) = position(tree, child);
                    return Err(CorpusError::Schema(format!(
                        "<field> without name at line {line}, column {column}"
                    )));
                }
            },
            Err(_) => (tag.to_string(), text),
        };
        if doc.structured_fields.insert(name.clone(), value).is_some() {
            return Err(CorpusError::DuplicateField { id: id.to_string(), name });
        }
    }
    Ok(doc)
}

/// Reads a corpus file, checking its declared language against `language`.
pub fn load_documents(path: impl AsRef<Path>, language: Language) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let xml = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let corpus = Corpus::from_xml(&xml, &path.display().to_string(), Utc::now())?;
    if corpus.language() != language {
        return Err(CorpusError::LanguageMismatch {
            declared: corpus.language(),
            requested: language,
        });
    }
    Ok(corpus)
}
