use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Analyzer, Corpus, CorpusError, Document, Language, Section};

pub const INDEX_FORMAT_VERSION: u32 = 1;

/// One `(document, section)` entry of a term's posting list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting<'a> {
    pub document: &'a str,
    pub section: Section,
    pub count: usize,
}

/// Positional inverted index over analyzed tokens.
///
/// Positions count analyzed tokens (after stop-word removal), so phrase
/// adjacency is adjacency in the analyzed stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvertedIndex {
    format_version: u32,
    analyzer_id: String,
    language: Language,
    sections: BTreeSet<Section>,
    /// term -> document -> section -> token positions
    postings: BTreeMap<String, BTreeMap<String, BTreeMap<Section, Vec<u32>>>>,
    /// document -> section -> analyzed token count
    lengths: BTreeMap<String, BTreeMap<Section, u32>>,
}

impl InvertedIndex {
    pub fn build(corpus: &Corpus, sections: &BTreeSet<Section>) -> Self {
        Self::build_documents(corpus.documents(), corpus.language(), sections)
    }

    /// Indexes an arbitrary document list, e.g. composite objects.
    pub fn build_documents(documents: &[Document], language: Language, sections: &BTreeSet<Section>) -> Self {
        let analyzer = Analyzer::new(language);
        let mut postings: BTreeMap<String, BTreeMap<String, BTreeMap<Section, Vec<u32>>>> = BTreeMap::new();
        let mut lengths = BTreeMap::new();
        for doc in documents {
            let mut per_section = BTreeMap::new();
            for &section in sections {
                let tokens = analyzer.analyze(doc.section(section));
                per_section.insert(section, tokens.len() as u32);
                for (pos, token) in tokens.into_iter().enumerate() {
                    postings
                        .entry(token)
                        .or_default()
                        .entry(doc.id.clone())
                        .or_default()
                        .entry(section)
                        .or_default()
                        .push(pos as u32);
                }
            }
            lengths.insert(doc.id.clone(), per_section);
        }
        InvertedIndex {
            format_version: INDEX_FORMAT_VERSION,
            analyzer_id: analyzer.id(),
            language,
            sections: sections.clone(),
            postings,
            lengths,
        }
    }

    pub fn analyzer_id(&self) -> &str {
        &self.analyzer_id
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn sections(&self) -> &BTreeSet<Section> {
        &self.sections
    }

    pub fn analyzer(&self) -> Analyzer {
        Analyzer::new(self.language)
    }

    /// Whether the index was built by the analyzer this build ships.
    pub fn is_current(&self) -> bool {
        self.format_version == INDEX_FORMAT_VERSION && self.analyzer_id == Analyzer::new(self.language).id()
    }

    pub fn contains_document(&self, id: &str) -> bool {
        self.lengths.contains_key(id)
    }

    pub fn document_ids(&self) -> impl Iterator<Item = &str> {
        self.lengths.keys().map(String::as_str)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    /// Analyzed token count of one document section.
    pub fn section_length(&self, id: &str, section: Section) -> Option<usize> {
        self.lengths.get(id)?.get(&section).map(|&n| n as usize)
    }

    pub fn postings(&self, term: &str) -> Vec<Posting<'_>> {
        let Some(docs) = self.postings.get(term) else {
            return Vec::new();
        };
        docs.iter()
            .flat_map(|(doc, secs)| {
                secs.iter().map(move |(&section, positions)| Posting {
                    document: doc.as_str(),
                    section,
                    count: positions.len(),
                })
            })
            .collect()
    }

    fn positions(&self, term: &str, doc: &str, section: Section) -> Option<&[u32]> {
        self.postings.get(term)?.get(doc)?.get(&section).map(Vec::as_slice)
    }

    /// Analyzes `phrase` with the index's analyzer; empty results are a query error.
    pub fn analyze_phrase(&self, phrase: &str) -> Result<Vec<String>, CorpusError> {
        let tokens = self.analyzer().analyze(phrase);
        if tokens.is_empty() {
            return Err(CorpusError::EmptyPhrase(phrase.to_string()));
        }
        Ok(tokens)
    }

    /// Number of contiguous occurrences of `tokens` in one section.
    fn occurrences_in(&self, tokens: &[String], doc: &str, section: Section) -> usize {
        let Some(first) = self.positions(&tokens[0], doc, section) else {
            return 0;
        };
        let rest: Option<Vec<&[u32]>> = tokens[1..]
            .iter()
            .map(|t| self.positions(t, doc, section))
            .collect();
        let Some(rest) = rest else {
            return 0;
        };
        first
            .iter()
            .filter(|&&start| {
                rest.iter()
                    .enumerate()
                    .all(|(i, positions)| positions.binary_search(&(start + i as u32 + 1)).is_ok())
            })
            .count()
    }

    /// Occurrences of already analyzed phrase tokens in `doc`, restricted to
    /// `sections` (all indexed sections when `None`).
    pub fn phrase_count(&self, tokens: &[String], doc: &str, sections: Option<&BTreeSet<Section>>) -> usize {
        if tokens.is_empty() {
            return 0;
        }
        self.sections
            .iter()
            .filter(|s| sections.is_none_or(|wanted| wanted.contains(s)))
            .map(|&s| self.occurrences_in(tokens, doc, s))
            .sum()
    }

    pub fn phrase_in_document(&self, tokens: &[String], doc: &str, sections: Option<&BTreeSet<Section>>) -> bool {
        self.phrase_count(tokens, doc, sections) > 0
    }

    /// Ids of documents containing the analyzed phrase as a contiguous token
    /// sequence within one indexed section.
    pub fn match_phrase(&self, phrase: &str) -> Result<BTreeSet<String>, CorpusError> {
        let tokens = self.analyze_phrase(phrase)?;
        let Some(candidates) = self.postings.get(&tokens[0]) else {
            return Ok(BTreeSet::new());
        };
        Ok(candidates
            .keys()
            .filter(|doc| self.phrase_in_document(&tokens, doc, None))
            .cloned()
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("index serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, CorpusError> {
        let index: InvertedIndex =
            serde_json::from_str(json).map_err(|e| CorpusError::IndexFormat(e.to_string()))?;
        if index.format_version != INDEX_FORMAT_VERSION {
            return Err(CorpusError::IndexFormat(format!(
                "unsupported index format version {}",
                index.format_version
            )));
        }
        Ok(index)
    }
}

/// Builds an index over the given sections of every document.
pub fn build_index(corpus: &Corpus, sections: &BTreeSet<Section>) -> InvertedIndex {
    InvertedIndex::build(corpus, sections)
}

/// Free-function form of [`InvertedIndex::match_phrase`].
pub fn match_phrase(index: &InvertedIndex, phrase: &str) -> Result<BTreeSet<String>, CorpusError> {
    index.match_phrase(phrase)
}
