//! Document ingestion, language analysis and the positional inverted index.

mod analysis;
mod document;
mod index;

pub use analysis::{analyze, analyze_with, Analyzer, Language, ANALYZER_VERSION};
pub(crate) use document::document_xml;
pub use document::{load_documents, select_sections, select_sections_by_name, Corpus, Document, Provenance, Section};
pub use index::{build_index, match_phrase, InvertedIndex, Posting, INDEX_FORMAT_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("malformed XML at line {line}, column {column}: {message}")]
    Xml { line: u32, column: u32, message: String },
    #[error("corpus schema: {0}")]
    Schema(String),
    #[error("duplicate document id: {0}")]
    DuplicateId(String),
    #[error("document {0} has no url")]
    MissingUrl(String),
    #[error("document {id}: duplicate structured field {name}")]
    DuplicateField { id: String, name: String },
    #[error("document {id}: unparseable timestamp {value:?}")]
    BadTimestamp { id: String, value: String },
    #[error("document {id}: timestamp {value} is more than 24h after ingestion")]
    FutureTimestamp { id: String, value: String },
    #[error("unsupported language: {0}")]
    UnsupportedLanguage(String),
    #[error("corpus declares language {declared} but {requested} was requested")]
    LanguageMismatch { declared: Language, requested: Language },
    #[error("unknown section name: {0}")]
    UnknownSection(String),
    #[error("phrase {0:?} is empty after analysis")]
    EmptyPhrase(String),
    #[error("index: {0}")]
    IndexFormat(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
