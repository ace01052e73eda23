//! Concept discovery over timestamped, semi-structured text.
//!
//! The crate is organised along the analysis pipeline:
//!
//! * [`corpus`] ingests XML documents, runs language analyzers and keeps an
//!   inverted index for phrase matching.
//! * [`ontology`] holds the layered thesaurus (search terms grouped into term
//!   clusters) and the text-mining, temporal and compound attributes, plus
//!   object-cluster and segmentation rules.
//! * [`context`] evaluates attributes into a formal context (the cross table).
//! * [`fca`] enumerates formal concepts and builds the labelled lattice.
//! * [`tca`] derives conceptual time systems and life tracks over a lattice.
//! * [`esom`] trains emergent self-organizing maps and computes U-matrices.
//! * [`hmm`] covers discrete hidden Markov models and process discovery.
//! * [`service`] orchestrates the four design-loop phases in sessions and
//!   exposes them over HTTP.

#![allow(clippy::result_large_err)]

pub mod bits;
pub mod context;
pub mod corpus;
pub mod esom;
pub mod fca;
pub mod hmm;
pub mod ontology;
pub mod service;
pub mod tca;
pub mod time;
mod xml;

pub use bits::BitSet;
pub use context::{AttributeClustering, ClusterMode, ContextObject, FormalContext};
pub use corpus::{Corpus, Document, InvertedIndex, Language, Section};
pub use service::{Profile, Session, Workbench};
pub use time::Granularity;
pub use fca::{ConceptLattice, FormalConcept};
pub use ontology::Ontology;
