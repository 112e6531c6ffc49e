//! Game-specific knowledge graphs: triples, ontologies, validation, subgraph
//! queries and the on-disk format.

mod graph;
mod ontology;
pub mod store;
mod triple;

use thiserror::Error;

pub use graph::{validate_triple, Depth, EntityIndex, IndexedEntity, InsertOutcome, KnowledgeGraph, ValidationError};
pub use ontology::{Ontology, Range, Relation, LITERAL};
pub use store::{load, load_with_ontology, persist};
pub use triple::{parse_triple, serialize_triple, Provenance, ProvenanceKind, Triple, TripleKey};

#[derive(Debug, Error)]
pub enum KgError {
    #[error("malformed triple {line:?}: {reason}")]
    MalformedTriple { line: String, reason: &'static str },
    #[error("triple {field} is empty")]
    EmptyField { field: &'static str },
    #[error("triple {field} {reason}")]
    InvalidField { field: &'static str, reason: &'static str },
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("entity {0} is not in the entity index")]
    UnknownEntity(String),
    #[error("subgraph depth must be 1 or 2, got {0}")]
    InvalidDepth(u8),
    #[error("ontology: {0}")]
    Ontology(String),
    #[error("ontology line {line}: {reason}")]
    OntologyParse { line: usize, reason: String },
    #[error("corrupt knowledge graph file at line {line}: {reason}")]
    CorruptFile { line: usize, reason: String },
    #[error("ontology mismatch: expected {expected}, file was written with {found}")]
    OntologyMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
