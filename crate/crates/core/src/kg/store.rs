//! On-disk knowledge-graph format.
//!
//! A header of `@` directives (game, embedded ontology, entity index) followed
//! by one serialized triple per line. Each triple line carries its provenance
//! as a trailing `\t# {json}` comment.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use super::graph::KnowledgeGraph;
use super::ontology::Ontology;
use super::triple::{parse_triple, Provenance};
use super::KgError;

const MAGIC: &str = "# kgdf knowledge graph";
const FORMAT: &str = "1";
const PROVENANCE_MARK: &str = "\t# ";

pub fn to_text(kg: &KnowledgeGraph) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("@format {FORMAT}\n@game {}\n", kg.game()));
    out.push_str(&format!("@ontology-fingerprint {}\n", kg.ontology().fingerprint()));
    for line in kg.ontology().to_text().lines() {
        out.push_str(&format!("@ontology {line}\n"));
    }
    for e in kg.index().iter() {
        out.push_str(&format!("@entity {} : {}\n", e.id, e.concept));
    }
    for t in kg.triples() {
        let provenance = serde_json::to_string(t.provenance()).expect("provenance serializes");
        out.push_str(&format!("{t}{PROVENANCE_MARK}{provenance}\n"));
    }
    out
}

pub fn persist(kg: &KnowledgeGraph, path: impl AsRef<Path>) -> Result<(), KgError> {
    fs::write(path, to_text(kg))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<KnowledgeGraph, KgError> {
    from_text(&fs::read_to_string(path)?, None)
}

/// Loads a graph and checks that it was written under `expected`.
pub fn load_with_ontology(path: impl AsRef<Path>, expected: &Ontology) -> Result<KnowledgeGraph, KgError> {
    from_text(&fs::read_to_string(path)?, Some(expected))
}

pub fn from_text(text: &str, expected: Option<&Ontology>) -> Result<KnowledgeGraph, KgError> {
    let corrupt = |line: usize, reason: String| KgError::CorruptFile { line, reason };
    let mut lines = text.lines().enumerate().peekable();
    match lines.next() {
        Some((_, first)) if first.trim() == MAGIC => {}
        _ => return Err(corrupt(1, "missing knowledge graph header".into())),
    }

    let mut game = None;
    let mut fingerprint = None;
    let mut ontology_text = String::new();
    let mut entities = Vec::new();
    while let Some((idx, line)) = lines.peek().copied() {
        let Some(directive) = line.strip_prefix('@') else { break };
        lines.next();
        let (key, value) = directive.split_once(' ').unwrap_or((directive, ""));
        match key {
            "format" if value == FORMAT => {}
            "format" => return Err(corrupt(idx + 1, format!("unsupported format {value}"))),
            "game" => game = Some(value.to_string()),
            "ontology-fingerprint" => fingerprint = Some(value.to_string()),
            "ontology" => {
                ontology_text.push_str(value);
                ontology_text.push('\n');
            }
            "entity" => {
                let (id, concept) = value
                    .rsplit_once(" : ")
                    .ok_or_else(|| corrupt(idx + 1, "expected `@entity <id> : <concept>`".into()))?;
                entities.push((idx + 1, id.to_string(), concept.to_string()));
            }
            other => return Err(corrupt(idx + 1, format!("unknown directive @{other}"))),
        }
    }

    let ontology = Ontology::parse(&ontology_text).map_err(|e| corrupt(0, format!("embedded ontology: {e}")))?;
    if fingerprint.as_deref() != Some(ontology.fingerprint().as_str()) {
        return Err(corrupt(0, "embedded ontology does not match its fingerprint".into()));
    }
    if let Some(expected) = expected {
        if expected.fingerprint() != ontology.fingerprint() {
            return Err(KgError::OntologyMismatch {
                expected: format!("{}@{} ({})", expected.game(), expected.version(), expected.fingerprint()),
                found: format!("{}@{} ({})", ontology.game(), ontology.version(), ontology.fingerprint()),
            });
        }
    }
    if game.as_deref() != Some(ontology.game()) {
        return Err(corrupt(0, "game id does not match the embedded ontology".into()));
    }

    let mut kg = KnowledgeGraph::new(Arc::new(ontology));
    for (line, id, concept) in entities {
        if !kg.ontology().has_concept(&concept) {
            return Err(corrupt(line, format!("undeclared concept {concept}")));
        }
        kg.index_mut().insert(&id, &concept);
    }
    for (idx, line) in lines {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (triple_text, provenance) = match line.find(PROVENANCE_MARK) {
            Some(pos) => {
                let json = &line[pos + PROVENANCE_MARK.len()..];
                let provenance: Provenance = serde_json::from_str(json)
                    .map_err(|e| corrupt(idx + 1, format!("bad provenance: {e}")))?;
                (&line[..pos], provenance)
            }
            None => (line, Provenance::manual()),
        };
        let mut triple = parse_triple(triple_text).map_err(|e| corrupt(idx + 1, e.to_string()))?;
        triple.set_provenance(provenance);
        kg.insert_raw(triple).map_err(|e| corrupt(idx + 1, e.to_string()))?;
    }

    let referenced = |id: &str| {
        let id = id.to_lowercase();
        kg.triples().any(|t| t.subject().to_lowercase() == id || t.object().to_lowercase() == id)
    };
    if let Some(orphan) = kg.index().iter().find(|e| !referenced(&e.id)) {
        return Err(corrupt(0, format!("indexed entity {} appears in no triple", orphan.id)));
    }
    Ok(kg)
}
