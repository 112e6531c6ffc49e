use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

use super::ontology::{Ontology, Range};
use super::triple::{Triple, TripleKey};
use super::KgError;

/// Why a triple does not fit the ontology.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("relation {relation} is not declared in the ontology")]
    UnknownRelation { relation: String },
    #[error("{entity} is a {found} but {relation} expects a {expected} subject")]
    DomainMismatch { entity: String, relation: String, expected: String, found: String },
    #[error("{entity} is a {found} but {relation} expects a {expected} object")]
    RangeMismatch { entity: String, relation: String, expected: String, found: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedEntity {
    pub id: String,
    pub concept: String,
}

/// Entity id to concept, looked up case-insensitively.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityIndex {
    entries: BTreeMap<String, IndexedEntity>,
}

impl EntityIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn concept_of(&self, entity: &str) -> Option<&str> {
        self.entries.get(&entity.to_lowercase()).map(|e| e.concept.as_str())
    }

    pub fn contains(&self, entity: &str) -> bool {
        self.entries.contains_key(&entity.to_lowercase())
    }

    /// Registers `entity` unless it is already indexed. Returns whether it was added.
    pub fn insert(&mut self, entity: &str, concept: &str) -> bool {
        let key = entity.to_lowercase();
        if self.entries.contains_key(&key) {
            return false;
        }
        self.entries.insert(key, IndexedEntity { id: entity.to_string(), concept: concept.to_string() });
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = &IndexedEntity> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Checks a triple against the ontology and the current entity typing.
pub fn validate_triple(t: &Triple, ontology: &Ontology, index: &EntityIndex) -> Result<(), ValidationError> {
    let relation = ontology
        .relation(t.predicate())
        .ok_or_else(|| ValidationError::UnknownRelation { relation: t.predicate().to_string() })?;
    if let Some(found) = index.concept_of(t.subject()) {
        if found != relation.domain {
            return Err(ValidationError::DomainMismatch {
                entity: t.subject().to_string(),
                relation: relation.name.clone(),
                expected: relation.domain.clone(),
                found: found.to_string(),
            });
        }
    }
    if let Range::Concept(expected) = &relation.range {
        if let Some(found) = index.concept_of(t.object()) {
            if found != expected {
                return Err(ValidationError::RangeMismatch {
                    entity: t.object().to_string(),
                    relation: relation.name.clone(),
                    expected: expected.clone(),
                    found: found.to_string(),
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Depth {
    One,
    Two,
}

impl TryFrom<u8> for Depth {
    type Error = KgError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            1 => Ok(Depth::One),
            2 => Ok(Depth::Two),
            other => Err(KgError::InvalidDepth(other)),
        }
    }
}

/// A validated, deduplicated set of triples for one game.
///
/// Subjects are typed by the domain of the first relation they appear under and
/// concept-ranged objects by the relation's range, so every indexed entity is
/// backed by at least one triple.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    game: String,
    ontology: Arc<Ontology>,
    triples: IndexMap<TripleKey, Triple>,
    index: EntityIndex,
}

impl KnowledgeGraph {
    pub fn new(ontology: Arc<Ontology>) -> Self {
        Self {
            game: ontology.game().to_string(),
            ontology,
            triples: IndexMap::new(),
            index: EntityIndex::new(),
        }
    }

    pub fn game(&self) -> &str {
        &self.game
    }

    pub fn ontology(&self) -> &Arc<Ontology> {
        &self.ontology
    }

    pub fn index(&self) -> &EntityIndex {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Triples in insertion order.
    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.values()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains_key(&t.key())
    }

    pub fn validate(&self, t: &Triple) -> Result<(), ValidationError> {
        validate_triple(t, &self.ontology, &self.index)
    }

    pub fn insert(&mut self, t: Triple) -> Result<InsertOutcome, KgError> {
        self.validate(&t)?;
        let key = t.key();
        if self.triples.contains_key(&key) {
            return Ok(InsertOutcome::Duplicate);
        }
        let relation = self.ontology.relation(t.predicate()).expect("validated");
        self.index.insert(t.subject(), &relation.domain);
        if let Range::Concept(concept) = &relation.range {
            self.index.insert(t.object(), concept);
        }
        self.triples.insert(key, t);
        Ok(InsertOutcome::Inserted)
    }

    /// Inserts without typing checks. Used when restoring a persisted graph,
    /// where the index is restored separately.
    pub(crate) fn insert_raw(&mut self, t: Triple) -> Result<(), ValidationError> {
        if self.ontology.relation(t.predicate()).is_none() {
            return Err(ValidationError::UnknownRelation { relation: t.predicate().to_string() });
        }
        self.triples.entry(t.key()).or_insert(t);
        Ok(())
    }

    pub(crate) fn index_mut(&mut self) -> &mut EntityIndex {
        &mut self.index
    }

    /// Triples describing `entity`, sorted by (predicate, object).
    ///
    /// Depth one is the triples with `entity` as subject; depth two adds the
    /// triples of every indexed entity reached as a depth-one object.
    pub fn subgraph(&self, entity: &str, depth: Depth) -> Result<Vec<Triple>, KgError> {
        if !self.index.contains(entity) {
            return Err(KgError::UnknownEntity(entity.to_string()));
        }
        let root = entity.to_lowercase();
        let mut subjects: HashSet<String> = HashSet::from([root.clone()]);
        if depth == Depth::Two {
            for t in self.triples.values() {
                if t.subject().to_lowercase() == root && self.index.contains(t.object()) {
                    subjects.insert(t.object().to_lowercase());
                }
            }
        }
        let mut out: Vec<Triple> = self
            .triples
            .values()
            .filter(|t| subjects.contains(&t.subject().to_lowercase()))
            .cloned()
            .collect();
        out.sort_by(|a, b| {
            (a.predicate().to_lowercase(), a.object()).cmp(&(b.predicate().to_lowercase(), b.object()))
        });
        Ok(out)
    }

    /// Same triple set, ontology and index.
    pub fn graph_eq(&self, other: &KnowledgeGraph) -> bool {
        let keys = |g: &KnowledgeGraph| g.triples.keys().cloned().collect::<HashSet<_>>();
        self.game == other.game
            && self.ontology.fingerprint() == other.ontology.fingerprint()
            && self.index == other.index
            && keys(self) == keys(other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::parse_triple;

    fn pokemon() -> Arc<Ontology> {
        Arc::new(
            Ontology::parse(
                "game pokemon\nconcept Character\nconcept Pokemon\n\
                 relation has_gender : Character -> literal\n\
                 relation has_outfit : Character -> literal\n\
                 relation has_height : Character -> literal\n\
                 relation has_pokemon : Character -> Pokemon\n\
                 relation has_type : Pokemon -> literal\n\
                 relation evolves_to : Pokemon -> Pokemon\n",
            )
            .unwrap(),
        )
    }

    fn sabrina() -> KnowledgeGraph {
        let mut kg = KnowledgeGraph::new(pokemon());
        for line in [
            "(Sabrina, has_gender, female)",
            "(Sabrina, has_outfit, a small red and dress black in the middle at the waist)",
            "(Sabrina, has_height, slim young woman)",
            "(Sabrina, has_pokemon, Mr. Mime)",
        ] {
            kg.insert(parse_triple(line).unwrap()).unwrap();
        }
        kg
    }

    #[test]
    fn sabrina_subgraph_depth_one() {
        let kg = sabrina();
        let sub = kg.subgraph("Sabrina", Depth::One).unwrap();
        let preds: Vec<_> = sub.iter().map(|t| t.predicate()).collect();
        assert_eq!(preds, ["has_gender", "has_height", "has_outfit", "has_pokemon"]);
        assert_eq!(kg.index().concept_of("mr. mime"), Some("Pokemon"));
    }

    #[test]
    fn object_only_entity_has_empty_subgraph() {
        let kg = sabrina();
        assert!(kg.subgraph("Mr. Mime", Depth::One).unwrap().is_empty());
        assert!(matches!(kg.subgraph("Brock", Depth::One), Err(KgError::UnknownEntity(_))));
    }

    #[test]
    fn depth_two_follows_indexed_objects() {
        let mut kg = sabrina();
        kg.insert(parse_triple("(Mr. Mime, has_type, Psychic)").unwrap()).unwrap();
        let one = kg.subgraph("Sabrina", Depth::One).unwrap();
        let two = kg.subgraph("Sabrina", Depth::Two).unwrap();
        assert_eq!(one.len(), 4);
        assert_eq!(two.len(), 5);
        assert!(two.contains(&parse_triple("(Mr. Mime, has_type, Psychic)").unwrap()));
    }

    #[test]
    fn self_loop_is_not_duplicated_at_depth_two() {
        let mut kg = KnowledgeGraph::new(pokemon());
        kg.insert(parse_triple("(Eevee, evolves_to, Eevee)").unwrap()).unwrap();
        assert_eq!(kg.subgraph("Eevee", Depth::Two).unwrap().len(), 1);
    }

    #[test]
    fn duplicate_insert_leaves_size_unchanged() {
        let mut kg = sabrina();
        let again = kg.insert(parse_triple("(SABRINA, Has_Gender, female)").unwrap()).unwrap();
        assert_eq!(again, InsertOutcome::Duplicate);
        assert_eq!(kg.len(), 4);
    }

    #[test]
    fn validation_outcomes() {
        let kg = sabrina();
        let ok = parse_triple("(Sabrina, has_gender, female)").unwrap();
        assert_eq!(kg.validate(&ok), Ok(()));
        let unknown = parse_triple("(Sabrina, has_salary, high)").unwrap();
        assert!(matches!(kg.validate(&unknown), Err(ValidationError::UnknownRelation { .. })));
        let domain = parse_triple("(Mr. Mime, has_outfit, striped)").unwrap();
        assert!(matches!(kg.validate(&domain), Err(ValidationError::DomainMismatch { .. })));
        let range = parse_triple("(Sabrina, has_pokemon, Sabrina)").unwrap();
        assert!(matches!(kg.validate(&range), Err(ValidationError::RangeMismatch { .. })));
    }

    #[test]
    fn unindexed_subject_passes_domain_check() {
        let kg = sabrina();
        let t = parse_triple("(Brock, has_pokemon, Onix)").unwrap();
        assert_eq!(kg.validate(&t), Ok(()));
    }
}
