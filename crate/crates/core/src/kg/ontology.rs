use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;
use sha2::{Digest, Sha256};

use super::KgError;

/// Marker used in ontology files for a literal-valued relation range.
pub const LITERAL: &str = "literal";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Range {
    Literal,
    Concept(String),
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Range::Literal => f.write_str(LITERAL),
            Range::Concept(c) => f.write_str(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub name: String,
    pub domain: String,
    pub range: Range,
}

/// Concepts and typed relations permitted in one game's knowledge graph.
///
/// Text format, one declaration per line, `#` starts a comment:
///
/// ```text
/// game pokemon
/// version 1
/// concept Character
/// relation has_gender : Character -> literal
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ontology {
    game: String,
    version: String,
    concepts: BTreeSet<String>,
    // keyed by lowercased relation name
    relations: IndexMap<String, Relation>,
}

impl Ontology {
    pub fn new(game: impl Into<String>, version: impl Into<String>) -> Self {
        Self {
            game: game.into(),
            version: version.into(),
            concepts: BTreeSet::new(),
            relations: IndexMap::new(),
        }
    }

    pub fn add_concept(&mut self, name: impl Into<String>) -> Result<(), KgError> {
        let name = name.into();
        if name.is_empty() || name.contains(char::is_whitespace) || name == LITERAL {
            return Err(KgError::Ontology(format!("invalid concept name {name:?}")));
        }
        self.concepts.insert(name);
        Ok(())
    }

    pub fn add_relation(
        &mut self,
        name: impl Into<String>,
        domain: impl Into<String>,
        range: impl Into<String>,
    ) -> Result<(), KgError> {
        let name = name.into();
        let domain = domain.into();
        let range = range.into();
        if name.is_empty() || name.contains(char::is_whitespace) || name.contains(',') {
            return Err(KgError::Ontology(format!("invalid relation name {name:?}")));
        }
        let key = name.to_lowercase();
        if self.relations.contains_key(&key) {
            return Err(KgError::Ontology(format!("relation {name} declared twice in {}", self.game)));
        }
        if !self.concepts.contains(&domain) {
            return Err(KgError::Ontology(format!("relation {name}: undeclared domain {domain}")));
        }
        let range = if range == LITERAL {
            Range::Literal
        } else if self.concepts.contains(&range) {
            Range::Concept(range)
        } else {
            return Err(KgError::Ontology(format!("relation {name}: undeclared range {range}")));
        };
        self.relations.insert(key, Relation { name, domain, range });
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, KgError> {
        let mut game = None;
        let mut version = None;
        let mut pending = Vec::new();
        let mut ontology = Ontology::new("", "");
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (keyword, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            let err = |reason: String| KgError::OntologyParse { line: line_no, reason };
            match keyword {
                "game" => game = Some(rest.to_string()),
                "version" => version = Some(rest.to_string()),
                "concept" => ontology.add_concept(rest).map_err(|e| err(e.to_string()))?,
                "relation" => {
                    let (name, signature) = rest
                        .split_once(':')
                        .ok_or_else(|| err("expected `relation <name> : <domain> -> <range>`".into()))?;
                    let (domain, range) = signature
                        .split_once("->")
                        .ok_or_else(|| err("expected `<domain> -> <range>`".into()))?;
                    // relations may precede the concepts they mention
                    pending.push((line_no, name.trim().to_string(), domain.trim().to_string(), range.trim().to_string()));
                }
                other => return Err(err(format!("unknown declaration {other:?}"))),
            }
        }
        for (line, name, domain, range) in pending {
            ontology
                .add_relation(name, domain, range)
                .map_err(|e| KgError::OntologyParse { line, reason: e.to_string() })?;
        }
        ontology.game = game
            .filter(|g| !g.is_empty())
            .ok_or_else(|| KgError::OntologyParse { line: 0, reason: "missing `game` declaration".into() })?;
        ontology.version = version.unwrap_or_else(|| "0".to_string());
        Ok(ontology)
    }

    /// Canonical text form: concepts sorted, relations in declaration order.
    pub fn to_text(&self) -> String {
        let mut out = format!("game {}\nversion {}\n", self.game, self.version);
        for c in &self.concepts {
            out.push_str(&format!("concept {c}\n"));
        }
        for r in self.relations.values() {
            out.push_str(&format!("relation {} : {} -> {}\n", r.name, r.domain, r.range));
        }
        out
    }

    /// Short content hash of the canonical form; two ontologies with the same
    /// fingerprint accept exactly the same triples.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn game(&self) -> &str {
        &self.game
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn concepts(&self) -> impl Iterator<Item = &str> {
        self.concepts.iter().map(String::as_str)
    }

    pub fn has_concept(&self, name: &str) -> bool {
        self.concepts.contains(name)
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.get(&name.to_lowercase())
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const POKEMON: &str = "\
# starter
game pokemon
version 1
concept Character
concept Pokemon
relation has_gender : Character -> literal
relation has_pokemon : Character -> Pokemon # inline comment
";

    #[test]
    fn parses_declarations() {
        let o = Ontology::parse(POKEMON).unwrap();
        assert_eq!(o.game(), "pokemon");
        assert_eq!(o.relation("HAS_GENDER").unwrap().range, Range::Literal);
        assert_eq!(o.relation("has_pokemon").unwrap().range, Range::Concept("Pokemon".into()));
        assert_eq!(Ontology::parse(&o.to_text()).unwrap(), o);
    }

    #[test]
    fn rejects_duplicate_relation_names() {
        let text = format!("{POKEMON}relation Has_Gender : Character -> literal\n");
        assert!(matches!(Ontology::parse(&text), Err(KgError::OntologyParse { line: 8, .. })));
    }

    #[test]
    fn rejects_undeclared_domain_and_range() {
        let text = "game g\nconcept A\nrelation r : B -> literal\n";
        assert!(Ontology::parse(text).is_err());
        let text = "game g\nconcept A\nrelation r : A -> B\n";
        assert!(Ontology::parse(text).is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = Ontology::parse(POKEMON).unwrap();
        let b = Ontology::parse(&POKEMON.replace("version 1", "version 2")).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), Ontology::parse(POKEMON).unwrap().fingerprint());
    }
}
