use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use super::KgError;

/// How a triple entered the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProvenanceKind {
    PatternExtracted,
    LlmExtracted,
    Manual,
}

impl ProvenanceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::PatternExtracted => "pattern-extracted",
            Self::LlmExtracted => "llm-extracted",
            Self::Manual => "manual",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: ProvenanceKind,
    /// Source document id. Empty for hand-entered facts.
    #[serde(default)]
    pub source: String,
    /// Version stamp of the extraction template or rule that produced the triple.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
}

impl Provenance {
    pub fn manual() -> Self {
        Self { kind: ProvenanceKind::Manual, source: String::new(), template: None }
    }

    pub fn new(kind: ProvenanceKind, source: impl Into<String>) -> Self {
        Self { kind, source: sanitize_line(&source.into()), template: None }
    }

    pub fn with_template(mut self, template: impl Into<String>) -> Self {
        self.template = Some(sanitize_line(&template.into()));
        self
    }
}

/// Replace control characters so the value fits on one line of a line-oriented file.
pub(crate) fn sanitize_line(s: &str) -> String {
    s.chars().map(|c| if c.is_control() { ' ' } else { c }).collect::<String>().trim().to_string()
}

/// A subject-predicate-object fact.
///
/// Equality and hashing ignore provenance and compare subject and predicate
/// case-insensitively; the object is compared exactly. Storage keeps the
/// original casing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawTriple")]
pub struct Triple {
    subject: String,
    predicate: String,
    object: String,
    provenance: Provenance,
}

#[derive(Deserialize)]
struct RawTriple {
    subject: String,
    predicate: String,
    object: String,
    #[serde(default = "Provenance::manual")]
    provenance: Provenance,
}

impl TryFrom<RawTriple> for Triple {
    type Error = KgError;

    fn try_from(raw: RawTriple) -> Result<Self, Self::Error> {
        Triple::with_provenance(raw.subject, raw.predicate, raw.object, raw.provenance)
    }
}

/// Normalized identity of a triple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TripleKey {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triple {
    /// Builds a manually-provenanced triple, trimming every field.
    pub fn new(
        subject: impl AsRef<str>,
        predicate: impl AsRef<str>,
        object: impl AsRef<str>,
    ) -> Result<Self, KgError> {
        Self::with_provenance(subject, predicate, object, Provenance::manual())
    }

    pub fn with_provenance(
        subject: impl AsRef<str>,
        predicate: impl AsRef<str>,
        object: impl AsRef<str>,
        provenance: Provenance,
    ) -> Result<Self, KgError> {
        let subject = check_field("subject", subject.as_ref(), false)?;
        let predicate = check_field("predicate", predicate.as_ref(), false)?;
        let object = check_field("object", object.as_ref(), true)?;
        Ok(Self { subject, predicate, object, provenance })
    }

    pub fn subject(&self) -> &str {
        &self.subject
    }

    pub fn predicate(&self) -> &str {
        &self.predicate
    }

    pub fn object(&self) -> &str {
        &self.object
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn set_provenance(&mut self, provenance: Provenance) {
        self.provenance = provenance;
    }

    pub fn key(&self) -> TripleKey {
        TripleKey {
            subject: self.subject.to_lowercase(),
            predicate: self.predicate.to_lowercase(),
            object: self.object.clone(),
        }
    }

    /// Stable textual identifier, the serialized form.
    pub fn id(&self) -> String {
        serialize_triple(self)
    }
}

fn check_field(field: &'static str, raw: &str, commas_allowed: bool) -> Result<String, KgError> {
    let value = raw.trim();
    if value.is_empty() {
        return Err(KgError::EmptyField { field });
    }
    if value.chars().any(char::is_control) {
        return Err(KgError::InvalidField { field, reason: "contains a control character" });
    }
    if !commas_allowed && value.contains(',') {
        return Err(KgError::InvalidField { field, reason: "contains a comma" });
    }
    Ok(value.to_string())
}

impl PartialEq for Triple {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Triple {}

impl Hash for Triple {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.predicate, self.object)
    }
}

/// Parses a `(subject, predicate, object)` record.
///
/// The first two commas delimit the fields; everything after the second comma,
/// minus the closing parenthesis, is the object.
pub fn parse_triple(line: &str) -> Result<Triple, KgError> {
    let trimmed = line.trim();
    let inner = trimmed
        .strip_prefix('(')
        .and_then(|rest| rest.strip_suffix(')'))
        .ok_or_else(|| KgError::MalformedTriple {
            line: trimmed.to_string(),
            reason: "missing wrapping parentheses",
        })?;
    let mut parts = inner.splitn(3, ',');
    let (Some(subject), Some(predicate), Some(object)) = (parts.next(), parts.next(), parts.next())
    else {
        return Err(KgError::MalformedTriple {
            line: trimmed.to_string(),
            reason: "fewer than two commas",
        });
    };
    Triple::new(subject, predicate, object)
}

pub fn serialize_triple(t: &Triple) -> String {
    t.to_string()
}
