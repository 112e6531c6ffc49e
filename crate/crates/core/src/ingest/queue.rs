use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::kg::{parse_triple, InsertOutcome, KnowledgeGraph, Provenance, ProvenanceKind, Triple};

const QUEUE_HEADER: &str = "# kgdf curation queue";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extractor {
    Pattern,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pending,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$variant => $text),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok(Self::$variant),)+
                    other => Err(format!("unknown {} {other:?}", stringify!($ty).to_lowercase())),
                }
            }
        }
    };
}

text_enum!(Extractor { Pattern => "pattern", Llm => "llm" });
text_enum!(Status { Pending => "pending", Accepted => "accepted", Rejected => "rejected" });

/// An extracted fact waiting for a human decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTriple {
    pub triple: Triple,
    pub extractor: Extractor,
    pub status: Status,
    pub note: Option<String>,
}

impl CandidateTriple {
    pub fn pending(triple: Triple, extractor: Extractor) -> Self {
        Self { triple, extractor, status: Status::Pending, note: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromotionReport {
    pub inserted: usize,
    pub duplicate: usize,
    pub rejected_skipped: usize,
    pub pending_skipped: usize,
    /// Accepted candidates the graph refused, as (candidate id, reason).
    pub failed: Vec<(usize, String)>,
}

/// Candidates addressed by 1-based id, in arrival order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CurationQueue {
    entries: Vec<CandidateTriple>,
}

impl CurationQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends candidates and returns the id of the first one added.
    pub fn extend(&mut self, candidates: impl IntoIterator<Item = CandidateTriple>) -> usize {
        let first = self.entries.len() + 1;
        self.entries.extend(candidates);
        first
    }

    pub fn get(&self, id: usize) -> Option<&CandidateTriple> {
        id.checked_sub(1).and_then(|i| self.entries.get(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &CandidateTriple)> {
        self.entries.iter().enumerate().map(|(i, c)| (i + 1, c))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pending(&self) -> impl Iterator<Item = (usize, &CandidateTriple)> {
        self.iter().filter(|(_, c)| c.status == Status::Pending)
    }

    /// Records a decision. Each candidate is decided once; accepting requires
    /// the triple to validate against `kg`.
    pub fn decide(
        &mut self,
        id: usize,
        decision: Decision,
        note: Option<&str>,
        kg: &KnowledgeGraph,
    ) -> Result<Status, IngestError> {
        let entry = id.checked_sub(1).and_then(|i| self.entries.get_mut(i)).ok_or(IngestError::UnknownCandidate(id))?;
        if entry.status != Status::Pending {
            return Err(IngestError::AlreadyDecided { id, status: entry.status });
        }
        if decision == Decision::Accept {
            kg.validate(&entry.triple).map_err(|source| IngestError::ValidationFailedOnAccept { id, source })?;
        }
        entry.status = match decision {
            Decision::Accept => Status::Accepted,
            Decision::Reject => Status::Rejected,
        };
        entry.note = note.map(|n| n.split_whitespace().collect::<Vec<_>>().join(" ")).filter(|n| !n.is_empty());
        Ok(entry.status)
    }

    /// Inserts every accepted candidate into `kg`. Only accepted candidates
    /// are ever inserted.
    pub fn promote_accepted(&self, kg: &mut KnowledgeGraph) -> PromotionReport {
        let mut report = PromotionReport::default();
        for (id, c) in self.iter() {
            match c.status {
                Status::Pending => report.pending_skipped += 1,
                Status::Rejected => report.rejected_skipped += 1,
                Status::Accepted => match kg.insert(c.triple.clone()) {
                    Ok(InsertOutcome::Inserted) => report.inserted += 1,
                    Ok(InsertOutcome::Duplicate) => report.duplicate += 1,
                    Err(e) => report.failed.push((id, e.to_string())),
                },
            }
        }
        report
    }

    /// Tab-separated: status, extractor, triple, source, template, note.
    pub fn to_text(&self) -> String {
        let mut out = format!("{QUEUE_HEADER}\n");
        for c in &self.entries {
            let p = c.triple.provenance();
            let note = c.note.as_deref().unwrap_or("").replace(char::is_control, " ");
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                c.status,
                c.extractor,
                c.triple,
                p.source,
                p.template.as_deref().unwrap_or(""),
                note
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, IngestError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let corrupt = |reason: String| IngestError::CorruptQueue { line, reason };
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields.len() != 6 {
                return Err(corrupt(format!("expected 6 tab-separated fields, found {}", fields.len())));
            }
            let status: Status = fields[0].parse().map_err(corrupt)?;
            let extractor: Extractor = fields[1].parse().map_err(corrupt)?;
            let mut triple = parse_triple(fields[2]).map_err(|e| corrupt(e.to_string()))?;
            let kind = match extractor {
                Extractor::Pattern => ProvenanceKind::PatternExtracted,
                Extractor::Llm => ProvenanceKind::LlmExtracted,
            };
            let mut provenance = Provenance::new(kind, fields[3]);
            if !fields[4].is_empty() {
                provenance = provenance.with_template(fields[4]);
            }
            triple.set_provenance(provenance);
            let note = Some(fields[5].trim().to_string()).filter(|n| !n.is_empty());
            entries.push(CandidateTriple { triple, extractor, status, note });
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IngestError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}
