use serde::{Deserialize, Serialize};

use super::profile::EntityProfile;
use super::queue::{CandidateTriple, Extractor};
use super::{IngestError, IngestWarning};
use crate::generate::{prompt_hash, CompletionRequest, GenerationBackend};
use crate::kg::{parse_triple, Ontology, Provenance, ProvenanceKind};

/// Version stamp of the extraction prompt, recorded in candidate provenance.
pub const EXTRACTION_TEMPLATE_VERSION: &str = "extract-v1";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionReport {
    /// Non-blank lines returned by the backend.
    pub total_lines: usize,
    pub parsed_lines: usize,
    pub malformed: Vec<String>,
    pub warnings: Vec<IngestWarning>,
}

/// The extraction prompt: relation list, instruction and profile text.
pub fn extraction_prompt(profile: &EntityProfile, ontology: &Ontology) -> String {
    let mut out = format!(
        "Extract facts about {} from the profile below.\n\
         Write one fact per line in the form (subject, relation, object) and nothing else.\n\
         Use only these relations:\n",
        profile.entity
    );
    for r in ontology.relations() {
        out.push_str(&format!("- {}: {} -> {}\n", r.name, r.domain, r.range));
    }
    out.push_str(&format!("\n## Profile of {} ({})\n", profile.entity, profile.concept));
    for s in &profile.sections {
        out.push_str(&format!("### {}\n{}\n", s.heading, s.body));
    }
    out
}

/// Asks the backend for triples and keeps the lines that parse.
pub fn extract_triples_llm(
    profile: &EntityProfile,
    ontology: &Ontology,
    backend: &dyn GenerationBackend,
) -> Result<(Vec<CandidateTriple>, ExtractionReport), IngestError> {
    let prompt = extraction_prompt(profile, ontology);
    let hash = prompt_hash(&prompt);
    let completion = backend.complete(&CompletionRequest { prompt: &prompt, prompt_hash: &hash, candidate_index: 0 })?;
    let provenance =
        Provenance::new(ProvenanceKind::LlmExtracted, &profile.source).with_template(EXTRACTION_TEMPLATE_VERSION);

    let mut report = ExtractionReport::default();
    let mut candidates = Vec::new();
    for line in completion.lines().map(str::trim).filter(|l| !l.is_empty()) {
        report.total_lines += 1;
        match parse_triple(line) {
            Ok(mut t) => {
                t.set_provenance(provenance.clone());
                candidates.push(CandidateTriple::pending(t, Extractor::Llm));
                report.parsed_lines += 1;
            }
            Err(_) => report.malformed.push(line.to_string()),
        }
    }
    if report.total_lines > 0 && report.parsed_lines == 0 {
        report.warnings.push(IngestWarning::AllLinesMalformed { lines: report.total_lines });
    }
    Ok((candidates, report))
}
