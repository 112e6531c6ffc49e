use std::fs;
use std::path::Path;

use regex::Regex;

use super::profile::EntityProfile;
use super::queue::{CandidateTriple, Extractor};
use super::IngestError;
use crate::kg::{Provenance, ProvenanceKind, Triple};

/// Abbreviations whose trailing period does not end a keyword list.
const ABBREVIATIONS: &[&str] = &["Dr", "Jr", "Lt", "Mr", "Mrs", "Ms", "Prof", "St"];

#[derive(Debug, Clone)]
pub enum RuleKind {
    /// The single capture group is the object.
    Regex(Regex),
    /// Every item of the list following the keyword is an object.
    List { keyword: String, matcher: Regex },
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub relation: String,
    pub kind: RuleKind,
    /// 1-based line in the rule file, used in provenance.
    pub line: usize,
}

/// Ordered extraction rules loaded from a rule file.
///
/// ```text
/// # comment
/// regex has_gender is an? (female|male) character
/// list  has_pokemon Pokémon:
/// ```
#[derive(Debug, Clone)]
pub struct RuleSet {
    pub name: String,
    pub rules: Vec<Rule>,
}

impl RuleSet {
    pub fn parse(name: &str, text: &str) -> Result<Self, IngestError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let invalid = |reason: String| IngestError::InvalidRule { line, reason };
            let mut parts = trimmed.splitn(3, char::is_whitespace);
            let kind = parts.next().unwrap_or_default();
            let relation = parts.next().unwrap_or_default().trim();
            let pattern = parts.next().unwrap_or_default().trim();
            if relation.is_empty() || pattern.is_empty() {
                return Err(invalid("expected `<kind> <relation> <pattern>`".into()));
            }
            let kind = match kind {
                "regex" => {
                    let re = Regex::new(pattern).map_err(|e| invalid(e.to_string()))?;
                    if re.captures_len() != 2 {
                        return Err(invalid(format!(
                            "regex rules need exactly one capture group, found {}",
                            re.captures_len() - 1
                        )));
                    }
                    RuleKind::Regex(re)
                }
                "list" => {
                    let matcher = Regex::new(&regex::escape(pattern)).map_err(|e| invalid(e.to_string()))?;
                    RuleKind::List { keyword: pattern.to_string(), matcher }
                }
                other => return Err(invalid(format!("unknown rule kind {other:?}"))),
            };
            rules.push(Rule { relation: relation.to_string(), kind, line });
        }
        Ok(Self { name: name.to_string(), rules })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        Self::parse(&name, &text)
    }
}

/// Byte length of the list that starts at the beginning of `rest`.
fn list_extent(rest: &str) -> usize {
    for (i, c) in rest.char_indices() {
        let tail = &rest[i..];
        if tail.starts_with("...") || matches!(c, '…' | ';' | '\n') {
            return i;
        }
        if c == '.' && tail[1..].chars().next().is_none_or(char::is_whitespace) {
            let word_start = rest[..i].rfind(|ch: char| !ch.is_alphanumeric()).map_or(0, |p| p + 1);
            if !ABBREVIATIONS.contains(&&rest[word_start..i]) {
                return i;
            }
        }
    }
    rest.len()
}

fn list_items(rest: &str) -> Vec<String> {
    rest[..list_extent(rest)]
        .split(',')
        .flat_map(|part| part.split(" and "))
        .map(|item| item.trim().trim_start_matches("and ").trim().to_string())
        .filter(|item| !item.is_empty())
        .collect()
}

/// Applies the rules to every section, in rule order then match order.
///
/// Overlapping matches from different rules are all kept; duplicates are
/// resolved when accepted candidates are promoted into a graph.
pub fn extract_triples_pattern(profile: &EntityProfile, rules: &RuleSet) -> Vec<CandidateTriple> {
    let mut out = Vec::new();
    for rule in &rules.rules {
        let provenance = Provenance::new(ProvenanceKind::PatternExtracted, &profile.source)
            .with_template(format!("{}:{}", rules.name, rule.line));
        let mut emit = |object: &str| {
            if let Ok(t) = Triple::with_provenance(&profile.entity, &rule.relation, object, provenance.clone()) {
                out.push(CandidateTriple::pending(t, Extractor::Pattern));
            }
        };
        for section in &profile.sections {
            match &rule.kind {
                RuleKind::Regex(re) => {
                    for caps in re.captures_iter(&section.body) {
                        if let Some(m) = caps.get(1) {
                            emit(m.as_str());
                        }
                    }
                }
                RuleKind::List { matcher, .. } => {
                    for m in matcher.find_iter(&section.body) {
                        for item in list_items(&section.body[m.end()..]) {
                            emit(&item);
                        }
                    }
                }
            }
        }
    }
    out
}
