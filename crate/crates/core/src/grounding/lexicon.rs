use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::text::{is_stopword, tokenize};
use crate::kg::Triple;

/// Where a lexeme came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum LexemeSource {
    /// Serialized form of the originating triple.
    Triple(String),
    Scenario,
}

/// Normalized lexemes (words joined by a single space) and their sources.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<LexemeSource>>,
    max_words: usize,
}

impl Lexicon {
    fn add(&mut self, words: &[String], source: LexemeSource) {
        if words.is_empty() || words.iter().all(|w| is_stopword(w)) {
            return;
        }
        self.max_words = self.max_words.max(words.len());
        let sources = self.entries.entry(words.join(" ")).or_default();
        if !sources.contains(&source) {
            sources.push(source);
        }
    }

    pub fn contains(&self, lexeme: &str) -> bool {
        self.entries.contains_key(lexeme)
    }

    /// First source registered for `lexeme`.
    pub fn source(&self, lexeme: &str) -> Option<&LexemeSource> {
        self.entries.get(lexeme).and_then(|s| s.first())
    }

    pub fn sources(&self, lexeme: &str) -> &[LexemeSource] {
        self.entries.get(lexeme).map_or(&[], Vec::as_slice)
    }

    pub fn lexemes(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Word count of the longest lexeme.
    pub fn max_words(&self) -> usize {
        self.max_words
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Object-side lexicon: each object's full word sequence plus its content words.
/// Subjects and predicates never contribute.
pub fn build_knowledge_lexicon(triples: &[Triple]) -> Lexicon {
    let mut lexicon = Lexicon::default();
    for t in triples {
        let words: Vec<String> = tokenize(t.object()).into_iter().map(|w| w.norm).collect();
        let source = LexemeSource::Triple(t.id());
        lexicon.add(&words, source.clone());
        for w in words.iter().filter(|w| !is_stopword(w)) {
            lexicon.add(std::slice::from_ref(w), source.clone());
        }
    }
    lexicon
}

/// Content words of the scenario text plus every adjacent pair of content words.
pub fn build_situation_lexicon(scenario: &str) -> Lexicon {
    let mut lexicon = Lexicon::default();
    let words: Vec<String> = tokenize(scenario).into_iter().map(|w| w.norm).collect();
    for (i, w) in words.iter().enumerate() {
        if is_stopword(w) {
            continue;
        }
        lexicon.add(std::slice::from_ref(w), LexemeSource::Scenario);
        if let Some(next) = words.get(i + 1).filter(|n| !is_stopword(n)) {
            lexicon.add(&[w.clone(), next.clone()], LexemeSource::Scenario);
        }
    }
    lexicon
}
