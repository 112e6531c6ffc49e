#![allow(dead_code)]

//! Brute-force grounding oracle with its own tokenizer.
//!
//! Shared by the core and gateway test suites via `#[path]`.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use kgdf_core::grounding::{GroundingAnnotation, Label, Lexicon, STOPWORDS};
use regex::Regex;

/// One word of the text, with char offsets.
#[derive(Debug, Clone)]
pub struct Word {
    pub start: usize,
    pub end: usize,
    pub norm: String,
}

fn word_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[\p{Alphabetic}\p{N}]+(?:['\x{2019}-][\p{Alphabetic}\p{N}]+)*").unwrap())
}

fn char_index(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

pub fn words(text: &str) -> Vec<Word> {
    word_re()
        .find_iter(text)
        .map(|m| Word {
            start: char_index(text, m.start()),
            end: char_index(text, m.end()),
            norm: m.as_str().replace(['\'', '\u{2019}'], "").to_lowercase(),
        })
        .collect()
}

fn stop(w: &str) -> bool {
    STOPWORDS.contains(&w)
}

/// Normalized content words and adjacent content-word pairs.
pub fn situation_lexemes(scenario: &str) -> BTreeSet<String> {
    let ws: Vec<String> = words(scenario).into_iter().map(|w| w.norm).collect();
    let mut out = BTreeSet::new();
    for i in 0..ws.len() {
        if stop(&ws[i]) {
            continue;
        }
        out.insert(ws[i].clone());
        if i + 1 < ws.len() && !stop(&ws[i + 1]) {
            out.insert(format!("{} {}", ws[i], ws[i + 1]));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expected {
    pub spans: Vec<(usize, usize, Label, String)>,
    pub knowledge_tokens: usize,
    pub situation_tokens: usize,
}

/// Tests every token run against both lexicons, then accepts candidates in
/// (KNOWLEDGE first, longer first, earlier first) order, dropping any that
/// overlap an accepted one.
pub fn brute_force(text: &str, knowledge: &Lexicon, situation: &Lexicon) -> Expected {
    let ws = words(text);
    let mut candidates = Vec::new();
    for i in 0..ws.len() {
        for j in i + 1..=ws.len() {
            let lexeme = ws[i..j].iter().map(|w| w.norm.as_str()).collect::<Vec<_>>().join(" ");
            if knowledge.contains(&lexeme) {
                candidates.push((0u8, i, j, lexeme.clone()));
            }
            if situation.contains(&lexeme) {
                candidates.push((1u8, i, j, lexeme));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.cmp(&b.0).then((b.2 - b.1).cmp(&(a.2 - a.1))).then(a.1.cmp(&b.1)));
    let mut used = vec![false; ws.len()];
    let mut spans = Vec::new();
    for (rank, i, j, lexeme) in candidates {
        if used[i..j].iter().any(|u| *u) {
            continue;
        }
        used[i..j].iter_mut().for_each(|u| *u = true);
        let label = if rank == 0 { Label::Knowledge } else { Label::Situation };
        spans.push((ws[i].start, ws[j - 1].end, label, lexeme));
    }
    spans.sort_by_key(|s| s.0);

    let ws_re = Regex::new(r"\S+").unwrap();
    let mut knowledge_tokens = 0;
    let mut situation_tokens = 0;
    for m in ws_re.find_iter(text) {
        let (a, b) = (char_index(text, m.start()), char_index(text, m.end()));
        let hit = |l: Label| spans.iter().any(|(s, e, sl, _)| *sl == l && *s < b && a < *e);
        knowledge_tokens += usize::from(hit(Label::Knowledge));
        situation_tokens += usize::from(hit(Label::Situation));
    }
    Expected { spans, knowledge_tokens, situation_tokens }
}

pub fn observed(annotation: &GroundingAnnotation) -> Expected {
    Expected {
        spans: annotation.spans.iter().map(|s| (s.start, s.end, s.label, s.lexeme.clone())).collect(),
        knowledge_tokens: annotation.knowledge_tokens,
        situation_tokens: annotation.situation_tokens,
    }
}
