use serde::{Deserialize, Serialize};

use super::lexicon::{LexemeSource, Lexicon};
use super::text::{tokenize, WordToken, NORMALIZATION_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Label {
    Knowledge,
    Situation,
}

/// A labeled region of the response. Offsets count Unicode scalar values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: Label,
    pub lexeme: String,
    pub source: LexemeSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingAnnotation {
    /// Id of the annotated response; empty when annotating free text.
    #[serde(default)]
    pub response: String,
    pub spans: Vec<Span>,
    pub knowledge_tokens: usize,
    pub situation_tokens: usize,
    pub normalization: String,
}

impl GroundingAnnotation {
    pub fn for_response(mut self, response_id: impl Into<String>) -> Self {
        self.response = response_id.into();
        self
    }

    /// Spans of one label.
    pub fn spans_with(&self, label: Label) -> impl Iterator<Item = &Span> {
        self.spans.iter().filter(move |s| s.label == label)
    }
}

#[derive(Debug, Clone, Copy)]
struct Run {
    first: usize,
    words: usize,
}

/// Finds every word run of `tokens` that is a lexeme of `lexicon`.
fn matching_runs(tokens: &[WordToken], lexicon: &Lexicon) -> Vec<Run> {
    let mut runs = Vec::new();
    for first in 0..tokens.len() {
        let mut key = String::new();
        for words in 1..=lexicon.max_words().min(tokens.len() - first) {
            if words > 1 {
                key.push(' ');
            }
            key.push_str(&tokens[first + words - 1].norm);
            if lexicon.contains(&key) {
                runs.push(Run { first, words });
            }
        }
    }
    runs
}

/// Claims runs longest first, earliest first, skipping any run that touches a
/// word already claimed.
fn claim(runs: &mut [Run], taken: &mut [bool]) -> Vec<Run> {
    runs.sort_by(|a, b| b.words.cmp(&a.words).then(a.first.cmp(&b.first)));
    let mut claimed = Vec::new();
    for run in runs.iter() {
        let range = run.first..run.first + run.words;
        if taken[range.clone()].iter().any(|t| *t) {
            continue;
        }
        taken[range].iter_mut().for_each(|t| *t = true);
        claimed.push(*run);
    }
    claimed
}

/// Labels response words that match the knowledge lexicon (KNOWLEDGE) or the
/// situation lexicon (SITUATION).
///
/// Knowledge matches are resolved first, so a run matching both lexicons is
/// KNOWLEDGE. Within one label longer runs win over shorter ones and earlier
/// over later. Unmatched text stays unlabeled.
pub fn annotate(response: &str, knowledge: &Lexicon, situation: &Lexicon) -> GroundingAnnotation {
    let tokens = tokenize(response);
    let mut taken = vec![false; tokens.len()];
    let mut labeled: Vec<(Run, Label)> = Vec::new();
    for (lexicon, label) in [(knowledge, Label::Knowledge), (situation, Label::Situation)] {
        let mut runs = matching_runs(&tokens, lexicon);
        labeled.extend(claim(&mut runs, &mut taken).into_iter().map(|r| (r, label)));
    }
    labeled.sort_by_key(|(r, _)| r.first);

    let byte_spans: Vec<(usize, usize, Label)> = labeled
        .iter()
        .map(|(r, label)| (tokens[r.first].start, tokens[r.first + r.words - 1].end, *label))
        .collect();
    let (knowledge_tokens, situation_tokens) = count_whitespace_tokens(response, &byte_spans);

    let spans = labeled
        .into_iter()
        .zip(&byte_spans)
        .map(|((run, label), (start, end, _))| {
            let lexeme = tokens[run.first..run.first + run.words]
                .iter()
                .map(|t| t.norm.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            let lexicon = if label == Label::Knowledge { knowledge } else { situation };
            let source = lexicon.source(&lexeme).cloned().expect("matched lexeme has a source");
            Span { start: char_offset(response, *start), end: char_offset(response, *end), label, lexeme, source }
        })
        .collect();

    GroundingAnnotation {
        response: String::new(),
        spans,
        knowledge_tokens,
        situation_tokens,
        normalization: NORMALIZATION_VERSION.to_string(),
    }
}

fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

/// Whitespace-delimited tokens overlapping at least one span of each label.
fn count_whitespace_tokens(text: &str, spans: &[(usize, usize, Label)]) -> (usize, usize) {
    let mut knowledge = 0;
    let mut situation = 0;
    let mut offset = 0;
    for piece in text.split_inclusive(char::is_whitespace) {
        let word = piece.trim_end();
        let (start, end) = (offset, offset + word.len());
        offset += piece.len();
        if word.is_empty() {
            continue;
        }
        let overlaps = |label: Label| spans.iter().any(|(s, e, l)| *l == label && *s < end && start < *e);
        knowledge += usize::from(overlaps(Label::Knowledge));
        situation += usize::from(overlaps(Label::Situation));
    }
    (knowledge, situation)
}

/// Splits the response into consecutive (text, label) segments; unlabeled
/// gaps carry `None`. Concatenating the texts yields the response.
pub fn segments<'a>(response: &'a str, annotation: &GroundingAnnotation) -> Vec<(&'a str, Option<Label>)> {
    let byte_at: Vec<usize> = response.char_indices().map(|(b, _)| b).chain([response.len()]).collect();
    let mut out = Vec::new();
    let mut cursor = 0;
    for span in &annotation.spans {
        let (start, end) = (byte_at[span.start], byte_at[span.end]);
        if start > cursor {
            out.push((&response[cursor..start], None));
        }
        out.push((&response[start..end], Some(span.label)));
        cursor = end;
    }
    if cursor < response.len() {
        out.push((&response[cursor..], None));
    }
    out
}

/// Terminal rendering: knowledge spans blue, situation spans green.
pub fn render_ansi(response: &str, annotation: &GroundingAnnotation) -> String {
    segments(response, annotation)
        .into_iter()
        .map(|(text, label)| match label {
            Some(Label::Knowledge) => format!("\x1b[1;34m{text}\x1b[0m"),
            Some(Label::Situation) => format!("\x1b[1;32m{text}\x1b[0m"),
            None => text.to_string(),
        })
        .collect()
}
