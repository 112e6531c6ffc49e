//! Knowledge vs. situation grounding of generated responses.
//!
//! Response words that match a lexeme derived from the prompt's knowledge
//! triples are labeled KNOWLEDGE; words matching the scenario text are labeled
//! SITUATION. Matching is exact over normalized words.

mod annotate;
mod lexicon;
mod text;

pub use annotate::{annotate, render_ansi, segments, GroundingAnnotation, Label, Span};
pub use lexicon::{build_knowledge_lexicon, build_situation_lexicon, LexemeSource, Lexicon};
pub use text::{is_stopword, normalize, tokenize, WordToken, NORMALIZATION_VERSION, STOPWORDS};
