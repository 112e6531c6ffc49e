/// Version tag of the stopword list and normalization rules.
pub const NORMALIZATION_VERSION: &str = "norm-1";

/// English function words ignored when building lexicons.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "after", "an", "and", "are", "as", "at", "be", "been", "before", "being", "but",
    "by", "do", "does", "for", "from", "had", "has", "have", "he", "her", "his", "i", "if", "in",
    "is", "it", "its", "me", "my", "no", "not", "of", "on", "or", "our", "she", "so", "than",
    "that", "the", "their", "them", "then", "there", "these", "they", "this", "those", "to",
    "upon", "was", "we", "were", "when", "while", "will", "with", "you", "your",
];

pub fn is_stopword(norm: &str) -> bool {
    STOPWORDS.binary_search(&norm).is_ok()
}

/// A word in the original text: byte range plus normalized form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordToken {
    pub start: usize,
    pub end: usize,
    pub norm: String,
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2019}')
}

/// Splits text into words: runs of alphanumerics, where a hyphen or apostrophe
/// between two alphanumerics stays inside the word. Normalized form is
/// lowercase with apostrophes dropped and hyphens kept.
pub fn tokenize(text: &str) -> Vec<WordToken> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].1.is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = i;
        let mut j = i + 1;
        while j < chars.len() {
            let c = chars[j].1;
            if c.is_alphanumeric() {
                j += 1;
            } else if is_joiner(c) && chars.get(j + 1).is_some_and(|(_, n)| n.is_alphanumeric()) {
                j += 2;
            } else {
                break;
            }
        }
        let start_byte = chars[start].0;
        let end_byte = chars.get(j).map_or(text.len(), |(b, _)| *b);
        tokens.push(WordToken { start: start_byte, end: end_byte, norm: normalize_word(&text[start_byte..end_byte]) });
        i = j;
    }
    tokens
}

fn normalize_word(word: &str) -> String {
    word.chars()
        .filter(|c| *c != '\'' && *c != '\u{2019}')
        .flat_map(char::to_lowercase)
        .collect()
}

/// Normalized word sequence of `text` joined by single spaces.
pub fn normalize(text: &str) -> String {
    tokenize(text).into_iter().map(|t| t.norm).collect::<Vec<_>>().join(" ")
}
