use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{IngestError, IngestWarning};

/// Name of the section holding text that precedes the first heading.
pub const DESCRIPTION_SECTION: &str = "description";

// Marks a heading line between markup stripping passes. Control characters
// never survive into section bodies, so this cannot collide with content.
const HEADING_MARK: char = '\u{1}';

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub body: String,
}

/// Plain-text view of one saved character page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityProfile {
    pub entity: String,
    pub concept: String,
    pub source: String,
    pub sections: Vec<Section>,
}

impl EntityProfile {
    /// All section bodies joined with blank lines.
    pub fn text(&self) -> String {
        self.sections.iter().map(|s| s.body.as_str()).filter(|b| !b.is_empty()).collect::<Vec<_>>().join("\n\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedProfile {
    pub profile: EntityProfile,
    pub warnings: Vec<IngestWarning>,
}

macro_rules! static_re {
    ($name:ident, $pattern:expr) => {
        fn $name() -> &'static Regex {
            static CELL: OnceLock<Regex> = OnceLock::new();
            CELL.get_or_init(|| Regex::new($pattern).expect("static regex"))
        }
    };
}

static_re!(script_re, r"(?is)<(script|style)\b[^>]*>.*?</(script|style)\s*>");
static_re!(comment_re, r"(?s)<!--.*?-->");
static_re!(ref_re, r"(?is)<ref\b[^>]*/>|<ref\b[^>]*>.*?</ref\s*>");
static_re!(template_re, r"\{\{[^{}]*\}\}");
static_re!(html_heading_re, r"(?is)<h[1-6]\b[^>]*>(.*?)</h[1-6]\s*>");
static_re!(wiki_heading_re, r"(?m)^[ \t]*=+[ \t]*(.*?)[ \t]*=+[ \t]*$");
static_re!(md_heading_re, r"(?m)^[ \t]*#{1,6}[ \t]+(.*?)[ \t]*#*[ \t]*$");
static_re!(block_tag_re, r"(?i)</?(p|br|div|li|ul|ol|tr|td|th|table|section|article|blockquote)\b[^>]*>");
static_re!(tag_re, r"<[^>]*>");
static_re!(wiki_link_re, r"\[\[(?:[^\[\]|]*\|)?([^\[\]|]*)\]\]");
static_re!(external_link_re, r"\[(?:https?|ftp)://[^\s\]]+(?:\s+([^\]]*))?\]");
static_re!(ref_marker_re, r"(?i)\[(?:\d+|[a-z]|citation needed|note \d+|edit)\]");
static_re!(emphasis_re, r"'{2,}");
static_re!(entity_re, r"&(#[0-9]+|#[xX][0-9a-fA-F]+|[a-zA-Z]+);");

fn decode_entities(text: &str) -> String {
    entity_re()
        .replace_all(text, |caps: &regex::Captures<'_>| {
            let name = &caps[1];
            let decoded = if let Some(hex) = name.strip_prefix("#x").or_else(|| name.strip_prefix("#X")) {
                u32::from_str_radix(hex, 16).ok().and_then(char::from_u32)
            } else if let Some(dec) = name.strip_prefix('#') {
                dec.parse().ok().and_then(char::from_u32)
            } else {
                match name {
                    "amp" => Some('&'),
                    "lt" => Some('<'),
                    "gt" => Some('>'),
                    "quot" => Some('"'),
                    "apos" => Some('\''),
                    "nbsp" => Some(' '),
                    "eacute" => Some('é'),
                    "hellip" => Some('…'),
                    "mdash" => Some('\u{2014}'),
                    "ndash" => Some('\u{2013}'),
                    "rsquo" => Some('\u{2019}'),
                    "lsquo" => Some('\u{2018}'),
                    _ => None,
                }
            };
            decoded.map_or_else(|| caps[0].to_string(), String::from)
        })
        .into_owned()
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Strips inline markup from a fragment that holds no headings.
fn strip_inline(text: &str) -> String {
    let text = tag_re().replace_all(text, "");
    let text = wiki_link_re().replace_all(&text, "$1");
    let text = external_link_re().replace_all(&text, "$1");
    let text = ref_marker_re().replace_all(&text, "");
    let text = emphasis_re().replace_all(&text, "");
    decode_entities(&text)
}

/// Turns a saved page (HTML, wikitext, markdown or plain text) into sections.
///
/// Headings come from `<h1>`..`<h6>`, `== wikitext ==` and `# markdown` lines.
/// Text before the first heading forms a section named `description`; a page
/// without headings yields that single section plus a `NoSections` warning.
pub fn parse_profile_page(raw: &str, entity: &str, concept: &str, source: &str) -> Result<ParsedProfile, IngestError> {
    let entity = entity.trim();
    if entity.is_empty() {
        return Err(IngestError::EmptyEntity);
    }

    let mut text = script_re().replace_all(raw, " ").into_owned();
    text = comment_re().replace_all(&text, " ").into_owned();
    text = ref_re().replace_all(&text, "").into_owned();
    loop {
        let next = template_re().replace_all(&text, "").into_owned();
        if next == text {
            break;
        }
        text = next;
    }
    let mark = |caps: &regex::Captures<'_>| format!("\n{HEADING_MARK}{}\n", &caps[1]);
    text = html_heading_re().replace_all(&text, mark).into_owned();
    text = wiki_heading_re().replace_all(&text, mark).into_owned();
    text = md_heading_re().replace_all(&text, mark).into_owned();
    text = block_tag_re().replace_all(&text, "\n").into_owned();

    let mut sections: Vec<Section> = Vec::new();
    let mut heading: Option<String> = None;
    let mut body = String::new();
    let mut saw_heading = false;
    let flush = |heading: Option<String>, body: &str, sections: &mut Vec<Section>| {
        let body = collapse_whitespace(&strip_inline(body));
        match heading {
            Some(h) => sections.push(Section { heading: h, body }),
            None if !body.is_empty() => sections.push(Section { heading: DESCRIPTION_SECTION.into(), body }),
            None => {}
        }
    };
    for line in text.lines() {
        if let Some(h) = line.strip_prefix(HEADING_MARK) {
            let h = collapse_whitespace(&strip_inline(h));
            if h.is_empty() {
                continue;
            }
            flush(heading.take(), &body, &mut sections);
            body.clear();
            heading = Some(h);
            saw_heading = true;
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    flush(heading, &body, &mut sections);

    if sections.is_empty() {
        return Err(IngestError::EmptyDocument);
    }
    let warnings = if saw_heading { Vec::new() } else { vec![IngestWarning::NoSections] };
    Ok(ParsedProfile {
        profile: EntityProfile { entity: entity.to_string(), concept: concept.trim().to_string(), source: source.to_string(), sections },
        warnings,
    })
}
