//! Cleanup of article text. Plain-text extracts from the API still carry
//! section headings and trailing apparatus sections; raw wikitext also
//! carries templates, tables, references and link syntax. Both are reduced
//! to paragraphs of prose.

use std::sync::LazyLock;

use regex::Regex;

const DROPPED_SECTIONS: [&str; 9] = [
    "references",
    "external links",
    "see also",
    "further reading",
    "notes",
    "sources",
    "bibliography",
    "citations",
    "footnotes",
];

static HEADING: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(=+)\s*(.*?)\s*=+\s*$").unwrap());
static REF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<ref[^>/]*/>|<ref[^>]*>.*?</ref>").unwrap());
static COMMENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<!--.*?-->").unwrap());
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"</?[A-Za-z][^>]*>").unwrap());
static PIPED_LINK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[\[[^\]|]*\|([^\]]*)\]\]").unwrap());
static LINK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[\[([^\]]*)\]\]").unwrap());
static EXT_LINK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[https?://\S+\s*([^\]]*)\]").unwrap());
static CITE_MARK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[(?:\d+|citation needed|note \d+)\]").unwrap());
static EMPHASIS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"'{2,}").unwrap());
static MEDIA_LINK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\[\[(?:file|image|category):[^\[\]]*(?:\[\[[^\]]*\]\][^\[\]]*)*\]\]").unwrap());

/// Removes `open ... close` blocks, honoring nesting.
fn strip_nested(text: &str, open: &str, close: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    let mut rest = text;
    while !rest.is_empty() {
        if rest.starts_with(open) {
            depth += 1;
            rest = &rest[open.len()..];
        } else if depth > 0 && rest.starts_with(close) {
            depth -= 1;
            rest = &rest[close.len()..];
        } else {
            let c = rest.chars().next().unwrap();
            if depth == 0 {
                out.push(c);
            }
            rest = &rest[c.len_utf8()..];
        }
    }
    out
}

/// Reduces article text to prose paragraphs separated by blank lines.
pub fn strip_markup(text: &str) -> String {
    let mut s = COMMENT.replace_all(text, "").into_owned();
    s = REF.replace_all(&s, "").into_owned();
    s = strip_nested(&s, "{|", "|}");
    s = strip_nested(&s, "{{", "}}");
    s = MEDIA_LINK.replace_all(&s, "").into_owned();
    s = PIPED_LINK.replace_all(&s, "$1").into_owned();
    s = LINK.replace_all(&s, "$1").into_owned();
    s = EXT_LINK.replace_all(&s, "$1").into_owned();
    s = TAG.replace_all(&s, "").into_owned();
    s = CITE_MARK.replace_all(&s, "").into_owned();
    s = EMPHASIS.replace_all(&s, "").into_owned();

    let mut paragraphs: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut skipping_level: Option<usize> = None;
    for line in s.lines() {
        if let Some(caps) = HEADING.captures(line) {
            let level = caps[1].len();
            if skipping_level.is_some_and(|l| level <= l) {
                skipping_level = None;
            }
            if skipping_level.is_none() && DROPPED_SECTIONS.contains(&caps[2].to_lowercase().as_str()) {
                skipping_level = Some(level);
            }
            flush(&mut current, &mut paragraphs);
            continue;
        }
        if skipping_level.is_some() {
            continue;
        }
        let line = line.trim();
        let is_list_noise = line.starts_with('|') || line.starts_with('!');
        if line.is_empty() || is_list_noise {
            flush(&mut current, &mut paragraphs);
            continue;
        }
        let line = line.trim_start_matches(['*', '#', ':', ';']).trim();
        if !current.is_empty() {
            current.push(' ');
        }
        current.push_str(line);
    }
    flush(&mut current, &mut paragraphs);
    paragraphs.join("\n\n")
}

fn flush(current: &mut String, out: &mut Vec<String>) {
    let p = current.split_whitespace().collect::<Vec<_>>().join(" ");
    if !p.is_empty() {
        out.push(p);
    }
    current.clear();
}
