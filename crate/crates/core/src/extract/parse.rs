//! Completion grammar: one triple per line as a parenthesized or bracketed,
//! comma-separated 3-tuple whose fields may be quoted.
//!
//! Accepted shapes include `(Renewable energy, HasNumericValue, 20% to 28%)`,
//! `("Wind Energy", "HasCapacity", "63 GW")` and
//! `['Bioenergy', 'HasPercentileValue', '13.1% in 2030']`, with optional list
//! bullets or numbering in front. Several tuples may share a line. An
//! unquoted tail may contain commas; everything after the second separator
//! belongs to it.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParsedTriple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub text: String,
    pub reason: String,
}

const QUOTES: [(char, char); 4] = [('"', '"'), ('\'', '\''), ('\u{201c}', '\u{201d}'), ('\u{2018}', '\u{2019}')];

fn closing_quote(open: char) -> Option<char> {
    QUOTES.iter().find(|(o, _)| *o == open).map(|(_, c)| *c)
}

/// Top-level `(...)` / `[...]` groups on a line, outer delimiters removed.
fn groups(line: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    let mut quote: Option<char> = None;
    let mut prev = ' ';
    for (i, c) in line.char_indices() {
        if let Some(q) = quote {
            if c == q {
                quote = None;
            }
        } else if depth > 0 && closing_quote(c).is_some() && matches!(prev, '(' | '[' | ',' | ' ') {
            quote = closing_quote(c);
        } else if c == '(' || c == '[' {
            if depth == 0 {
                start = i + 1;
            }
            depth += 1;
        } else if (c == ')' || c == ']') && depth > 0 {
            depth -= 1;
            if depth == 0 {
                out.push(&line[start..i]);
            }
        }
        prev = c;
    }
    out
}

/// Innermost tuples: a group whose contents are themselves groups, such as
/// a list of tuples, is replaced by its members.
fn leaf_groups(line: &str) -> Vec<&str> {
    groups(line)
        .into_iter()
        .flat_map(|g| {
            let t = g.trim();
            if t.starts_with('(') || t.starts_with('[') {
                leaf_groups(t)
            } else {
                vec![g]
            }
        })
        .collect()
}

/// Splits tuple contents into fields, honoring quotes at field starts.
fn fields(inner: &str) -> (Vec<String>, bool) {
    let chars: Vec<char> = inner.chars().collect();
    let mut out = Vec::new();
    let mut any_quoted = false;
    let mut i = 0;
    loop {
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        if i >= chars.len() {
            break;
        }
        if let Some(close) = closing_quote(chars[i]) {
            let start = i + 1;
            let mut j = start;
            // Closing quote is the one followed by optional spaces then a comma or the end.
            let end = loop {
                match chars[j..].iter().position(|&c| c == close) {
                    None => break None,
                    Some(off) => {
                        let k = j + off;
                        let rest = chars[k + 1..].iter().find(|c| !c.is_whitespace());
                        if matches!(rest, None | Some(',')) {
                            break Some(k);
                        }
                        j = k + 1;
                    }
                }
            };
            if let Some(end) = end {
                any_quoted = true;
                out.push(chars[start..end].iter().collect());
                i = end + 1;
                while i < chars.len() && chars[i] != ',' {
                    i += 1;
                }
                i += 1;
                continue;
            }
        }
        let start = i;
        while i < chars.len() && chars[i] != ',' {
            i += 1;
        }
        out.push(chars[start..i].iter().collect::<String>().trim().to_owned());
        i += 1;
    }
    (out, any_quoted)
}

fn parse_group(inner: &str) -> Result<ParsedTriple, String> {
    let trimmed = inner.trim();
    let (mut f, any_quoted) = fields(trimmed);
    if f.len() > 3 && !any_quoted {
        f = trimmed.splitn(3, ',').map(|s| s.trim().to_owned()).collect();
    }
    if f.len() != 3 {
        return Err(format!("expected 3 fields, found {}", f.len()));
    }
    if f.iter().any(|x| x.trim().is_empty()) {
        return Err("empty field".into());
    }
    let mut it = f.into_iter().map(|s| s.trim().to_owned());
    Ok(ParsedTriple { head: it.next().unwrap(), relation: it.next().unwrap(), tail: it.next().unwrap() })
}

/// Parses a completion into triples. Lines that hold no well-formed
/// triple become diagnostics.
pub fn parse_completion(text: &str) -> (Vec<ParsedTriple>, Vec<ParseDiagnostic>) {
    let mut triples = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line == "```" || line.starts_with("```") {
            continue;
        }
        let gs = leaf_groups(line);
        if gs.is_empty() {
            diagnostics.push(ParseDiagnostic {
                line: i + 1,
                text: line.to_owned(),
                reason: "no parenthesized triple".into(),
            });
            continue;
        }
        for g in gs {
            match parse_group(g) {
                Ok(t) => triples.push(t),
                Err(reason) => diagnostics.push(ParseDiagnostic { line: i + 1, text: line.to_owned(), reason }),
            }
        }
    }
    (triples, diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(line: &str) -> ParsedTriple {
        let (t, d) = parse_completion(line);
        assert!(d.is_empty(), "{d:?}");
        assert_eq!(t.len(), 1);
        t.into_iter().next().unwrap()
    }

    #[test]
    fn bare_tuple() {
        let t = one("(Renewable energy, HasNumericValue, 20% to 28%)");
        assert_eq!(
            (t.head.as_str(), t.relation.as_str(), t.tail.as_str()),
            ("Renewable energy", "HasNumericValue", "20% to 28%")
        );
    }

    #[test]
    fn quoted_and_bracketed_forms() {
        let t = one(r#"1. ("Wind Energy", "HasCapacity", "63 GW")"#);
        assert_eq!(t.tail, "63 GW");
        let t = one("- ['Bioenergy', 'HasPercentileValue', '13.1% in 2030']");
        assert_eq!(t.head, "Bioenergy");
        assert_eq!(t.tail, "13.1% in 2030");
    }

    #[test]
    fn commas_and_apostrophes_in_fields() {
        let t = one("(Food, HasStatistic, travels about 1,500 miles, on average)");
        assert_eq!(t.tail, "travels about 1,500 miles, on average");
        let t = one("('Earth's forests', 'HasImpact', 'carbon storage')");
        assert_eq!(t.head, "Earth's forests");
        let t = one("(Carbon Emissions, HasStatistic, 4.3 metric tons (per capita))");
        assert_eq!(t.tail, "4.3 metric tons (per capita)");
    }

    #[test]
    fn several_per_line_and_nested_list() {
        let (t, _) = parse_completion("[('a', 'Saves', 'b'), ('c', 'Reduces', 'd')]");
        assert_eq!(t.len(), 2);
        assert_eq!(t[1].relation, "Reduces");
    }

    #[test]
    fn prose_is_diagnosed_not_fatal() {
        let (t, d) = parse_completion("Here are the triples:\n(a, Saves, b)\n(only, two)\n");
        assert_eq!(t.len(), 1);
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].line, 1);
        assert!(d[1].reason.contains("3 fields"));
    }
}
