/// Splits text into lowercase word tokens and single-character punctuation tokens.
///
/// A word is a run of alphanumeric characters. These join two word parts
/// into one token:
///
/// | joiner | condition | example |
/// | ------ | --------- | ------- |
/// | `-` | alphanumeric on both sides | `low-carbon`, `20-40` |
/// | `.` `,` | digit on both sides | `13.1`, `1,500` |
/// | `'` `’` | letter on both sides | `it's` |
///
/// A `%` directly after a word ending in a digit is kept on that word
/// (`20-40%`). Any other non-space character is its own token.
///
/// ```
/// use kgground::eval::tokenize;
/// assert_eq!(tokenize("The cat sat."), ["the", "cat", "sat", "."]);
/// assert_eq!(tokenize("20-40% Water"), ["20-40%", "water"]);
/// assert!(tokenize("").is_empty());
/// ```
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if !c.is_alphanumeric() {
            tokens.push(c.to_lowercase().collect());
            i += 1;
            continue;
        }
        let start = i;
        i += 1;
        loop {
            match chars.get(i) {
                Some(ch) if ch.is_alphanumeric() => i += 1,
                Some(&j) if joins(j, chars[i - 1], chars.get(i + 1).copied()) => i += 2,
                _ => break,
            }
        }
        if chars[i - 1].is_ascii_digit() && chars.get(i) == Some(&'%') {
            i += 1;
        }
        tokens.push(chars[start..i].iter().collect::<String>().to_lowercase());
    }
    tokens
}

fn joins(joiner: char, prev: char, next: Option<char>) -> bool {
    let Some(next) = next else { return false };
    match joiner {
        '-' => prev.is_alphanumeric() && next.is_alphanumeric(),
        '.' | ',' => prev.is_ascii_digit() && next.is_ascii_digit(),
        '\'' | '\u{2019}' => prev.is_alphabetic() && next.is_alphabetic(),
        _ => false,
    }
}
