use std::io::BufRead;

use super::Result;

/// Lowercases, splits on whitespace and trims ASCII punctuation from both
/// ends of every token. Tokens that were pure punctuation disappear.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// One tokenized sentence per non-blank line.
pub fn read_sentences<R: BufRead>(reader: R) -> Result<Vec<Vec<String>>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let tokens = tokenize(&line?);
        if !tokens.is_empty() {
            out.push(tokens);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(tokenize("Hello, World!"), ["hello", "world"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("  don't -- stop.  "), ["don't", "stop"]);
    }

    #[test]
    fn sentences_skip_blank_lines() {
        let s = read_sentences("A b\n\n  \nc.\n".as_bytes()).unwrap();
        assert_eq!(s, vec![vec!["a", "b"], vec!["c"]]);
    }

    proptest! {
        #[test]
        fn idempotent(s in "[ -~]{0,40}") {
            let once = tokenize(&s);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(once, twice);
        }
    }
}
