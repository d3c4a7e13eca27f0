use std::collections::{BTreeSet, HashSet};

use crate::data::EmbeddingTable;

/// Anything that can answer "is this (space-joined) phrase known?".
pub trait PhraseDictionary {
    fn contains_phrase(&self, phrase: &str) -> bool;
}

impl PhraseDictionary for HashSet<String> {
    fn contains_phrase(&self, phrase: &str) -> bool {
        self.contains(phrase)
    }
}

impl PhraseDictionary for BTreeSet<String> {
    fn contains_phrase(&self, phrase: &str) -> bool {
        self.contains(phrase)
    }
}

impl PhraseDictionary for EmbeddingTable {
    fn contains_phrase(&self, phrase: &str) -> bool {
        self.contains(phrase)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Segment {
    Phrase(String),
    Oov(String),
}

impl Segment {
    pub fn text(&self) -> &str {
        match self {
            Segment::Phrase(s) | Segment::Oov(s) => s,
        }
    }

    pub fn into_text(self) -> String {
        match self {
            Segment::Phrase(s) | Segment::Oov(s) => s,
        }
    }

    pub fn is_oov(&self) -> bool {
        matches!(self, Segment::Oov(_))
    }
}

/// Splits `tokens` into the fewest pieces, where a piece is either a
/// dictionary phrase or a single out-of-vocabulary token. Among minimal
/// segmentations the one with the longest leading phrase wins, recursively.
pub fn segment_sentence<D: PhraseDictionary + ?Sized, S: AsRef<str>>(dict: &D, tokens: &[S]) -> Vec<Segment> {
    let n = tokens.len();
    // best[i] = (pieces needed for tokens[i..], end of first piece)
    let mut best = vec![(0usize, n); n + 1];
    for i in (0..n).rev() {
        let mut phrase = String::new();
        let mut spans = Vec::with_capacity(n - i);
        for (j, t) in tokens.iter().enumerate().skip(i) {
            if j > i {
                phrase.push(' ');
            }
            phrase.push_str(t.as_ref());
            spans.push(dict.contains_phrase(&phrase));
        }
        let mut choice = (usize::MAX, i + 1);
        for end in (i + 1..=n).rev() {
            if end > i + 1 && !spans[end - i - 1] {
                continue;
            }
            let cost = 1 + best[end].0;
            if cost < choice.0 {
                choice = (cost, end);
            }
        }
        best[i] = choice;
    }

    let mut out = Vec::with_capacity(best[0].0);
    let mut i = 0;
    while i < n {
        let end = best[i].1;
        let text = tokens[i..end]
            .iter()
            .map(AsRef::as_ref)
            .collect::<Vec<_>>()
            .join(" ");
        if dict.contains_phrase(&text) {
            out.push(Segment::Phrase(text));
        } else {
            out.push(Segment::Oov(text));
        }
        i = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dict(words: &[&str]) -> HashSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn texts(segs: &[Segment]) -> Vec<&str> {
        segs.iter().map(Segment::text).collect()
    }

    #[test]
    fn prefers_known_phrase() {
        let d = dict(&["united", "states", "united states"]);
        let s = segment_sentence(&d, &["united", "states"]);
        assert_eq!(s, vec![Segment::Phrase("united states".into())]);
    }

    #[test]
    fn empty_dictionary_gives_oov() {
        let s = segment_sentence(&dict(&[]), &["a", "b"]);
        assert_eq!(s, vec![Segment::Oov("a".into()), Segment::Oov("b".into())]);
    }

    #[test]
    fn ties_prefer_longer_leading_phrase() {
        let d = dict(&["a", "b", "a b", "b c", "c"]);
        let s = segment_sentence(&d, &["a", "b", "c"]);
        assert_eq!(texts(&s), ["a b", "c"]);
    }

    /// Minimum piece count over all 2^(n−1) split patterns.
    fn exhaustive_min(d: &HashSet<String>, tokens: &[&str]) -> usize {
        let n = tokens.len();
        let mut best = usize::MAX;
        for mask in 0u32..(1 << (n - 1)) {
            let mut pieces = 0;
            let mut start = 0;
            let mut ok = true;
            for end in 1..=n {
                if end == n || mask & (1 << (end - 1)) != 0 {
                    if end - start > 1 && !d.contains(&tokens[start..end].join(" ")) {
                        ok = false;
                    }
                    pieces += 1;
                    start = end;
                }
            }
            if ok {
                best = best.min(pieces);
            }
        }
        best
    }

    #[test]
    fn matches_exhaustive_on_example() {
        let d = dict(&["a", "b", "a b", "b c", "c"]);
        let tokens = ["a", "b", "c"];
        assert_eq!(segment_sentence(&d, &tokens).len(), exhaustive_min(&d, &tokens));
        assert_eq!(exhaustive_min(&d, &tokens), 2);
    }

    proptest! {
        #[test]
        fn minimal_and_covering(
            tokens in proptest::collection::vec(0usize..4, 1..9),
            phrases in proptest::collection::vec(proptest::collection::vec(0usize..4, 1..4), 0..8),
        ) {
            let names = ["p", "q", "r", "s"];
            let tokens: Vec<&str> = tokens.iter().map(|&i| names[i]).collect();
            let d: HashSet<String> = phrases
                .iter()
                .map(|p| p.iter().map(|&i| names[i]).collect::<Vec<_>>().join(" "))
                .collect();
            let segs = segment_sentence(&d, &tokens);
            prop_assert_eq!(segs.len(), exhaustive_min(&d, &tokens));
            let rejoined: Vec<&str> = segs.iter().flat_map(|s| s.text().split(' ')).collect();
            prop_assert_eq!(rejoined, tokens);
            for s in &segs {
                prop_assert_eq!(s.is_oov(), !d.contains(s.text()));
                if s.is_oov() {
                    prop_assert!(!s.text().contains(' '));
                }
            }
        }
    }
}
