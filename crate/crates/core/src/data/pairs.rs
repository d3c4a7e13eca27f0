use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::debug;

use super::{tokenize, DataError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SentencePair {
    pub score: f64,
    pub a: Vec<String>,
    pub b: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SentencePairSet {
    pub records: Vec<SentencePair>,
    /// Lines rejected as malformed or out of range.
    pub skipped: usize,
}

impl SentencePairSet {
    /// Both sides of every pair as independent sentences.
    pub fn sentences(&self) -> Vec<Vec<String>> {
        self.records
            .iter()
            .flat_map(|r| [r.a.clone(), r.b.clone()])
            .collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.score).collect()
    }
}

/// Parses `score\tsentence_a\tsentence_b` lines. Scores must lie in `[0, 5]`;
/// blank lines are ignored, anything else malformed is skipped and counted.
pub fn parse_sentence_pairs<R: BufRead>(reader: R) -> Result<SentencePairSet> {
    let mut set = SentencePairSet::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line) {
            Some(p) => set.records.push(p),
            None => {
                debug!("line {}: skipped", i + 1);
                set.skipped += 1;
            }
        }
    }
    if set.records.is_empty() {
        return Err(DataError::NoValidRecords { skipped: set.skipped });
    }
    Ok(set)
}

fn parse_line(line: &str) -> Option<SentencePair> {
    let mut fields = line.split('\t');
    let score: f64 = fields.next()?.trim().parse().ok()?;
    let (a, b) = (fields.next()?, fields.next()?);
    if fields.next().is_some() || !(0.0..=5.0).contains(&score) {
        return None;
    }
    let (a, b) = (tokenize(a), tokenize(b));
    if a.is_empty() || b.is_empty() {
        return None;
    }
    Some(SentencePair { score, a, b })
}

pub fn read_pairs_file(path: &Path) -> Result<SentencePairSet> {
    parse_sentence_pairs(BufReader::new(super::open(path)?))
}

pub fn write_sentence_pairs<W: Write>(set: &SentencePairSet, mut w: W) -> Result<()> {
    for r in &set.records {
        writeln!(w, "{:?}\t{}\t{}", r.score, r.a.join(" "), r.b.join(" "))?;
    }
    Ok(())
}
