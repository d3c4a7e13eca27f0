use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use log::warn;

use super::{DataError, Result};

/// Token → vector dictionary with a shared dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    index: IndexMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            index: IndexMap::new(),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Inserts or overwrites. Returns `true` if the token was already present.
    pub fn insert(&mut self, token: &str, vector: &[f64]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(DataError::InvalidArgument(format!(
                "vector for `{token}` has {} values, table dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        if let Some(&row) = self.index.get(token) {
            self.data[row * self.dim..(row + 1) * self.dim].copy_from_slice(vector);
            return Ok(true);
        }
        self.index.insert(token.to_string(), self.index.len());
        self.data.extend_from_slice(vector);
        Ok(false)
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&row| &self.data[row * self.dim..(row + 1) * self.dim])
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.index
            .iter()
            .map(|(t, &row)| (t.as_str(), &self.data[row * self.dim..(row + 1) * self.dim]))
    }
}

/// Parses the whitespace-separated text format: a token followed by `d`
/// reals per line, `d` taken from the first line. Blank lines are ignored.
pub fn parse_embedding_text<R: BufRead>(reader: R) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    let mut values = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        values.clear();
        for f in fields {
            let v: f64 = f.parse().map_err(|_| DataError::Parse {
                line: lineno,
                msg: format!("`{f}` is not a number"),
            })?;
            values.push(v);
        }
        if values.is_empty() {
            return Err(DataError::Parse {
                line: lineno,
                msg: format!("token `{token}` has no vector"),
            });
        }
        let t = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
        if values.len() != t.dim {
            return Err(DataError::RaggedDim {
                line: lineno,
                expected: t.dim,
                found: values.len(),
            });
        }
        if t.insert(token, &values)? {
            warn!("line {lineno}: duplicate token `{token}`, keeping the later vector");
        }
    }
    table.ok_or(DataError::Empty("embedding table"))
}

pub fn read_embedding_file(path: &Path) -> Result<EmbeddingTable> {
    parse_embedding_text(BufReader::new(super::open(path)?))
}

/// Writes the text format with shortest round-trip float formatting.
pub fn write_embedding_text<W: Write>(table: &EmbeddingTable, mut w: W) -> Result<()> {
    for (token, v) in table.iter() {
        write!(w, "{token}")?;
        for x in v {
            write!(w, " {x:?}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn minimal_file() {
        let t = parse_embedding_text("a 1.0 2.0\nb 3.0 4.0".as_bytes()).unwrap();
        assert_eq!((t.len(), t.dim()), (2, 2));
        assert_eq!(t.get("b").unwrap(), &[3.0, 4.0]);
    }

    #[test]
    fn empty_stream_fails() {
        assert!(matches!(
            parse_embedding_text("".as_bytes()),
            Err(DataError::Empty(_))
        ));
    }

    #[test]
    fn ragged_reports_line() {
        let err = parse_embedding_text("a 1 2\nb 1 2\nc 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::RaggedDim { line: 3, expected: 2, found: 1 }));
    }

    #[test]
    fn bad_number_reports_line() {
        let err = parse_embedding_text("a 1 2\nb 1 x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }));
    }

    #[test]
    fn duplicate_last_wins() {
        let t = parse_embedding_text("a 1 2\nb 0 0\na 5 6\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("a").unwrap(), &[5.0, 6.0]);
    }

    #[test]
    fn round_trip_1000_lines() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = EmbeddingTable::new(7);
        for i in 0..1000 {
            let v: Vec<f64> = (0..7).map(|_| rng.gen_range(-3.0..3.0)).collect();
            t.insert(&format!("tok{i}"), &v).unwrap();
        }
        let mut buf = Vec::new();
        write_embedding_text(&t, &mut buf).unwrap();
        assert_eq!(parse_embedding_text(buf.as_slice()).unwrap(), t);
    }
}
