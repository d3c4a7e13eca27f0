use std::io::Write;
use std::path::Path;

/// `(step, metric, value)` rows written as CSV with a header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub rows: Vec<(u64, String, f64)>,
}

impl MetricsLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: u64, metric: &str, value: f64) {
        self.rows.push((step, metric.to_string(), value));
    }

    /// Values of one metric in insertion order.
    pub fn series(&self, metric: &str) -> Vec<(u64, f64)> {
        self.rows
            .iter()
            .filter(|(_, m, _)| m == metric)
            .map(|(s, _, v)| (*s, *v))
            .collect()
    }

    pub fn last(&self, metric: &str) -> Option<f64> {
        self.series(metric).last().map(|&(_, v)| v)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,metric,value")?;
        for (s, m, v) in &self.rows {
            writeln!(w, "{s},{m},{v:?}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()
    }
}

/// Binary 8-bit PGM of `values` in `[0, 1]`, row-major.
pub fn write_pgm<W: Write>(mut w: W, width: usize, height: usize, values: &[f64]) -> std::io::Result<()> {
    assert_eq!(values.len(), width * height, "PGM size mismatch");
    write!(w, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = values
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    w.write_all(&bytes)
}
