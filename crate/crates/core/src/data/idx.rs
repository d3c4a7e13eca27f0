use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ByteOrder, WriteBytesExt};
use flate2::read::GzDecoder;

use super::{DataError, Result};
use crate::tensor::Tensor;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Grey-level images scaled to `[0, 1]` with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    /// `[N × rows × cols]`.
    pub images: Tensor,
    pub labels: Vec<u8>,
}

impl LabeledImageSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.images.shape()[1]
    }

    pub fn cols(&self) -> usize {
        self.images.shape()[2]
    }

    pub fn pixels(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let p = self.pixels();
        &self.images.data()[i * p..(i + 1) * p]
    }

    /// Flattened images `[B × rows·cols]` and labels for the given indices.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let mut data = Vec::with_capacity(indices.len() * self.pixels());
        for &i in indices {
            data.extend_from_slice(self.image(i));
        }
        let labels = indices.iter().map(|&i| self.labels[i] as usize).collect();
        (
            Tensor::matrix(indices.len(), self.pixels(), data).expect("batch shape"),
            labels,
        )
    }

    /// The first `n` examples.
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        let p = self.pixels();
        Self {
            images: Tensor::new(
                vec![n, self.rows(), self.cols()],
                self.images.data()[..n * p].to_vec(),
            )
            .expect("prefix shape"),
            labels: self.labels[..n].to_vec(),
        }
    }
}

struct Cursor<'a> {
    what: &'static str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(DataError::Truncated {
                what: self.what,
                offset: self.bytes.len() as u64,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(BigEndian::read_u32(self.take(4)?))
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let found = self.u32()?;
        if found != expected {
            return Err(DataError::BadMagic {
                what: self.what,
                expected,
                found,
            });
        }
        Ok(())
    }
}

/// Reads an IDX3 image file and an IDX1 label file.
pub fn parse_mnist_idx<I: Read, L: Read>(mut images: I, mut labels: L) -> Result<LabeledImageSet> {
    let mut ib = Vec::new();
    images.read_to_end(&mut ib)?;
    let mut lb = Vec::new();
    labels.read_to_end(&mut lb)?;

    let mut ic = Cursor {
        what: "images",
        bytes: &ib,
        pos: 0,
    };
    ic.magic(IMAGES_MAGIC)?;
    let n = ic.u32()? as usize;
    let rows = ic.u32()? as usize;
    let cols = ic.u32()? as usize;
    let pixels = ic.take(n * rows * cols)?;

    let mut lc = Cursor {
        what: "labels",
        bytes: &lb,
        pos: 0,
    };
    lc.magic(LABELS_MAGIC)?;
    let m = lc.u32()? as usize;
    if m != n {
        return Err(DataError::CountMismatch { images: n, labels: m });
    }
    let labels = lc.take(m)?.to_vec();
    if n == 0 || rows == 0 || cols == 0 {
        return Err(DataError::Empty("image set"));
    }

    let data = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    Ok(LabeledImageSet {
        images: Tensor::new(vec![n, rows, cols], data).expect("header extents"),
        labels,
    })
}

pub fn write_idx_images<W: Write>(mut w: W, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    if rows == 0 || cols == 0 || pixels.len() % (rows * cols) != 0 {
        return Err(DataError::InvalidArgument(format!(
            "{} pixels do not tile {rows}x{cols} images",
            pixels.len()
        )));
    }
    w.write_u32::<BigEndian>(IMAGES_MAGIC)?;
    w.write_u32::<BigEndian>((pixels.len() / (rows * cols)) as u32)?;
    w.write_u32::<BigEndian>(rows as u32)?;
    w.write_u32::<BigEndian>(cols as u32)?;
    w.write_all(pixels)?;
    Ok(())
}

pub fn write_idx_labels<W: Write>(mut w: W, labels: &[u8]) -> Result<()> {
    w.write_u32::<BigEndian>(LABELS_MAGIC)?;
    w.write_u32::<BigEndian>(labels.len() as u32)?;
    w.write_all(labels)?;
    Ok(())
}

/// Opens `path`, transparently decompressing when it ends in `.gz`.
pub fn open_maybe_gz(path: &Path) -> Result<Box<dyn Read>> {
    let f = BufReader::new(super::open(path)?);
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzDecoder::new(f)))
    } else {
        Ok(Box::new(f))
    }
}

fn find(dir: &Path, stem: &str) -> Result<PathBuf> {
    for name in [stem.to_string(), format!("{stem}.gz")] {
        let p = dir.join(name);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(DataError::File {
        path: dir.join(stem).display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "IDX file not found"),
    })
}

/// Loads `{split}-images-idx3-ubyte` and `{split}-labels-idx1-ubyte` (either
/// optionally gzipped) from `dir`; `split` is `train` or `t10k`.
pub fn load_mnist(dir: &Path, split: &str) -> Result<LabeledImageSet> {
    let images = find(dir, &format!("{split}-images-idx3-ubyte"))?;
    let labels = find(dir, &format!("{split}-labels-idx1-ubyte"))?;
    parse_mnist_idx(open_maybe_gz(&images)?, open_maybe_gz(&labels)?)
}
