//! Dataset formats and generators: embedding text files, sentence-pair TSV,
//! IDX image/label containers, the synthetic surface grid, and tokenization.

mod embeddings;
mod idx;
mod pairs;
mod surface;
mod text;

use thiserror::Error;

pub use embeddings::{parse_embedding_text, read_embedding_file, write_embedding_text, EmbeddingTable};
pub use idx::{
    load_mnist, open_maybe_gz, parse_mnist_idx, write_idx_images, write_idx_labels, LabeledImageSet,
    IMAGES_MAGIC, LABELS_MAGIC,
};
pub use pairs::{parse_sentence_pairs, read_pairs_file, write_sentence_pairs, SentencePair, SentencePairSet};
pub use surface::{make_surface_grid, surface_height, SurfacePoint};
pub use text::{read_sentences, tokenize};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{0}: empty input")]
    Empty(&'static str),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: expected {expected} values, found {found}")]
    RaggedDim {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{what}: bad magic {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        what: &'static str,
        expected: u32,
        found: u32,
    },
    #[error("{what}: truncated at byte {offset}")]
    Truncated { what: &'static str, offset: u64 },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("no valid records ({skipped} lines skipped)")]
    NoValidRecords { skipped: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

fn open(path: &std::path::Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| DataError::File {
        path: path.display().to_string(),
        source,
    })
}
