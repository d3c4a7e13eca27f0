use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{CasemError, ReembeddingModel, Result, WordState};

const MAGIC: &[u8; 4] = b"CASM";
const VERSION: u32 = 1;

fn truncated(e: std::io::Error) -> CasemError {
    if e.kind() == ErrorKind::UnexpectedEof {
        CasemError::Format("truncated".into())
    } else {
        CasemError::Io(e)
    }
}

impl ReembeddingModel {
    /// Little-endian binary: magic, version, `d`, `v0`, word count, then per
    /// word a `u32` byte length, UTF-8 token, `χ` and `w′`.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u32::<LittleEndian>(self.dim as u32)?;
        for &x in &self.v0 {
            w.write_f64::<LittleEndian>(x)?;
        }
        w.write_u64::<LittleEndian>(self.words.len() as u64)?;
        for (token, st) in &self.words {
            let bytes = token.as_bytes();
            let len = u32::try_from(bytes.len())
                .map_err(|_| CasemError::Format(format!("token of {} bytes", bytes.len())))?;
            w.write_u32::<LittleEndian>(len)?;
            w.write_all(bytes)?;
            w.write_f64::<LittleEndian>(st.chi)?;
            for &x in &st.w_prime {
                w.write_f64::<LittleEndian>(x)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Inverse of [`save`](Self::save). The energy trace is not stored.
    pub fn load<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MAGIC {
            return Err(CasemError::Format(format!("bad magic {magic:?}")));
        }
        let version = r.read_u32::<LittleEndian>().map_err(truncated)?;
        if version != VERSION {
            return Err(CasemError::Format(format!("unsupported version {version}")));
        }
        let dim = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let read_vec = |r: &mut R| -> Result<Vec<f64>> {
            let mut v = vec![0.0; dim];
            r.read_f64_into::<LittleEndian>(&mut v).map_err(truncated)?;
            Ok(v)
        };
        let v0 = read_vec(&mut r)?;
        let count = r.read_u64::<LittleEndian>().map_err(truncated)?;
        let mut words = BTreeMap::new();
        for _ in 0..count {
            let len = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf).map_err(truncated)?;
            let token = String::from_utf8(buf).map_err(|e| CasemError::Format(e.to_string()))?;
            let chi = r.read_f64::<LittleEndian>().map_err(truncated)?;
            let w_prime = read_vec(&mut r)?;
            words.insert(token, WordState { chi, w_prime });
        }
        Ok(Self {
            dim,
            v0,
            words,
            energy_trace: Vec::new(),
        })
    }

    pub fn save_file(&self, path: &Path) -> Result<()> {
        self.save(BufWriter::new(File::create(path)?))
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        Self::load(BufReader::new(File::open(path)?))
    }
}
