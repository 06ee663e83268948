use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"LOGTRDOC";
const VERSION: u32 = 1;

/// Document embeddings keyed by record id.
#[derive(Clone, Debug, PartialEq)]
pub struct DocEmbeddingStore {
    pub dim: usize,
    pub provider: String,
    pub rows: Vec<(String, Vec<f32>)>,
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

/// Layout: magic, version, `d_TE`, provider id, row count, then per row the
/// record id followed by `d_TE` little-endian `f32`s.
pub fn write_doc_embeddings(path: &Path, store: &DocEmbeddingStore) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(store.dim as u32).to_le_bytes());
    put_str(&mut buf, &store.provider);
    buf.extend_from_slice(&(store.rows.len() as u64).to_le_bytes());
    for (id, row) in &store.rows {
        if row.len() != store.dim {
            return Err(Error::Shape(format!("row {id} has {} values, expected {}", row.len(), store.dim)));
        }
        put_str(&mut buf, id);
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let out = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Checkpoint("document embedding file is truncated".into()))?;
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8 in document embedding file".into()))
    }
}

pub fn read_doc_embeddings(path: &Path) -> Result<DocEmbeddingStore> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint(format!("{} is not a document embedding file", path.display())));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported document embedding version {version}")));
    }
    let dim = r.u32()? as usize;
    let provider = r.string()?;
    let n = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")) as usize;
    let mut rows = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let id = r.string()?;
        let row = r
            .take(4 * dim)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        rows.push((id, row));
    }
    Ok(DocEmbeddingStore { dim, provider, rows })
}
