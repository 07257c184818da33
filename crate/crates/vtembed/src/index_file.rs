//! `XMIX` index files holding normalized clip embeddings.

use std::path::Path;

use vtembed_core::index::EmbeddedCorpus;

use crate::bytes::{Reader, Writer};
use crate::error::{read_file, write_file, Error, Result};

pub const MAGIC: &[u8; 4] = b"XMIX";
pub const VERSION: u32 = 1;

pub fn encode_index(index: &EmbeddedCorpus) -> Result<Vec<u8>> {
    index.validate()?;
    let mut w = Writer::header(MAGIC, VERSION);
    w.u32(index.dim as u32);
    w.u64(index.len() as u64);
    w.buf.extend_from_slice(&index.fingerprint);
    for id in &index.clip_ids {
        w.short_str(id)?;
    }
    w.f32s(index.rows.iter().copied());
    Ok(w.buf)
}

pub fn decode_index(bytes: &[u8]) -> Result<EmbeddedCorpus> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC, VERSION)?;
    let dim = r.u32()? as usize;
    let n = r.u64()? as usize;
    let fingerprint: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    let clip_ids = (0..n).map(|_| r.short_str()).collect::<Result<Vec<_>>>()?;
    let rows = r.f32s(
        n.checked_mul(dim).ok_or_else(|| Error::Format("index size overflows".into()))?,
        "index rows",
    )?;
    r.finish()?;
    let index = EmbeddedCorpus {
        dim,
        clip_ids,
        rows,
        fingerprint,
    };
    index.validate()?;
    Ok(index)
}

pub fn read_index(path: &Path) -> Result<EmbeddedCorpus> {
    decode_index(&read_file(path)?)
}

pub fn write_index(path: &Path, index: &EmbeddedCorpus) -> Result<()> {
    write_file(path, &encode_index(index)?)
}
