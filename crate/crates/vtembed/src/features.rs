//! `XMFS` binary feature stores: pooled clip vectors and per-video frame sequences.

use std::path::Path;

use vtembed_core::{FeatureStore, Frame};

use crate::bytes::{Reader, Writer};
use crate::error::{read_file, write_file, Error, Result};

pub const MAGIC: &[u8; 4] = b"XMFS";
pub const VERSION: u32 = 1;

pub fn encode_feature_store(store: &FeatureStore) -> Result<Vec<u8>> {
    let mut w = Writer::header(MAGIC, VERSION);
    w.u32(store.dim() as u32);
    w.u64(store.clips().len() as u64);
    w.u64(store.videos().len() as u64);
    for (id, values) in store.clips() {
        w.short_str(id)?;
        w.f32s(values.iter().copied());
    }
    for video in store.videos() {
        w.short_str(&video.video_id)?;
        let n = u32::try_from(video.frames.len())
            .map_err(|_| Error::Format(format!("video {} has too many frames", video.video_id)))?;
        w.u32(n);
        for f in &video.frames {
            w.f64(f.timestamp);
            w.f32s(f.values.iter().copied());
        }
    }
    Ok(w.buf)
}

pub fn decode_feature_store(bytes: &[u8]) -> Result<FeatureStore> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC, VERSION)?;
    let dim = r.u32()? as usize;
    if dim == 0 {
        return Err(Error::Format("feature dimension must be positive".into()));
    }
    let clips = r.u64()?;
    let videos = r.u64()?;
    let mut store = FeatureStore::new(dim)?;
    for _ in 0..clips {
        let id = r.short_str()?;
        let values = r.f32s(dim, &format!("clip {id}"))?;
        store.insert_clip(id, values)?;
    }
    for _ in 0..videos {
        let id = r.short_str()?;
        let n = r.u32()?;
        let mut frames = Vec::new();
        for _ in 0..n {
            let timestamp = r.f64()?;
            if !timestamp.is_finite() {
                return Err(Error::Format(format!("non-finite timestamp in video {id}")));
            }
            let values = r.f32s(dim, &format!("video {id}"))?;
            frames.push(Frame { timestamp, values });
        }
        store.insert_video(id, frames)?;
    }
    r.finish()?;
    Ok(store)
}

pub fn read_feature_store(path: &Path) -> Result<FeatureStore> {
    decode_feature_store(&read_file(path)?)
}

pub fn write_feature_store(path: &Path, store: &FeatureStore) -> Result<()> {
    write_file(path, &encode_feature_store(store)?)
}
