//! Binary model container.
//!
//! Layout (little-endian): magic `MSPK`, u16 version, u32 config length,
//! config JSON, u32 tensor count, then per tensor: u16 name length, UTF-8
//! name, u8 rank, rank × u32 dims, f32 data.

use super::{ModelConfig, SpikeError, Tensor, ToySrnn};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MSPK";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn save_checkpoint(model: &ToySrnn) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let cfg = serde_json::to_vec(&model.config).expect("config serializes");
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(&cfg);
    out.extend_from_slice(&(model.params.len() as u32).to_le_bytes());
    for t in &model.params {
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.push(t.dims.len() as u8);
        for d in &t.dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for x in &t.data {
            out.extend_from_slice(&(*x as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SpikeError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| SpikeError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, SpikeError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, SpikeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<ToySrnn, SpikeError> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4).ok() != Some(CHECKPOINT_MAGIC.as_slice()) {
        return Err(SpikeError::Checkpoint("bad magic".into()));
    }
    let version = c.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(SpikeError::Checkpoint(format!("unsupported version {version}")));
    }
    let n = c.u32()? as usize;
    let config: ModelConfig =
        serde_json::from_slice(c.take(n)?).map_err(|e| SpikeError::Checkpoint(format!("config: {e}")))?;
    let count = c.u32()? as usize;
    let mut params = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let len = c.u16()? as usize;
        let name = std::str::from_utf8(c.take(len)?)
            .map_err(|_| SpikeError::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = c.take(1)?[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(c.u32()? as usize);
        }
        let size = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let size = size.ok_or_else(|| SpikeError::Checkpoint(format!("tensor {name} too large")))?;
        let raw = c.take(size.checked_mul(4).ok_or_else(|| SpikeError::Checkpoint("size overflow".into()))?)?;
        let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64).collect();
        params.push(Tensor { name, dims, data });
    }
    if c.pos != bytes.len() {
        return Err(SpikeError::Checkpoint(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    ToySrnn::from_parts(config, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ToySrnn {
        ToySrnn::new(ModelConfig { emb_dim: 2, hidden: 4, seed: 1, ..ModelConfig::default() }).unwrap()
    }

    #[test]
    fn round_trip_preserves_f32_values() {
        let m = small();
        let loaded = load_checkpoint(&save_checkpoint(&m)).unwrap();
        assert_eq!(loaded.config, m.config);
        for (a, b) in loaded.params.iter().zip(&m.params) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.dims, b.dims);
            assert!(a.data.iter().zip(&b.data).all(|(x, y)| *x == (*y as f32) as f64));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let bytes = save_checkpoint(&small());
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(load_checkpoint(&wrong_version).unwrap_err().to_string().contains("version"));
        assert!(load_checkpoint(b"NOPE").is_err());
        assert!(load_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(load_checkpoint(&extra).is_err());
    }
}
