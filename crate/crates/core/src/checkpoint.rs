//! Binary checkpoint format.
//!
//! All integers are little-endian `u32` unless noted:
//!
//! ```text
//! "BCNN" version
//! input_size n_channels channels[n] classes model_seed
//! train_seed:u64 epoch
//! n_tensors
//! { name_len name_bytes rank extents[rank] f32_payload }*
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ParameterSet};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"BCNN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub params: ParameterSet<f32>,
    pub train_seed: u64,
    /// Epochs completed when the snapshot was taken.
    pub epoch: u32,
}

impl Checkpoint {
    pub fn new(params: ParameterSet<f32>, train_seed: u64, epoch: u32) -> Self {
        Self {
            version: FORMAT_VERSION,
            params,
            train_seed,
            epoch,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        self.params.config()
    }
}

fn u32_of(what: &str, v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Config(format!("{what} {v} does not fit in 32 bits")))
}

pub fn encode(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let cfg = ckpt.config();
    if cfg.input_channels != 1 {
        return Err(Error::Config(format!(
            "checkpoints store single-channel models, got {} input channels",
            cfg.input_channels
        )));
    }
    let mut out = Vec::with_capacity(64 + 4 * ckpt.params.parameter_count());
    let put = |out: &mut Vec<u8>, v: u32| out.extend_from_slice(&v.to_le_bytes());

    out.extend_from_slice(MAGIC);
    put(&mut out, ckpt.version);
    put(&mut out, u32_of("input size", cfg.input_size)?);
    put(&mut out, u32_of("stage count", cfg.channels.len())?);
    for &c in &cfg.channels {
        put(&mut out, u32_of("channel width", c)?);
    }
    put(&mut out, u32_of("class count", cfg.classes)?);
    put(&mut out, cfg.seed);
    out.extend_from_slice(&ckpt.train_seed.to_le_bytes());
    put(&mut out, ckpt.epoch);

    put(&mut out, u32_of("tensor count", ckpt.params.len())?);
    for (name, t) in ckpt.params.iter() {
        put(&mut out, u32_of("name length", name.len())?);
        out.extend_from_slice(name.as_bytes());
        put(&mut out, t.rank() as u32);
        for &d in t.shape() {
            put(&mut out, u32_of("extent", d)?);
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Integrity(format!(
                "file truncated while reading {what} at byte {}",
                self.pos
            )));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        Ok(self.u32(what)? as usize)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic bytes)".into()));
    }
    r.pos = 4;
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    let input_size = r.usize("input size")?;
    let stages = r.usize("stage count")?;
    // each entry needs four bytes; reject absurd counts before allocating
    if stages > bytes.len() / 4 {
        return Err(Error::Integrity(format!("stage count {stages} exceeds file size")));
    }
    let channels = (0..stages)
        .map(|_| r.usize("channel width"))
        .collect::<Result<Vec<_>>>()?;
    let config = ModelConfig {
        input_size,
        input_channels: 1,
        channels,
        classes: r.usize("class count")?,
        seed: r.u32("model seed")?,
    };
    let train_seed = r.u64("training seed")?;
    let epoch = r.u32("epoch")?;
    config.validate()?;

    let count = r.usize("tensor count")?;
    let expected = config.parameter_shapes();
    if count != expected.len() {
        return Err(Error::Consistency(format!(
            "config implies {} tensors, file declares {count}",
            expected.len()
        )));
    }
    let mut tensors = Vec::with_capacity(count);
    for (want_name, want_shape) in &expected {
        let len = r.usize("name length")?;
        let name = std::str::from_utf8(r.take(len, "tensor name")?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.usize("rank")?;
        if rank > 4 {
            return Err(Error::Format(format!("tensor {name} has rank {rank}")));
        }
        let shape = (0..rank)
            .map(|_| r.usize("extent"))
            .collect::<Result<Vec<_>>>()?;
        if &name != want_name || &shape != want_shape {
            return Err(Error::Consistency(format!(
                "expected {want_name} {want_shape:?}, file has {name} {shape:?}"
            )));
        }
        let n: usize = shape.iter().product();
        let payload = r.take(4 * n, &format!("payload of {name}"))?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        tensors.push((name, Tensor::new(&shape, data)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::Integrity(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - r.pos
        )));
    }
    Ok(Checkpoint {
        version,
        params: ParameterSet::from_tensors(config, tensors)?,
        train_seed,
        epoch,
    })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    fs::write(path, encode(ckpt)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
