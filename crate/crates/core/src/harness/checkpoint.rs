//! Binary parameter files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "VPRP" | u32 version | u32 record count
//! record: u32 name length | name (UTF-8) | u32 ndim | u32 dims[ndim] | f32 values[prod(dims)]
//! u64 FNV-1a hash of every preceding byte
//! ```
//!
//! Names are `<variant>.<parameter>`, e.g. `mvprop.embed.conv1.weight`.

use crate::planners::{Planner, PlannerConfig, Variant};
use crate::tensor::DiffArray;
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"VPRP";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checksum mismatch: stored {stored:016x}, computed {computed:016x}")]
    Checksum { stored: u64, computed: u64 },
    #[error("malformed checkpoint: {0}")]
    Format(String),
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn encode(planner: &Planner<f32>) -> Vec<u8> {
    let params = planner.named_params();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, p) in params {
        let full = format!("{}.{name}", planner.variant());
        out.extend_from_slice(&(full.len() as u32).to_le_bytes());
        out.extend_from_slice(full.as_bytes());
        out.extend_from_slice(&(p.shape().len() as u32).to_le_bytes());
        for &d in p.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in p.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sum = fnv1a(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| CheckpointError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Planner<f32>, CheckpointError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < 20 {
        return Err(CheckpointError::Format("file too short".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    let computed = fnv1a(body);
    if stored != computed {
        return Err(CheckpointError::Checksum { stored, computed });
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let count = r.u32()? as usize;
    let mut variant: Option<Variant> = None;
    let mut names = Vec::with_capacity(count);
    let mut arrays = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| CheckpointError::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let (prefix, rest) = name
            .split_once('.')
            .ok_or_else(|| CheckpointError::Format(format!("tensor name `{name}` has no variant prefix")))?;
        let v: Variant = prefix.parse().map_err(CheckpointError::Format)?;
        if variant.is_some_and(|known| known != v) {
            return Err(CheckpointError::Format("tensors from different variants".into()));
        }
        variant = Some(v);
        let ndim = r.u32()? as usize;
        let dims = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let n: usize = dims.iter().product();
        let raw = r.take(n.checked_mul(4).ok_or_else(|| CheckpointError::Format("tensor too large".into()))?)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let array = DiffArray::param(dims, values).map_err(|e| CheckpointError::Format(e.to_string()))?;
        names.push(rest.to_string());
        arrays.push(array);
    }
    if r.pos != body.len() {
        return Err(CheckpointError::Format("trailing bytes after the last tensor".into()));
    }
    let variant = variant.ok_or_else(|| CheckpointError::Format("no tensors".into()))?;
    let find = |n: &str| names.iter().position(|x| x == n);
    let conv1 = find("embed.conv1.weight").ok_or_else(|| CheckpointError::Format("missing embed.conv1.weight".into()))?;
    let hidden = arrays[conv1].shape()[0];
    let d_rew = match find("vin.p_r") {
        Some(i) => arrays[i].shape()[1],
        None => 1,
    };
    let config = PlannerConfig {
        variant,
        hidden_channels: hidden,
        d_rew,
    };
    let expected: Vec<&str> = Planner::<f32>::new(config, &mut rand::rngs::mock::StepRng::new(0, 0))
        .named_params()
        .iter()
        .map(|(n, _)| *n)
        .collect();
    if expected != names.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(CheckpointError::Format(format!(
            "tensor names {names:?} do not match the {variant} layout"
        )));
    }
    Planner::from_params(config, arrays).map_err(|e| CheckpointError::Format(e.to_string()))
}

pub fn save(planner: &Planner<f32>, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, encode(planner))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Planner<f32>, CheckpointError> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn planner(v: Variant) -> Planner<f32> {
        Planner::new(PlannerConfig::new(v), &mut ChaCha8Rng::seed_from_u64(3))
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for v in Variant::ALL {
            let p = planner(v);
            let back = decode(&encode(&p)).unwrap();
            for ((na, a), (nb, b)) in p.named_params().into_iter().zip(back.named_params()) {
                assert_eq!(na, nb);
                let bits = |x: &DiffArray<f32>| x.values().iter().map(|f| f.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(a), bits(b));
                assert_eq!(a.shape(), b.shape());
            }
            assert_eq!(back.config(), p.config());
        }
    }

    #[test]
    fn names_carry_the_variant() {
        let bytes = encode(&planner(Variant::MvProp));
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.contains("mvprop.embed.conv1.weight"));
    }

    #[test]
    fn corruption_is_refused() {
        let mut bytes = encode(&planner(Variant::VProp));
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(decode(&bytes), Err(CheckpointError::Checksum { .. })));
        assert!(matches!(decode(b"NOPE...................."), Err(CheckpointError::BadMagic)));
        let good = encode(&planner(Variant::VProp));
        assert!(decode(&good[..good.len() - 3]).is_err());
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.vprp");
        let p = planner(Variant::Vin);
        save(&p, &path).unwrap();
        assert_eq!(load(&path).unwrap(), p);
    }
}
