//! Parameter checkpoints.
//!
//! Layout (little endian):
//!
//! ```text
//! b"HHVGCKPT"  u32 version  u32 entry_count
//! per entry:   u32 name_len  name (utf-8)  u32 ndim  u64 dims[ndim]  f64 values[prod(dims)]
//! ```

use std::io::{Read, Write};

use super::ParamSet;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HHVGCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Writes every parameter of every set, names prefixed with `"{prefix}."`.
pub fn write_checkpoint<W: Write>(mut w: W, sets: &[(&str, &ParamSet)]) -> Result<()> {
    let count: usize = sets.iter().map(|(_, s)| s.entries().len()).sum();
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&u32::try_from(count).map_err(|_| Error::contract("too many entries"))?.to_le_bytes())?;
    for (prefix, set) in sets {
        for p in set.entries() {
            let name = format!("{prefix}.{}", p.name);
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(p.shape.len() as u32).to_le_bytes())?;
            for d in &p.shape {
                w.write_all(&(*d as u64).to_le_bytes())?;
            }
            for v in &p.value {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Vec<CheckpointEntry>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let count = read_u32(&mut r)?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("entry name is not utf-8".into()))?;
        let ndim = read_u32(&mut r)? as usize;
        let shape = (0..ndim).map(|_| read_u64(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(f64::from_bits(read_u64(&mut r)?));
        }
        out.push(CheckpointEntry { name, shape, values });
    }
    Ok(out)
}

/// Copies matching `"{prefix}.{name}"` entries into `set`; every parameter must be present.
pub fn load_into(entries: &[CheckpointEntry], prefix: &str, set: &mut ParamSet) -> Result<()> {
    for p in set.entries_mut() {
        let full = format!("{prefix}.{}", p.name);
        let e = entries
            .iter()
            .find(|e| e.name == full)
            .ok_or_else(|| Error::Format(format!("checkpoint lacks `{full}`")))?;
        if e.shape != p.shape {
            return Err(Error::Format(format!("shape mismatch for `{full}`: {:?} vs {:?}", e.shape, p.shape)));
        }
        p.value.copy_from_slice(&e.values);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(values in prop::collection::vec(any::<f64>(), 1..40), cols in 1usize..5) {
            let rows = values.len() / cols;
            prop_assume!(rows > 0);
            let mut set = ParamSet::new();
            set.add("w", &[rows, cols], values[..rows * cols].to_vec()).unwrap();
            set.add("b", &[1], vec![values[0]]).unwrap();
            let mut buf = Vec::new();
            write_checkpoint(&mut buf, &[("fm", &set)]).unwrap();
            let entries = read_checkpoint(buf.as_slice()).unwrap();
            let mut fresh = set.clone();
            for p in fresh.entries_mut() { p.value.iter_mut().for_each(|v| *v = 0.0); }
            load_into(&entries, "fm", &mut fresh).unwrap();
            prop_assert!(fresh.same_values(&set));
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_checkpoint(&b"NOTACKPT\x01\0\0\0\0\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &[]).unwrap();
        buf[8] = 9;
        assert!(matches!(read_checkpoint(buf.as_slice()), Err(Error::Format(_))));
    }
}
