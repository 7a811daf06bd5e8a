//! Versioned binary checkpoint of named tensors.
//!
//! Layout (little endian): magic `VCNTENS1`, `u32` tensor count, then per
//! tensor: `u32` name length, UTF-8 name, `u32` rank, `u64` per dimension,
//! and the raw `f64` values. Values are stored bit-for-bit.

use std::io::{Read, Write};
use std::path::Path;

use super::{ParamStore, Tensor, TensorError};

const MAGIC: &[u8; 8] = b"VCNTENS1";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint does not match model: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub fn write_tensors<W: Write>(mut w: W, tensors: &[(&str, &Tensor)]) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for d in t.shape() {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_bits().to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, CheckpointError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>, CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let count = read_u32(&mut r)?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        let rank = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(&mut r)? as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_bits(read_u64(&mut r)?));
        }
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}

pub fn save_tensors(path: &Path, tensors: &[(&str, &Tensor)]) -> Result<(), CheckpointError> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_tensors(&mut w, tensors)?;
    w.flush()?;
    Ok(())
}

pub fn load_tensors(path: &Path) -> Result<Vec<(String, Tensor)>, CheckpointError> {
    let f = std::fs::File::open(path)?;
    read_tensors(std::io::BufReader::new(f))
}

impl ParamStore {
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let named: Vec<(&str, &Tensor)> = self.iter().map(|p| (p.name.as_str(), &p.value)).collect();
        save_tensors(path, &named)
    }

    /// Overwrites values from a checkpoint whose names and shapes match exactly.
    pub fn load_values(&mut self, path: &Path) -> Result<(), CheckpointError> {
        let loaded = load_tensors(path)?;
        if loaded.len() != self.len() {
            return Err(CheckpointError::Mismatch(format!(
                "expected {} tensors, found {}",
                self.len(),
                loaded.len()
            )));
        }
        for (p, (name, t)) in self.iter_mut().zip(loaded) {
            if p.name != name || p.value.shape() != t.shape() {
                return Err(CheckpointError::Mismatch(format!("{} vs {name}", p.name)));
            }
            p.value = t;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(values in proptest::collection::vec(any::<f64>(), 1..40)) {
            let n = values.len();
            let t = Tensor::new(vec![n], values).unwrap();
            let mut buf = Vec::new();
            write_tensors(&mut buf, &[("w", &t)]).unwrap();
            let back = read_tensors(&buf[..]).unwrap();
            prop_assert_eq!(back.len(), 1);
            prop_assert_eq!(&back[0].0, "w");
            let bits: Vec<u64> = t.data().iter().map(|v| v.to_bits()).collect();
            let back_bits: Vec<u64> = back[0].1.data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(bits, back_bits);
        }
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(matches!(read_tensors(&b"NOPE0000"[..]), Err(CheckpointError::BadMagic)));
    }

    #[test]
    fn store_round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        let mut store = ParamStore::new();
        store.add("a", Tensor::matrix(2, 2, vec![0.1, 0.2, 0.3, 1e-300]).unwrap());
        store.add("b", Tensor::vector(vec![-4.5]));
        store.save(&path).unwrap();
        let mut other = store.clone();
        other.zero_values();
        other.load_values(&path).unwrap();
        assert_eq!(other, store);
    }
}
