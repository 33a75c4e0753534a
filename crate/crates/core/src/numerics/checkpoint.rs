//! `MVDM1` checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"MVDM1"
//! u64            tensor count
//! per tensor:
//!   u32          name length in bytes
//!   [u8]         UTF-8 name
//!   u32          rank
//!   u64 x rank   dims
//!   f64 x n      values, n = product of dims
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"MVDM1";

pub fn write_tensors<'a, W: Write>(
    mut w: W,
    tensors: impl ExactSizeIterator<Item = (&'a str, &'a Tensor)>,
) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(tensors.len() as u64).to_le_bytes())?;
    for (name, t) in tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn read_tensors<R: Read>(mut r: R) -> std::result::Result<Vec<(String, Tensor)>, String> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(|e| e.to_string())?;
    if &magic != MAGIC {
        return Err("bad magic".into());
    }
    let count = read_u64(&mut r)?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(|e| e.to_string())?;
        let name = String::from_utf8(name).map_err(|e| e.to_string())?;
        let rank = read_u32(&mut r)? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(read_u64(&mut r)? as usize);
        }
        let n: usize = dims.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf).map_err(|e| e.to_string())?;
            data.push(f64::from_le_bytes(buf));
        }
        out.push((name, Tensor::new(dims, data).map_err(|e| e.to_string())?));
    }
    Ok(out)
}

fn read_u64<R: Read>(r: &mut R) -> std::result::Result<u64, String> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| e.to_string())?;
    Ok(u64::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> std::result::Result<u32, String> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| e.to_string())?;
    Ok(u32::from_le_bytes(b))
}

/// Writes every parameter value of `store` (accumulators are not saved).
pub fn save(store: &ParamStore, path: &Path) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    let items: Vec<_> = store.iter().collect();
    write_tensors(f, items.into_iter())?;
    Ok(())
}

pub fn load_tensors(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let f = BufReader::new(File::open(path)?);
    read_tensors(f).map_err(|message| Error::Checkpoint { path: path.to_path_buf(), message })
}

/// Overwrites the values of parameters already registered in `store`.
/// Every stored parameter must be present with a matching shape.
pub fn load_into(store: &mut ParamStore, path: &Path) -> Result<()> {
    let tensors = load_tensors(path)?;
    for id in store.ids().collect::<Vec<_>>() {
        let name = store.name(id).to_string();
        let Some((_, t)) = tensors.iter().find(|(n, _)| *n == name) else {
            return Err(Error::Checkpoint { path: path.to_path_buf(), message: format!("missing tensor {name}") });
        };
        if t.shape() != store.value(id).shape() {
            return Err(Error::Checkpoint {
                path: path.to_path_buf(),
                message: format!("tensor {name} has shape {:?}", t.shape()),
            });
        }
        *store.value_mut(id) = t.clone();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut s = ParamStore::new();
        s.insert("a.w", Tensor::matrix(2, 2, vec![1.5, -0.0, f64::MIN_POSITIVE, 1e300]).unwrap());
        s.insert("b", Tensor::scalar(std::f64::consts::PI));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        save(&s, &p).unwrap();
        let back = load_tensors(&p).unwrap();
        assert_eq!(back.len(), 2);
        for ((n1, t1), (n2, t2)) in s.iter().zip(&back) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape(), t2.shape());
            let b1: Vec<u64> = t1.data().iter().map(|v| v.to_bits()).collect();
            let b2: Vec<u64> = t2.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(b1, b2);
        }
        // re-saving gives identical bytes
        let p2 = dir.path().join("m2.ckpt");
        let mut s2 = s.clone();
        load_into(&mut s2, &p).unwrap();
        save(&s2, &p2).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad");
        std::fs::write(&p, b"NOPE!").unwrap();
        assert!(load_tensors(&p).is_err());
    }
}
