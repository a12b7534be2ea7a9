//! Named parameter collections and their binary container:
//!
//! ```text
//! magic "NDCK" | version u32 | count u32 |
//!   count × (name_len u32 | name utf8 | rows u64 | cols u64 | rows·cols × f64)
//! ```
//!
//! All integers and floats little-endian.

use std::fs;
use std::path::Path;

use super::DenseArray;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"NDCK";
const VERSION: u32 = 1;

/// Ordered, named trainable arrays.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    arrays: Vec<DenseArray>,
}

impl ParamSet {
    pub fn push(&mut self, name: impl Into<String>, value: DenseArray) -> usize {
        self.names.push(name.into());
        self.arrays.push(value);
        self.arrays.len() - 1
    }

    pub fn len(&self) -> usize {
        self.arrays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrays.is_empty()
    }

    pub fn get(&self, i: usize) -> &DenseArray {
        &self.arrays[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut DenseArray {
        &mut self.arrays[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn arrays(&self) -> &[DenseArray] {
        &self.arrays
    }

    /// Total scalar count.
    pub fn size(&self) -> usize {
        self.arrays.iter().map(|a| a.values().len()).sum()
    }

    /// Flattened copy of every value, in parameter order.
    pub fn flatten(&self) -> Vec<f64> {
        self.arrays.iter().flat_map(|a| a.values().iter().copied()).collect()
    }

    /// Overwrites every value from a flat vector laid out like [`ParamSet::flatten`].
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.size() {
            return Err(Error::Shape {
                op: "assign_flat",
                lhs: (self.size(), 1),
                rhs: (flat.len(), 1),
            });
        }
        let mut offset = 0;
        for a in &mut self.arrays {
            let n = a.values().len();
            a.values_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for (name, a) in self.names.iter().zip(&self.arrays) {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(a.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(a.cols() as u64).to_le_bytes());
            for v in a.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let count = r.u32()?;
        let mut set = ParamSet::default();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Checkpoint("name is not utf-8".into()))?
                .to_owned();
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Checkpoint("array too large".into()))?;
            let values = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            set.push(name, DenseArray::from_vec(rows, cols, values)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(set)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn write_checkpoint(path: impl AsRef<Path>, set: &ParamSet) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, set.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<ParamSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ParamSet::from_bytes(&bytes)
}
