//! Binary checkpoint format (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "VLNCKPT\0"
//! version      u32      1
//! config hash  32 bytes SHA-256 of the model config's canonical TOML
//! entries      u64
//! per entry:
//!   name length u64, name bytes (UTF-8)
//!   rank u64, extents u64 × rank
//!   values f32 × product(extents)
//! ```
//!
//! Entries are model parameters (by name), batch-norm running statistics
//! (`<layer>.running_mean`, `<layer>.running_var`), optimizer accumulators
//! (`optim.<parameter>`) and training counters (`train.*`, rank 0).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Vln;
use crate::tensor::RunningStats;
use crate::train::RmsProp;

pub const MAGIC: &[u8; 8] = b"VLNCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: [u8; 32],
    pub entries: Vec<Entry>,
}

impl Checkpoint {
    pub fn new(config_hash: [u8; 32]) -> Self {
        Checkpoint {
            config_hash,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], values: Vec<f32>) {
        self.entries.push(Entry {
            name: name.into(),
            shape: shape.to_vec(),
            values,
        });
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn scalar(&self, name: &str) -> Option<f32> {
        self.get(name).and_then(|e| e.values.first().copied())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(&self.config_hash);
        b.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for e in &self.entries {
            b.extend_from_slice(&(e.name.len() as u64).to_le_bytes());
            b.extend_from_slice(e.name.as_bytes());
            b.extend_from_slice(&(e.shape.len() as u64).to_le_bytes());
            for &d in &e.shape {
                b.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &e.values {
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let config_hash: [u8; 32] = r.take(32)?.try_into().unwrap();
        let count = r.u64()?;
        let mut entries = Vec::new();
        for _ in 0..count {
            let len = r.u64()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::Checkpoint("entry name is not UTF-8".into()))?;
            let rank = r.u64()? as usize;
            let shape = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(
                n.checked_mul(4)
                    .ok_or_else(|| Error::Checkpoint("entry too large".into()))?,
            )?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            entries.push(Entry { name, shape, values });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Checkpoint { config_hash, entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("partial");
        fs::write(&tmp, self.to_bytes()).map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_bytes(&bytes).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parameters and running statistics of a model.
pub fn model_checkpoint(model: &Vln) -> Checkpoint {
    let mut c = Checkpoint::new(model.config().hash());
    for p in model.parameters() {
        c.push(p.name.clone(), p.value.shape(), p.value.to_vec());
    }
    for s in model.store().stats() {
        if let Some(rs) = s.running.lock().unwrap().as_ref() {
            c.push(format!("{}.running_mean", s.name), &[s.channels], rs.mean.clone());
            c.push(format!("{}.running_var", s.name), &[s.channels], rs.var.clone());
        }
    }
    c
}

pub fn push_optimizer(c: &mut Checkpoint, model: &Vln, opt: &RmsProp) {
    for (p, acc) in model.parameters().iter().zip(&opt.accumulators) {
        c.push(format!("optim.{}", p.name), p.value.shape(), acc.clone());
    }
}

/// Loads parameters and running statistics into `model`. The config hash
/// must match.
pub fn restore_model(model: &mut Vln, c: &Checkpoint) -> Result<()> {
    if c.config_hash != model.config().hash() {
        return Err(Error::Checkpoint(
            "checkpoint was written for a different model configuration".into(),
        ));
    }
    let names: Vec<(String, Vec<usize>)> = model
        .parameters()
        .iter()
        .map(|p| (p.name.clone(), p.value.shape().to_vec()))
        .collect();
    for (i, (name, shape)) in names.iter().enumerate() {
        let e = c
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))?;
        if &e.shape != shape {
            return Err(Error::Checkpoint(format!(
                "{name}: checkpoint shape {:?}, model shape {shape:?}",
                e.shape
            )));
        }
        model.store_mut().set(i, e.values.clone())?;
    }
    for s in model.store().stats() {
        let mean = c.get(&format!("{}.running_mean", s.name));
        let var = c.get(&format!("{}.running_var", s.name));
        let restored = match (mean, var) {
            (Some(m), Some(v)) if m.values.len() == s.channels && v.values.len() == s.channels => Some(RunningStats {
                mean: m.values.clone(),
                var: v.values.clone(),
            }),
            (None, None) => None,
            _ => return Err(Error::Checkpoint(format!("{}: incomplete running statistics", s.name))),
        };
        *s.running.lock().unwrap() = restored;
    }
    Ok(())
}

pub fn restore_optimizer(opt: &mut RmsProp, model: &Vln, c: &Checkpoint) -> Result<()> {
    for (p, acc) in model.parameters().iter().zip(opt.accumulators.iter_mut()) {
        let e = c
            .get(&format!("optim.{}", p.name))
            .ok_or_else(|| Error::Checkpoint(format!("missing optimizer state for {}", p.name)))?;
        if e.values.len() != acc.len() {
            return Err(Error::Checkpoint(format!(
                "optimizer state for {} has wrong size",
                p.name
            )));
        }
        acc.clone_from(&e.values);
    }
    Ok(())
}
