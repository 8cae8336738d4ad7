//! Named parameter blocks and the SPUW container.
//!
//! ```text
//! "SPUW" 0x01 | count: u32 | count * record
//! record: name_len: u16 | name: utf-8 | rank: u8 | dims: u32 * rank | payload: f32, C order
//! ```

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::{ArchConfig, ParamRole, ParamSpec};
use crate::formats::{put_f32s, Reader, FORMAT_VERSION};
use crate::{Error, Result};

pub const SPUW_MAGIC: &[u8; 4] = b"SPUW";

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

/// Ordered parameter blocks, looked up by name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightStore {
    params: Vec<Param>,
    index: BTreeMap<String, usize>,
}

impl WeightStore {
    pub fn new() -> Self {
        WeightStore::default()
    }

    pub fn insert(&mut self, param: Param) -> Result<()> {
        let n: usize = param.shape.iter().product();
        if n != param.values.len() {
            return Err(Error::Weights {
                layer: param.name,
                reason: format!("shape {:?} needs {n} values", param.shape),
            });
        }
        if self.index.contains_key(&param.name) {
            return Err(Error::Weights {
                layer: param.name,
                reason: "duplicate parameter".into(),
            });
        }
        self.index.insert(param.name.clone(), self.params.len());
        self.params.push(param);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Param> {
        self.index
            .get(name)
            .map(|&i| &self.params[i])
            .ok_or_else(|| Error::Weights {
                layer: name.to_string(),
                reason: "missing".into(),
            })
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Checks names and shapes against the architecture manifest: every
    /// expected block present with its exact shape, nothing extra.
    pub fn validate(&self, arch: &ArchConfig) -> Result<()> {
        let manifest = arch.manifest();
        for spec in &manifest {
            let p = self.get(&spec.name)?;
            if p.shape != spec.shape {
                return Err(Error::Weights {
                    layer: spec.name.clone(),
                    reason: format!("shape {:?}, expected {:?}", p.shape, spec.shape),
                });
            }
        }
        if self.params.len() != manifest.len() {
            let known: std::collections::BTreeSet<&str> =
                manifest.iter().map(|s| s.name.as_str()).collect();
            if let Some(extra) = self.params.iter().find(|p| !known.contains(p.name.as_str())) {
                return Err(Error::Weights {
                    layer: extra.name.clone(),
                    reason: "not part of the architecture".into(),
                });
            }
        }
        Ok(())
    }

    /// Seeded initialization: He-uniform kernels, small biases, and batch-norm
    /// statistics near the identity.
    pub fn random(arch: &ArchConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = WeightStore::new();
        for ParamSpec { name, shape, role } in arch.manifest() {
            let n: usize = shape.iter().product();
            let values: Vec<f32> = match role {
                ParamRole::Kernel => {
                    let fan_in: usize = shape[1..].iter().product();
                    let bound = (6.0 / fan_in as f32).sqrt();
                    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
                }
                ParamRole::Bias | ParamRole::BnShift | ParamRole::BnMean => {
                    (0..n).map(|_| rng.gen_range(-0.05..0.05)).collect()
                }
                ParamRole::BnScale => (0..n).map(|_| rng.gen_range(0.8..1.2)).collect(),
                ParamRole::BnVar => (0..n).map(|_| rng.gen_range(0.5..1.5)).collect(),
            };
            store
                .insert(Param { name, shape, values })
                .expect("manifest names are unique");
        }
        store
    }

    /// Every block filled with `value`; batch-norm variances set to one.
    pub fn constant(arch: &ArchConfig, value: f32) -> Self {
        let mut store = WeightStore::new();
        for ParamSpec { name, shape, role } in arch.manifest() {
            let n = shape.iter().product();
            let v = if role == ParamRole::BnVar { 1.0 } else { value };
            store
                .insert(Param {
                    name,
                    shape,
                    values: vec![v; n],
                })
                .expect("manifest names are unique");
        }
        store
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SPUW_MAGIC);
        out.push(FORMAT_VERSION);
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.push(p.shape.len() as u8);
            for &d in &p.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            put_f32s(&mut out, &p.values);
        }
        out
    }

    /// Parses a SPUW container without checking it against an architecture.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new("SPUW", bytes);
        r.header(SPUW_MAGIC)?;
        let count = r.u32()?;
        let mut store = WeightStore::new();
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|e| Error::format("SPUW", format!("parameter name: {e}")))?
                .to_string();
            let rank = r.u8()? as usize;
            let shape = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| Error::format("SPUW", format!("`{name}` shape overflows")))?;
            let values = r.f32s(n)?;
            store.insert(Param {
                name,
                shape,
                values,
            })?;
        }
        r.finish()?;
        Ok(store)
    }
}

pub fn save_weights(store: &WeightStore) -> Vec<u8> {
    store.to_bytes()
}

/// Parses and validates against `arch`; nothing is returned on any failure.
pub fn load_weights(bytes: &[u8], arch: &ArchConfig) -> Result<WeightStore> {
    let store = WeightStore::from_bytes(bytes)?;
    store.validate(arch)?;
    Ok(store)
}
