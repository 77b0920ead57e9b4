//! Named trainable tensors, batch-norm running statistics and initialization.

use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tensor::{Element, RunningStats, Tensor};

/// A trainable tensor with a unique hierarchical name.
#[derive(Debug, Clone)]
pub struct Parameter<T: Element = f32> {
    pub name: String,
    pub value: Tensor<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatsId(pub(crate) usize);

/// Running statistics slot of one batch-norm layer.
#[derive(Debug)]
pub struct BnStats {
    pub name: String,
    pub channels: usize,
    pub running: Mutex<Option<RunningStats>>,
}

impl Clone for BnStats {
    fn clone(&self) -> Self {
        BnStats {
            name: self.name.clone(),
            channels: self.channels,
            running: Mutex::new(self.running.lock().unwrap().clone()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore<T: Element = f32> {
    pub(crate) params: Vec<Parameter<T>>,
    pub(crate) stats: Vec<BnStats>,
}

impl<T: Element> ParamStore<T> {
    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn parameters(&self) -> &[Parameter<T>] {
        &self.params
    }

    pub fn stats(&self) -> &[BnStats] {
        &self.stats
    }

    pub fn count(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Replaces a parameter's values, keeping its shape and trainability.
    pub fn set(&mut self, index: usize, values: Vec<T>) -> Result<()> {
        let p = &mut self.params[index];
        if values.len() != p.value.numel() {
            return Err(Error::shape(
                "set_parameter",
                format!("{} holds {} values, got {}", p.name, p.value.numel(), values.len()),
            ));
        }
        p.value = Tensor::parameter(p.value.shape(), values)?;
        Ok(())
    }

    /// Installs `value` itself (not a copy) as a parameter, so gradients of
    /// a forward pass accumulate into the caller's tensor.
    pub fn replace(&mut self, index: usize, value: Tensor<T>) -> Result<()> {
        let p = &mut self.params[index];
        if value.shape() != p.value.shape() {
            return Err(Error::shape(
                "replace_parameter",
                format!("{} has shape {:?}, got {:?}", p.name, p.value.shape(), value.shape()),
            ));
        }
        p.value = value;
        Ok(())
    }

    pub fn set_by_name(&mut self, name: &str, values: Vec<T>) -> Result<()> {
        let i = self
            .find(name)
            .ok_or_else(|| Error::InvalidArgument(format!("no parameter named {name}")))?;
        self.set(i, values)
    }

    pub fn zero_grads(&self) {
        for p in &self.params {
            p.value.zero_grad();
        }
    }

    pub fn cast<U: Element>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Parameter {
                    name: p.name.clone(),
                    value: Tensor::parameter(p.value.shape(), p.value.cast::<U>().to_vec()).expect("shape preserved"),
                })
                .collect(),
            stats: self.stats.clone(),
        }
    }
}

/// Allocates parameters in construction order from one seeded stream.
pub struct ParamBuilder {
    store: ParamStore<f32>,
    rng: ChaCha8Rng,
}

impl ParamBuilder {
    pub fn new(seed: u64) -> Self {
        ParamBuilder {
            store: ParamStore::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn push(&mut self, name: String, shape: &[usize], data: Vec<f32>) -> ParamId {
        debug_assert!(self.store.find(&name).is_none(), "duplicate parameter {name}");
        self.store.params.push(Parameter {
            name,
            value: Tensor::parameter(shape, data).expect("shape matches data"),
        });
        ParamId(self.store.params.len() - 1)
    }

    /// Kernel `[Cout, Cin, kh, kw]` drawn from a normal with std
    /// `sqrt(2 / (Cin·kh·kw))`, resampling draws beyond two deviations.
    pub fn kernel(&mut self, name: impl Into<String>, shape: [usize; 4]) -> ParamId {
        let fan_in = shape[1] * shape[2] * shape[3];
        let std = (2.0 / fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| loop {
                let z: f64 = self.rng.sample(StandardNormal);
                if z.abs() <= 2.0 {
                    break (z * std) as f32;
                }
            })
            .collect();
        self.push(name.into(), &shape, data)
    }

    pub fn constant(&mut self, name: impl Into<String>, len: usize, value: f32) -> ParamId {
        self.push(name.into(), &[len], vec![value; len])
    }

    pub fn stats(&mut self, name: impl Into<String>, channels: usize) -> StatsId {
        self.store.stats.push(BnStats {
            name: name.into(),
            channels,
            running: Mutex::new(None),
        });
        StatsId(self.store.stats.len() - 1)
    }

    pub fn finish(self) -> ParamStore<f32> {
        self.store
    }
}
