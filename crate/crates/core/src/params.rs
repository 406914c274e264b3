//! Named parameter store: weights, their gradients, and non-trainable
//! buffers (normalization running statistics).
//!
//! Models hold [`ParamId`]s; each forward pass leafs the current values onto
//! a fresh tape, and [`ParamStore::accumulate_grads`] routes gradients back
//! after the tape's backward pass. Registration order is fixed per model
//! build, so initialization from a seeded RNG is deterministic.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Grads, Tape};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ParamId(pub usize);

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EntryKind {
    /// Trainable weight: receives gradients, stepped by the optimizer.
    Weight,
    /// Persistent state saved in checkpoints but never optimized.
    Buffer,
}

pub struct Entry<S> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<S>,
    pub grad: Vec<S>,
    pub kind: EntryKind,
}

impl<S: Scalar> Entry<S> {
    pub fn is_weight(&self) -> bool {
        self.kind == EntryKind::Weight
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

/// Weight initialization schemes. `KaimingUniform` draws from
/// U(-b, b) with b = sqrt(6 / fan_in).
#[derive(Clone, Copy, Debug)]
pub enum Init {
    KaimingUniform { fan_in: usize },
    Uniform { lo: f64, hi: f64 },
    Zeros,
    Ones,
    Const(f64),
}

pub struct ParamStore<S> {
    entries: Vec<Entry<S>>,
    index: HashMap<String, ParamId>,
}

impl<S: Scalar> Default for ParamStore<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore { entries: Vec::new(), index: HashMap::new() }
    }

    pub fn register(
        &mut self,
        name: &str,
        shape: &[usize],
        init: Init,
        kind: EntryKind,
        rng: &mut ChaCha8Rng,
    ) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::invalid_arg("register", format!("duplicate parameter name {name}")));
        }
        let n: usize = shape.iter().product();
        // Randomness is always drawn as f64 so the f32 and f64 instantiations
        // of a model consume identical RNG streams.
        let data: Vec<S> = match init {
            Init::KaimingUniform { fan_in } => {
                let b = (6.0 / fan_in.max(1) as f64).sqrt();
                (0..n).map(|_| S::c(rng.gen_range(-b..b))).collect()
            }
            Init::Uniform { lo, hi } => (0..n).map(|_| S::c(rng.gen_range(lo..hi))).collect(),
            Init::Zeros => vec![S::zero(); n],
            Init::Ones => vec![S::one(); n],
            Init::Const(v) => vec![S::c(v); n],
        };
        let id = ParamId(self.entries.len());
        self.entries.push(Entry {
            name: name.to_string(),
            shape: shape.to_vec(),
            data,
            grad: vec![S::zero(); n],
            kind,
        });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn entry(&self, id: ParamId) -> &Entry<S> {
        &self.entries[id.0]
    }

    pub fn entry_mut(&mut self, id: ParamId) -> &mut Entry<S> {
        &mut self.entries[id.0]
    }

    pub fn lookup(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Entry<S>)> {
        self.entries.iter().enumerate().map(|(i, e)| (ParamId(i), e))
    }

    /// Total element count over trainable weights.
    pub fn weight_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_weight()).map(|e| e.numel()).sum()
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.iter_mut().for_each(|g| *g = S::zero());
        }
    }

    /// Route tape gradients into `grad` accumulators of linked weights.
    pub fn accumulate_grads(&mut self, tape: &Tape<S>, grads: &Grads<S>) {
        for (node_id, pid) in tape.param_links() {
            let entry = &mut self.entries[pid.0];
            if !entry.is_weight() {
                continue;
            }
            if let Some(g) = grads.raw(node_id) {
                for (acc, gi) in entry.grad.iter_mut().zip(g) {
                    *acc = *acc + *gi;
                }
            }
        }
    }
}
