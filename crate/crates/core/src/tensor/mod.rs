//! Dense tensor engine with reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every operation of one forward pass; [`Tape::backward`]
//! replays the recorded backward rules in reverse order and returns the
//! gradients of all leaves. Tapes are built per forward pass and discarded
//! after backward; there is no higher-order differentiation.
//!
//! Tensors are handles into the tape arena: cheap to copy, immutable after
//! construction. Gradients accumulate outside the nodes in a separate
//! [`Grads`] buffer, so repeated backward passes over fresh tapes with the
//! same inputs produce bit-identical results.

mod broadcast;
mod kernels;
mod ops;

pub use broadcast::broadcast_shapes;
pub use ops::concat;
pub(crate) use kernels::{col2im, im2col, mm_nn, mm_nt, mm_tn};

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;
use std::cell::RefCell;

pub(crate) struct Node<S> {
    pub shape: Vec<usize>,
    pub value: Vec<S>,
    pub requires_grad: bool,
    pub back: Option<BackFn<S>>,
}

/// Backward rule: receives the tape nodes, the fully-accumulated output
/// gradient, and the gradient buffer to accumulate input gradients into.
pub(crate) type BackFn<S> = Box<dyn Fn(&BackCtx<'_, S>, &[S], &mut Grads<S>)>;

pub(crate) struct BackCtx<'a, S> {
    nodes: &'a [Node<S>],
}

impl<'a, S: Scalar> BackCtx<'a, S> {
    pub fn val(&self, id: usize) -> &[S] {
        &self.nodes[id].value
    }

    pub fn shape(&self, id: usize) -> &[usize] {
        &self.nodes[id].shape
    }

    pub fn needs_grad(&self, id: usize) -> bool {
        self.nodes[id].requires_grad
    }
}

struct TapeInner<S> {
    nodes: Vec<Node<S>>,
    /// Leaf nodes that mirror parameter-store entries, for gradient export.
    param_links: Vec<(usize, ParamId)>,
}

/// Records one forward pass. Single-owner: a tape and its tensors belong to
/// one worker at a time.
pub struct Tape<S: Scalar> {
    inner: RefCell<TapeInner<S>>,
}

/// Handle to a node on a tape.
#[derive(Clone, Copy)]
pub struct Tensor<'t, S: Scalar> {
    tape: &'t Tape<S>,
    id: usize,
}

/// Gradient buffer produced by [`Tape::backward`], indexed by node.
pub struct Grads<S> {
    g: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> Grads<S> {
    fn new(n: usize) -> Self {
        Grads { g: (0..n).map(|_| None).collect() }
    }

    pub(crate) fn acc(&mut self, id: usize, contrib: &[S]) {
        match &mut self.g[id] {
            Some(existing) => {
                for (e, c) in existing.iter_mut().zip(contrib) {
                    *e = *e + *c;
                }
            }
            None => self.g[id] = Some(contrib.to_vec()),
        }
    }

    pub(crate) fn acc_owned(&mut self, id: usize, contrib: Vec<S>) {
        match &mut self.g[id] {
            Some(existing) => {
                for (e, c) in existing.iter_mut().zip(&contrib) {
                    *e = *e + *c;
                }
            }
            None => self.g[id] = Some(contrib),
        }
    }

    fn take(&mut self, id: usize) -> Option<Vec<S>> {
        self.g[id].take()
    }

    /// Gradient of a tensor, if any gradient flowed to it.
    pub fn of(&self, t: &Tensor<'_, S>) -> Option<&[S]> {
        self.g[t.id].as_deref()
    }

    pub(crate) fn raw(&self, id: usize) -> Option<&[S]> {
        self.g[id].as_deref()
    }
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { inner: RefCell::new(TapeInner { nodes: Vec::new(), param_links: Vec::new() }) }
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Id the next pushed node will get. Used by ops whose backward rule
    /// reads the op's own output value.
    pub(crate) fn next_id(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub(crate) fn push(
        &self,
        shape: Vec<usize>,
        value: Vec<S>,
        requires_grad: bool,
        back: Option<BackFn<S>>,
    ) -> Tensor<'_, S> {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node { shape, value, requires_grad, back });
        Tensor { tape: self, id }
    }

    /// Constant leaf: participates in the graph, receives no gradient.
    pub fn leaf(&self, shape: &[usize], data: Vec<S>) -> Result<Tensor<'_, S>> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::invalid_shape(
                "leaf",
                format!("shape {:?} wants {} values, got {}", shape, shape.iter().product::<usize>(), data.len()),
            ));
        }
        Ok(self.push(shape.to_vec(), data, false, None))
    }

    /// Differentiable leaf.
    pub fn var(&self, shape: &[usize], data: Vec<S>) -> Result<Tensor<'_, S>> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::invalid_shape(
                "var",
                format!("shape {:?} wants {} values, got {}", shape, shape.iter().product::<usize>(), data.len()),
            ));
        }
        Ok(self.push(shape.to_vec(), data, true, None))
    }

    pub fn scalar(&self, v: S) -> Tensor<'_, S> {
        self.push(vec![1], vec![v], false, None)
    }

    pub fn zeros(&self, shape: &[usize]) -> Tensor<'_, S> {
        let n = shape.iter().product();
        self.push(shape.to_vec(), vec![S::zero(); n], false, None)
    }

    /// Leaf mirroring a parameter-store entry. Weights are differentiable;
    /// buffers are constants. The link is remembered so
    /// [`ParamStore::accumulate_grads`] can route gradients back.
    pub fn param(&self, store: &ParamStore<S>, id: ParamId) -> Tensor<'_, S> {
        let entry = store.entry(id);
        let t = self.push(entry.shape.clone(), entry.data.clone(), entry.is_weight(), None);
        self.inner.borrow_mut().param_links.push((t.id, id));
        t
    }

    pub(crate) fn param_links(&self) -> Vec<(usize, ParamId)> {
        self.inner.borrow().param_links.clone()
    }

    /// Reverse replay from a scalar loss. Returns gradients for every node
    /// that required one; intermediate gradients are freed as soon as their
    /// backward rule has consumed them.
    pub fn backward(&self, loss: Tensor<'_, S>) -> Result<Grads<S>> {
        let inner = self.inner.borrow();
        if inner.nodes[loss.id].value.len() != 1 {
            return Err(Error::invalid_arg(
                "backward",
                format!("loss must be scalar, got shape {:?}", inner.nodes[loss.id].shape),
            ));
        }
        let mut grads = Grads::new(inner.nodes.len());
        grads.acc(loss.id, &[S::one()]);
        let ctx = BackCtx { nodes: &inner.nodes };
        for id in (0..inner.nodes.len()).rev() {
            if inner.nodes[id].back.is_none() {
                continue;
            }
            let Some(g) = grads.take(id) else { continue };
            let back = inner.nodes[id].back.as_ref().unwrap();
            back(&ctx, &g, &mut grads);
        }
        Ok(grads)
    }
}

impl<'t, S: Scalar> Tensor<'t, S> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub(crate) fn tape(&self) -> &'t Tape<S> {
        self.tape
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.inner.borrow().nodes[self.id].shape.clone()
    }

    pub fn numel(&self) -> usize {
        self.tape.inner.borrow().nodes[self.id].value.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.inner.borrow().nodes[self.id].requires_grad
    }

    pub fn value(&self) -> Vec<S> {
        self.tape.inner.borrow().nodes[self.id].value.clone()
    }

    /// Scalar extraction; panics if the tensor is not single-element.
    pub fn item(&self) -> S {
        let inner = self.tape.inner.borrow();
        let v = &inner.nodes[self.id].value;
        assert_eq!(v.len(), 1, "item() on non-scalar tensor");
        v[0]
    }

    /// Cut the graph: same value, no gradient flow.
    pub fn detach(&self) -> Tensor<'t, S> {
        let (shape, value) = {
            let inner = self.tape.inner.borrow();
            (inner.nodes[self.id].shape.clone(), inner.nodes[self.id].value.clone())
        };
        self.tape.push(shape, value, false, None)
    }

    /// Apply `f` to the raw value without cloning.
    pub fn with_value<R>(&self, f: impl FnOnce(&[S]) -> R) -> R {
        f(&self.tape.inner.borrow().nodes[self.id].value)
    }
}
