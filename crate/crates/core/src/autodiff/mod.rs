//! Tape-based reverse-mode differentiation over tensors.
//!
//! A [`Graph`] records every operation as a node whose parents always have
//! smaller ids, so reverse insertion order is a reverse topological order.
//! [`Graph::backward`] walks that order once, and each node hands the
//! gradient of its output to a local rule that returns one gradient per
//! parent. Parent contributions are accumulated left to right.
//!
//! ```
//! use morpho_core::autodiff::Graph;
//! use morpho_core::Tensor;
//!
//! let g = Graph::<f64>::new();
//! let w = g.leaf(Tensor::from_f64s(&[1.0, 2.0]));
//! let x = g.constant(Tensor::from_f64s(&[3.0, -1.0]));
//! let loss = (w * x).sum();
//! let grads = g.backward(loss).unwrap();
//! assert_eq!(grads.get(w).unwrap().data(), &[3.0, -1.0]);
//! ```

mod gradcheck;
mod ops;

pub use gradcheck::{finite_difference_grad, relative_error, GradCheckReport};
pub use ops::{Elementwise, Operand};

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Local backward rule: given the gradient of the node output and a mask of
/// which parents need a gradient, return one optional gradient per parent.
pub type BackwardFn<T> = Box<dyn Fn(&Tensor<T>, &[bool]) -> Vec<Option<Tensor<T>>>>;

struct Node<T> {
    value: Rc<Tensor<T>>,
    requires_grad: bool,
    parents: Vec<usize>,
    backward: Option<BackwardFn<T>>,
}

/// Recording of a differentiable computation. Confined to one thread.
pub struct Graph<T> {
    nodes: RefCell<Vec<Node<T>>>,
}

/// Handle to a node of a [`Graph`].
pub struct Var<'g, T> {
    graph: &'g Graph<T>,
    id: usize,
}

impl<T> Clone for Var<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for Var<'_, T> {}

impl<T> fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var({})", self.id)
    }
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, node: Node<T>) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    /// Trainable input: gradients are reported for it.
    pub fn leaf(&self, value: Tensor<T>) -> Var<'_, T> {
        self.input(value, true)
    }

    /// Input that never receives a gradient.
    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.input(value, false)
    }

    pub fn input(&self, value: Tensor<T>, requires_grad: bool) -> Var<'_, T> {
        self.push(Node {
            value: Rc::new(value),
            requires_grad,
            parents: Vec::new(),
            backward: None,
        })
    }

    /// Record the result of an operation on `parents`.
    ///
    /// The backward rule is dropped when no parent requires a gradient.
    pub fn record(&self, value: Tensor<T>, parents: &[Var<'_, T>], backward: BackwardFn<T>) -> Var<'_, T> {
        let ids: Vec<usize> = parents.iter().map(|p| p.id).collect();
        let requires_grad = {
            let nodes = self.nodes.borrow();
            ids.iter().any(|&i| nodes[i].requires_grad)
        };
        self.push(Node {
            value: Rc::new(value),
            requires_grad,
            parents: ids,
            backward: requires_grad.then_some(backward),
        })
    }

    pub fn value(&self, var: Var<'_, T>) -> Rc<Tensor<T>> {
        Rc::clone(&self.nodes.borrow()[var.id].value)
    }

    pub fn requires_grad(&self, var: Var<'_, T>) -> bool {
        self.nodes.borrow()[var.id].requires_grad
    }

    /// Gradients of the scalar `root` with respect to every node that
    /// requires one.
    pub fn backward(&self, root: Var<'_, T>) -> Result<Gradients<T>> {
        let nodes = self.nodes.borrow();
        let root_value = &nodes[root.id].value;
        if !root_value.is_scalar() {
            return Err(Error::NonScalarRoot(root_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; nodes.len()];
        grads[root.id] = Some(Tensor::full(root_value.shape(), T::one()));

        for id in (0..=root.id).rev() {
            let node = &nodes[id];
            let Some(rule) = node.backward.as_ref() else {
                continue;
            };
            let Some(upstream) = grads[id].take() else {
                continue;
            };
            let needs: Vec<bool> = node.parents.iter().map(|&p| nodes[p].requires_grad).collect();
            let parent_grads = rule(&upstream, &needs);
            debug_assert_eq!(parent_grads.len(), node.parents.len());
            for ((&pid, grad), &need) in node.parents.iter().zip(parent_grads).zip(&needs) {
                let (Some(grad), true) = (grad, need) else {
                    continue;
                };
                debug_assert_eq!(grad.shape(), nodes[pid].value.shape());
                match &mut grads[pid] {
                    Some(acc) => acc.add_assign(&grad)?,
                    slot @ None => *slot = Some(grad),
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Result of [`Graph::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient for a leaf, `None` when the leaf does not influence the root.
    pub fn get(&self, var: Var<'_, T>) -> Option<&Tensor<T>> {
        self.grads.get(var.id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, var: Var<'_, T>) -> Option<Tensor<T>> {
        self.grads.get_mut(var.id).and_then(|g| g.take())
    }

    /// Gradient for `var`, zeros of `like`'s shape when absent.
    pub fn get_or_zeros(&self, var: Var<'_, T>, like: &Tensor<T>) -> Tensor<T> {
        self.get(var).cloned().unwrap_or_else(|| Tensor::zeros_like(like))
    }
}

impl<'g, T: Scalar> Var<'g, T> {
    pub fn graph(&self) -> &'g Graph<T> {
        self.graph
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Tensor<T>> {
        self.graph.value(*self)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.requires_grad(*self)
    }
}
