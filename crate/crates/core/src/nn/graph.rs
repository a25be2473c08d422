//! Tape-based reverse-mode differentiation.
//!
//! Every op appends a node holding its output value and, when any input needs a
//! gradient, a closure mapping the output gradient to input gradients. Nodes
//! are appended in evaluation order, so walking the tape backwards is a valid
//! topological order.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use super::tensor::{Element, Tensor};

/// What a backward closure sees.
pub struct BackwardCtx<'a, E: Element> {
    pub grad: &'a Tensor<E>,
    pub inputs: &'a [Rc<Tensor<E>>],
    pub output: &'a Tensor<E>,
    /// `needs[i]` is false when input `i` does not need a gradient; the closure
    /// may return `None` for it.
    pub needs: &'a [bool],
}

pub type BackwardFn<E> = Box<dyn Fn(&BackwardCtx<'_, E>) -> Vec<Option<Tensor<E>>>>;

struct Node<E: Element> {
    value: Rc<Tensor<E>>,
    parents: Vec<usize>,
    backward: Option<BackwardFn<E>>,
    requires_grad: bool,
}

/// A recording of one forward computation.
pub struct Graph<E: Element = f32> {
    nodes: RefCell<Vec<Node<E>>>,
}

/// Handle to a value on a [`Graph`].
pub struct Var<'g, E: Element = f32> {
    graph: &'g Graph<E>,
    id: usize,
}

impl<E: Element> Clone for Var<'_, E> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<E: Element> Copy for Var<'_, E> {}

impl<E: Element> fmt::Debug for Var<'_, E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl<E: Element> Default for Graph<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E: Element> Graph<E> {
    pub fn new() -> Self {
        Graph {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor<E>) -> Var<'_, E> {
        self.leaf(value, false)
    }

    /// A leaf whose gradient is collected by [`Graph::backward`].
    pub fn param(&self, value: Tensor<E>) -> Var<'_, E> {
        self.leaf(value, true)
    }

    fn leaf(&self, value: Tensor<E>, requires_grad: bool) -> Var<'_, E> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            parents: Vec::new(),
            backward: None,
            requires_grad,
        });
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    /// Records an op. The closure is dropped when no input needs a gradient.
    pub fn push(&self, value: Tensor<E>, inputs: &[Var<'_, E>], backward: BackwardFn<E>) -> Var<'_, E> {
        let mut nodes = self.nodes.borrow_mut();
        let requires_grad = inputs.iter().any(|v| nodes[v.id].requires_grad);
        nodes.push(Node {
            value: Rc::new(value),
            parents: inputs.iter().map(|v| v.id).collect(),
            backward: requires_grad.then_some(backward),
            requires_grad,
        });
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    /// Back-propagates from a scalar (single-element) output.
    pub fn backward(&self, output: Var<'_, E>) -> Gradients<E> {
        let seed = {
            let nodes = self.nodes.borrow();
            let value = &nodes[output.id].value;
            assert_eq!(value.numel(), 1, "backward needs a single-element output");
            Tensor::full(value.shape(), E::one())
        };
        self.backward_with(output, seed)
    }

    /// Back-propagates an explicit output cotangent.
    pub fn backward_with(&self, output: Var<'_, E>, seed: Tensor<E>) -> Gradients<E> {
        let nodes = self.nodes.borrow();
        assert_eq!(
            nodes[output.id].value.shape(),
            seed.shape(),
            "backward seed shape"
        );
        let mut grads: Vec<Option<Tensor<E>>> = (0..nodes.len()).map(|_| None).collect();
        grads[output.id] = Some(seed);
        for id in (0..=output.id).rev() {
            let node = &nodes[id];
            let Some(backward) = &node.backward else {
                continue;
            };
            let Some(grad) = grads[id].take() else {
                continue;
            };
            let inputs: Vec<Rc<Tensor<E>>> =
                node.parents.iter().map(|&p| nodes[p].value.clone()).collect();
            let needs: Vec<bool> = node
                .parents
                .iter()
                .map(|&p| nodes[p].requires_grad)
                .collect();
            let parent_grads = backward(&BackwardCtx {
                grad: &grad,
                inputs: &inputs,
                output: &node.value,
                needs: &needs,
            });
            debug_assert_eq!(parent_grads.len(), node.parents.len());
            for ((&parent, pg), &need) in node.parents.iter().zip(parent_grads).zip(&needs) {
                let Some(pg) = pg else { continue };
                if !need {
                    continue;
                }
                debug_assert_eq!(pg.shape(), nodes[parent].value.shape());
                match &mut grads[parent] {
                    Some(acc) => acc.add_assign(&pg),
                    slot @ None => *slot = Some(pg),
                }
            }
        }
        Gradients { grads }
    }
}

impl<'g, E: Element> Var<'g, E> {
    pub fn graph(&self) -> &'g Graph<E> {
        self.graph
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Tensor<E>> {
        self.graph.nodes.borrow()[self.id].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.nodes.borrow()[self.id].requires_grad
    }

    /// Copies the value onto the graph as a constant, cutting gradient flow.
    pub fn detach(&self) -> Var<'g, E> {
        let value = (*self.value()).clone();
        self.graph.constant(value)
    }

    /// Value of a single-element var.
    pub fn item(&self) -> E {
        let v = self.value();
        assert_eq!(v.numel(), 1, "item() on a {:?} tensor", v.shape());
        v.data()[0]
    }
}

/// Leaf gradients produced by [`Graph::backward`].
pub struct Gradients<E: Element> {
    grads: Vec<Option<Tensor<E>>>,
}

impl<E: Element> Gradients<E> {
    pub fn get(&self, var: Var<'_, E>) -> Option<&Tensor<E>> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var<'_, E>) -> Option<Tensor<E>> {
        self.grads.get_mut(var.id).and_then(Option::take)
    }
}
