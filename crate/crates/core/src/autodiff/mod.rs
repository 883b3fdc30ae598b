//! Reverse-mode automatic differentiation on a linear tape.
//!
//! Every differentiable operation records one node: the ids of its operands
//! and a backward closure that, given the gradient of the loss with respect
//! to the node's output, produces one gradient per operand. Nodes are
//! appended in forward order, so operands always precede their consumers and
//! a single reverse sweep propagates gradients with additive accumulation
//! across fan-out. All accumulation orders are fixed, which makes repeated
//! runs bit-identical.

mod arg;
mod conv;
mod elementwise;
mod loss;
mod matmul;
mod pool;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
pub type VarId = usize;

/// Backward rule: `(grad_out, all forward values) -> one gradient per parent`.
type BackFn<T> = Box<dyn Fn(&Tensor<T>, &[Tensor<T>]) -> Vec<Tensor<T>> + Send>;

struct Node<T> {
    parents: Vec<VarId>,
    back: Option<BackFn<T>>,
}

/// Records one forward pass and replays it in reverse.
///
/// A tape is confined to a single logical thread and a single forward pass;
/// `backward` may be called exactly once. Start a new tape for the next pass.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    values: Vec<Tensor<T>>,
    singularities: u64,
    backward_done: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            values: Vec::new(),
            singularities: 0,
            backward_done: false,
        }
    }

    /// Registers an input or parameter value. Leaves have no backward rule;
    /// gradients accumulate on them and are read out after `backward`.
    pub fn leaf(&mut self, value: Tensor<T>) -> VarId {
        self.push(value, Vec::new(), None)
    }

    pub fn value(&self, id: VarId) -> &Tensor<T> {
        &self.values[id]
    }

    pub fn shape(&self, id: VarId) -> &[usize] {
        self.values[id].shape()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of elements that hit the `arg` singularity clamp during this
    /// tape's forward pass.
    pub fn singularity_count(&self) -> u64 {
        self.singularities
    }

    pub(crate) fn count_singularities(&mut self, n: u64) {
        self.singularities += n;
    }

    pub(crate) fn push(
        &mut self,
        value: Tensor<T>,
        parents: Vec<VarId>,
        back: Option<BackFn<T>>,
    ) -> VarId {
        debug_assert!(parents.iter().all(|&p| p < self.nodes.len()));
        let id = self.nodes.len();
        self.nodes.push(Node { parents, back });
        self.values.push(value);
        id
    }

    /// Reverse sweep from a scalar loss node. Returns the gradient of the
    /// loss with respect to every node that the loss depends on.
    ///
    /// Calling this a second time on the same tape is an error: the tape
    /// represents exactly one forward pass.
    pub fn backward(&mut self, loss: VarId) -> Result<Gradients<T>> {
        if self.backward_done {
            return Err(Error::InvalidArg(
                "backward already called on this tape; record a new forward pass".into(),
            ));
        }
        self.backward_done = true;
        if !self.values[loss].is_scalar() {
            return Err(Error::Shape(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.values[loss].shape()
            )));
        }

        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss] = Some(Tensor::scalar(T::one()));

        for id in (0..=loss).rev() {
            let node = &self.nodes[id];
            let Some(back) = node.back.as_ref() else { continue };
            // Parents strictly precede the node, so the split below keeps the
            // node's own gradient immutable while parents accumulate.
            let (head, tail) = grads.split_at_mut(id);
            let Some(grad_out) = tail[0].as_ref() else { continue };
            let parent_grads = back(grad_out, &self.values);
            debug_assert_eq!(parent_grads.len(), node.parents.len());
            for (&pid, pg) in node.parents.iter().zip(parent_grads) {
                debug_assert_eq!(self.values[pid].shape(), pg.shape());
                match &mut head[pid] {
                    Some(acc) => acc.add_assign(&pg),
                    slot => *slot = Some(pg),
                }
            }
        }

        Ok(Gradients { grads })
    }
}

/// Result of a backward sweep: gradient per `VarId`, `None` where the loss
/// does not depend on the node.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, id: VarId) -> Option<&Tensor<T>> {
        self.grads.get(id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, id: VarId) -> Option<Tensor<T>> {
        self.grads.get_mut(id).and_then(|g| g.take())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn grad_of_sum_is_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[2, 2], &[1.0, -2.0, 3.0, 0.5]));
        let s = tape.sum_all(x);
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn grad_of_sum_of_squares() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[2], &[1.0, 2.0]));
        let sq = tape.square(x);
        let s = tape.sum_all(sq);
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn fan_out_accumulates_additively() {
        // loss = sum(x*x) + sum(x) -> grad = 2x + 1
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[2], &[3.0, -1.0]));
        let sq = tape.mul(x, x).unwrap();
        let s1 = tape.sum_all(sq);
        let s2 = tape.sum_all(x);
        let loss = tape.add(s1, s2).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[7.0, -1.0]);
    }

    #[test]
    fn backward_twice_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(2.0));
        let s = tape.sum_all(x);
        tape.backward(s).unwrap();
        assert!(tape.backward(s).is_err());
    }

    #[test]
    fn backward_requires_scalar_loss() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[2], &[1.0, 2.0]));
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn replay_is_bit_identical() {
        let run = || {
            let mut tape = Tape::new();
            let x = tape.leaf(t(&[3], &[0.3, -0.7, 1.9]));
            let w = tape.leaf(t(&[3], &[1.5, 0.25, -2.0]));
            let p = tape.mul(x, w).unwrap();
            let r = tape.relu(p);
            let s = tape.sum_all(r);
            let grads = tape.backward(s).unwrap();
            (
                grads.get(x).unwrap().data().to_vec(),
                grads.get(w).unwrap().data().to_vec(),
            )
        };
        assert_eq!(run(), run());
    }
}
