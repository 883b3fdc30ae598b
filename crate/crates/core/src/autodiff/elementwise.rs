//! Elementwise and broadcast primitives.

use super::{Tape, VarId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

impl<T: Scalar> Tape<T> {
    fn check_same_shape(&self, a: VarId, b: VarId, op: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "{op}: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        self.check_same_shape(a, b, "add")?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.push(
            out,
            vec![a, b],
            Some(Box::new(|g, _| vec![g.clone(), g.clone()])),
        ))
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        self.check_same_shape(a, b, "sub")?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.push(
            out,
            vec![a, b],
            Some(Box::new(|g, _| vec![g.clone(), g.map(|x| -x)])),
        ))
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        self.check_same_shape(a, b, "mul")?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.push(
            out,
            vec![a, b],
            Some(Box::new(move |g, vals| {
                vec![zip_map(g, &vals[b], |d, y| d * y), zip_map(g, &vals[a], |d, x| d * x)]
            })),
        ))
    }

    pub fn neg(&mut self, a: VarId) -> VarId {
        let out = self.value(a).map(|x| -x);
        self.push(out, vec![a], Some(Box::new(|g, _| vec![g.map(|d| -d)])))
    }

    /// Multiplication by a constant.
    pub fn scale(&mut self, a: VarId, c: T) -> VarId {
        let out = self.value(a).map(|x| x * c);
        self.push(
            out,
            vec![a],
            Some(Box::new(move |g, _| vec![g.map(|d| d * c)])),
        )
    }

    pub fn sin(&mut self, a: VarId) -> VarId {
        let out = self.value(a).map(T::sin);
        self.push(
            out,
            vec![a],
            Some(Box::new(move |g, vals| {
                vec![zip_map(g, &vals[a], |d, x| d * x.cos())]
            })),
        )
    }

    pub fn cos(&mut self, a: VarId) -> VarId {
        let out = self.value(a).map(T::cos);
        self.push(
            out,
            vec![a],
            Some(Box::new(move |g, vals| {
                vec![zip_map(g, &vals[a], |d, x| -d * x.sin())]
            })),
        )
    }

    pub fn square(&mut self, a: VarId) -> VarId {
        let out = self.value(a).map(|x| x * x);
        let two = T::c(2.0);
        self.push(
            out,
            vec![a],
            Some(Box::new(move |g, vals| {
                vec![zip_map(g, &vals[a], |d, x| d * two * x)]
            })),
        )
    }

    /// Elementwise `max(0, x)`. The subgradient at exactly 0 is 0.
    pub fn relu(&mut self, a: VarId) -> VarId {
        let out = self.value(a).map(|x| x.max(T::zero()));
        self.push(
            out,
            vec![a],
            Some(Box::new(move |g, vals| {
                vec![zip_map(g, &vals[a], |d, x| {
                    if x > T::zero() {
                        d
                    } else {
                        T::zero()
                    }
                })]
            })),
        )
    }

    /// Sum of all elements, as a scalar node.
    pub fn sum_all(&mut self, a: VarId) -> VarId {
        let total = self.value(a).iter().copied().sum();
        let shape = self.shape(a).to_vec();
        self.push(
            Tensor::scalar(total),
            vec![a],
            Some(Box::new(move |g, _| {
                vec![Tensor::filled(shape.clone(), g.item())]
            })),
        )
    }

    pub fn add_channel(&mut self, x: VarId, bias: VarId) -> Result<VarId> {
        self.channel_broadcast(x, bias, false)
    }

    pub fn sub_channel(&mut self, x: VarId, bias: VarId) -> Result<VarId> {
        self.channel_broadcast(x, bias, true)
    }

    /// Adds or subtracts a per-channel vector along dimension 1 of `x`
    /// (the feature dimension of an `[N, C, ...]` activation or the column
    /// dimension of an `[N, M]` matrix).
    fn channel_broadcast(&mut self, x: VarId, bias: VarId, subtract: bool) -> Result<VarId> {
        let xs = self.shape(x);
        let bs = self.shape(bias);
        if xs.len() < 2 || bs.len() != 1 || bs[0] != xs[1] {
            return Err(Error::Shape(format!(
                "channel broadcast: x {xs:?} with bias {bs:?}"
            )));
        }
        let channels = xs[1];
        let inner: usize = xs[2..].iter().product();
        let sign = if subtract { -T::one() } else { T::one() };

        let xv = self.value(x).data();
        let bv = self.value(bias).data();
        let mut out = Vec::with_capacity(xv.len());
        for group in xv.chunks(channels * inner) {
            for (c, chunk) in group.chunks(inner).enumerate() {
                let b = bv[c] * sign;
                out.extend(chunk.iter().map(|&v| v + b));
            }
        }
        let out = Tensor::from_vec(xs.to_vec(), out)?;

        Ok(self.push(
            out,
            vec![x, bias],
            Some(Box::new(move |g, _| {
                let mut db = vec![T::zero(); channels];
                for group in g.data().chunks(channels * inner) {
                    for (c, chunk) in group.chunks(inner).enumerate() {
                        for &d in chunk {
                            db[c] += d * sign;
                        }
                    }
                }
                vec![
                    g.clone(),
                    Tensor::from_vec(vec![channels], db).expect("bias grad shape"),
                ]
            })),
        ))
    }
}

pub(super) fn zip_map<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    f: impl Fn(T, T) -> T,
) -> Tensor<T> {
    debug_assert_eq!(a.shape(), b.shape());
    let data = a
        .iter()
        .zip(b.iter())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::from_vec(a.shape().to_vec(), data).expect("zip_map preserves shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn relu_forward_matches_definition() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[3], &[-1.0, 0.0, 2.0]));
        let y = tape.relu(x);
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn relu_all_negative_is_all_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[4], &[-3.0, -0.5, -1e-9, -100.0]));
        let y = tape.relu(x);
        assert!(tape.value(y).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relu_gradient_gates_on_sign() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[3], &[1e-3, -1e-3, 0.0]));
        let y = tape.relu(x);
        let s = tape.sum_all(y);
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn sin_cos_gradients() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[1], &[0.3]));
        let c = tape.cos(x);
        let s = tape.sum_all(c);
        let grads = tape.backward(s).unwrap();
        assert!((grads.get(x).unwrap().data()[0] + 0.3f64.sin()).abs() < 1e-15);

        let mut tape = Tape::new();
        let x = tape.leaf(t(&[1], &[0.3]));
        let sn = tape.sin(x);
        let s = tape.sum_all(sn);
        let grads = tape.backward(s).unwrap();
        assert!((grads.get(x).unwrap().data()[0] - 0.3f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn channel_bias_broadcast_rank4() {
        let mut tape = Tape::new();
        // [1, 2, 1, 2] with channels {10, 20}
        let x = tape.leaf(t(&[1, 2, 1, 2], &[1.0, 2.0, 3.0, 4.0]));
        let b = tape.leaf(t(&[2], &[10.0, 20.0]));
        let y = tape.sub_channel(x, b).unwrap();
        assert_eq!(tape.value(y).data(), &[-9.0, -8.0, -17.0, -16.0]);
        let s = tape.sum_all(y);
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads.get(b).unwrap().data(), &[-2.0, -2.0]);
    }

    #[test]
    fn shape_mismatch_is_fatal() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(t(&[2], &[1.0, 2.0]));
        let b = tape.leaf(t(&[3], &[1.0, 2.0, 3.0]));
        assert!(tape.add(a, b).is_err());
    }
}
