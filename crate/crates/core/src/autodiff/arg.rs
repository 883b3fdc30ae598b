//! Phase extraction with the built-in NOT rotation: `theta = pi/2 - arg(v)`.
//!
//! `arg` is the quadrant-correct two-argument arctangent. Its partials are
//! `d arg/d re = -im / (re^2 + im^2)` and `d arg/d im = re / (re^2 + im^2)`,
//! so the NOT-rotated angle flips both signs. At `|v|` below the modulus
//! floor the angle is undefined: those elements are clamped to `theta = 0`,
//! their gradient is forced to zero, and the tape counts the occurrence so
//! training diagnostics can surface it. Silent NaN is never produced.

use super::{Tape, VarId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

impl<T: Scalar> Tape<T> {
    /// `theta[i] = pi/2 - atan2(im[i], re[i])`, elementwise over a
    /// same-shaped (re, im) pair. Elements with modulus below `eps_arg`
    /// are clamped (see module docs).
    pub fn arg_not_theta(&mut self, re: VarId, im: VarId) -> Result<VarId> {
        if self.shape(re) != self.shape(im) {
            return Err(Error::Shape(format!(
                "arg_not_theta: real {:?} vs imag {:?}",
                self.shape(re),
                self.shape(im)
            )));
        }
        let eps = crate::scalar::eps_arg::<T>();
        let eps_sq = eps * eps;
        let half_pi = T::c(std::f64::consts::FRAC_PI_2);

        let rv = self.value(re).data();
        let iv = self.value(im).data();
        let mut theta = Vec::with_capacity(rv.len());
        let mut clamped = vec![false; rv.len()];
        let mut hits = 0u64;
        for (k, (&r, &i)) in rv.iter().zip(iv).enumerate() {
            if r * r + i * i < eps_sq {
                theta.push(T::zero());
                clamped[k] = true;
                hits += 1;
            } else {
                theta.push(half_pi - i.atan2(r));
            }
        }
        self.count_singularities(hits);

        let shape = self.shape(re).to_vec();
        let out = Tensor::from_vec(shape, theta)?;
        Ok(self.push(
            out,
            vec![re, im],
            Some(Box::new(move |g, vals| {
                let rv = vals[re].data();
                let iv = vals[im].data();
                let mut dre = Vec::with_capacity(rv.len());
                let mut dim = Vec::with_capacity(rv.len());
                for (k, &d) in g.data().iter().enumerate() {
                    if clamped[k] {
                        dre.push(T::zero());
                        dim.push(T::zero());
                    } else {
                        let (r, i) = (rv[k], iv[k]);
                        let m2 = r * r + i * i;
                        dre.push(d * i / m2);
                        dim.push(-d * r / m2);
                    }
                }
                vec![
                    Tensor::from_vec(vals[re].shape().to_vec(), dre).expect("dre shape"),
                    Tensor::from_vec(vals[im].shape().to_vec(), dim).expect("dim shape"),
                ]
            })),
        ))
    }
}
