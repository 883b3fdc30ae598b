//! 2×2 max pooling with stride 2.

use super::{Tape, VarId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

impl<T: Scalar> Tape<T> {
    /// Disjoint 2×2 max pooling over an `[N,C,H,W]` input with even `H`, `W`.
    /// Ties resolve to the first maximum in row-major scan order, which fixes
    /// the backward routing deterministically.
    pub fn maxpool2(&mut self, input: VarId) -> Result<VarId> {
        let [n, c, h, w] = self.shape(input) else {
            return Err(Error::Shape(format!(
                "maxpool2 input must be NCHW, got {:?}",
                self.shape(input)
            )));
        };
        let (n, c, h, w) = (*n, *c, *h, *w);
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::Shape(format!(
                "maxpool2 requires even spatial dims, got {h}x{w}"
            )));
        }
        let (ho, wo) = (h / 2, w / 2);
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(n * c * ho * wo);
        let mut argmax = Vec::with_capacity(n * c * ho * wo);
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..ho {
                for ox in 0..wo {
                    let top = base + (2 * oy) * w + 2 * ox;
                    // Window in row-major order: (0,0), (0,1), (1,0), (1,1).
                    let idxs = [top, top + 1, top + w, top + w + 1];
                    let mut best = idxs[0];
                    for &i in &idxs[1..] {
                        if x[i] > x[best] {
                            best = i;
                        }
                    }
                    out.push(x[best]);
                    argmax.push(best);
                }
            }
        }
        let in_len = x.len();
        let out = Tensor::from_vec(vec![n, c, ho, wo], out)?;
        Ok(self.push(
            out,
            vec![input],
            Some(Box::new(move |g, _| {
                let mut din = vec![T::zero(); in_len];
                for (&src, &d) in argmax.iter().zip(g.data()) {
                    din[src] += d;
                }
                vec![Tensor::from_vec(vec![n, c, h, w], din).expect("pool grad shape")]
            })),
        ))
    }
}
