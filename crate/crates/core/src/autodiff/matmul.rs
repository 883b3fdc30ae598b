//! Matrix product and the affine (fully connected) layer built on it.

use super::{Tape, VarId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `out[i][j] = sum_k a[i][k] * b[k][j]` for row-major `a: [m,k]`, `b: [k,n]`.
fn matmul_raw<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            let brow = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `out = a^T * b` for `a: [k,m]`, `b: [k,n]` -> `[m,n]`.
fn matmul_tn<T: Scalar>(a: &[T], b: &[T], k: usize, m: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for kk in 0..k {
        let arow = &a[kk * m..(kk + 1) * m];
        let brow = &b[kk * n..(kk + 1) * n];
        for (i, &av) in arow.iter().enumerate() {
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `out = a * b^T` for `a: [m,k]`, `b: [n,k]` -> `[m,n]`.
fn matmul_nt<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = T::zero();
            for (&av, &bv) in arow.iter().zip(brow) {
                acc += av * bv;
            }
            out[i * n + j] = acc;
        }
    }
    out
}

impl<T: Scalar> Tape<T> {
    /// Matrix product of `[N,D] x [D,M] -> [N,M]`.
    pub fn matmul(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Shape(format!("matmul: {sa:?} x {sb:?}")));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let out = matmul_raw(self.value(a).data(), self.value(b).data(), m, k, n);
        let out = Tensor::from_vec(vec![m, n], out)?;
        Ok(self.push(
            out,
            vec![a, b],
            Some(Box::new(move |g, vals| {
                let da = matmul_nt(g.data(), vals[b].data(), m, n, k);
                let db = matmul_tn(vals[a].data(), g.data(), m, k, n);
                vec![
                    Tensor::from_vec(vec![m, k], da).expect("da shape"),
                    Tensor::from_vec(vec![k, n], db).expect("db shape"),
                ]
            })),
        ))
    }

    /// Fully connected layer: `x[N,D] * w[D,M] + b[M]` broadcast over rows.
    pub fn affine(&mut self, x: VarId, w: VarId, b: VarId) -> Result<VarId> {
        let prod = self.matmul(x, w)?;
        self.add_channel(prod, b)
    }
}
