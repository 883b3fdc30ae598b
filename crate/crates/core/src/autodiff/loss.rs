//! Scalar loss heads: softmax cross-entropy and one-hot mean squared error.

use super::{Tape, VarId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn check_logits_labels<T: Scalar>(
    tape: &Tape<T>,
    logits: VarId,
    labels: &[usize],
) -> Result<(usize, usize)> {
    let shape = tape.shape(logits);
    if shape.len() != 2 {
        return Err(Error::Shape(format!("loss expects [N,C] logits, got {shape:?}")));
    }
    let (n, c) = (shape[0], shape[1]);
    if labels.len() != n {
        return Err(Error::Shape(format!(
            "{} labels for a batch of {n}",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::InvalidArg(format!(
            "label {bad} out of range for {c} classes"
        )));
    }
    Ok((n, c))
}

impl<T: Scalar> Tape<T> {
    /// Mean over the batch of `-log softmax(logits)[label]`, computed with
    /// the log-sum-exp shift for stability. Per-row gradients sum to zero.
    pub fn softmax_xent(&mut self, logits: VarId, labels: &[usize]) -> Result<VarId> {
        let (n, c) = check_logits_labels(self, logits, labels)?;
        let x = self.value(logits).data();
        let mut probs = vec![T::zero(); n * c];
        let mut loss = T::zero();
        for (i, &label) in labels.iter().enumerate() {
            let row = &x[i * c..(i + 1) * c];
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut denom = T::zero();
            for (j, &v) in row.iter().enumerate() {
                let e = (v - max).exp();
                probs[i * c + j] = e;
                denom += e;
            }
            for p in &mut probs[i * c..(i + 1) * c] {
                *p /= denom;
            }
            loss += denom.ln() + max - row[label];
        }
        loss /= T::c(n as f64);

        let labels = labels.to_vec();
        Ok(self.push(
            Tensor::scalar(loss),
            vec![logits],
            Some(Box::new(move |g, _| {
                let scale = g.item() / T::c(n as f64);
                let mut dl = probs.clone();
                for (i, &label) in labels.iter().enumerate() {
                    dl[i * c + label] -= T::one();
                }
                for v in &mut dl {
                    *v *= scale;
                }
                vec![Tensor::from_vec(vec![n, c], dl).expect("xent grad shape")]
            })),
        ))
    }

    /// Mean over batch and classes of `(out - onehot(label))^2`. Used when a
    /// network's outputs are probability-like values rather than free logits.
    pub fn mse_onehot(&mut self, outputs: VarId, labels: &[usize]) -> Result<VarId> {
        let (n, c) = check_logits_labels(self, outputs, labels)?;
        let x = self.value(outputs).data();
        let mut loss = T::zero();
        for (i, &label) in labels.iter().enumerate() {
            for j in 0..c {
                let target = if j == label { T::one() } else { T::zero() };
                let d = x[i * c + j] - target;
                loss += d * d;
            }
        }
        loss /= T::c((n * c) as f64);

        let labels = labels.to_vec();
        Ok(self.push(
            Tensor::scalar(loss),
            vec![outputs],
            Some(Box::new(move |g, vals| {
                let scale = g.item() * T::c(2.0 / (n * c) as f64);
                let x = vals[outputs].data();
                let mut dl = vec![T::zero(); n * c];
                for (i, &label) in labels.iter().enumerate() {
                    for j in 0..c {
                        let target = if j == label { T::one() } else { T::zero() };
                        dl[i * c + j] = scale * (x[i * c + j] - target);
                    }
                }
                vec![Tensor::from_vec(vec![n, c], dl).expect("mse grad shape")]
            })),
        ))
    }
}
