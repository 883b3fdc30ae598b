//! 2-D cross-correlation (deep-learning "convolution": no kernel flip).
//!
//! Forward and both backward passes are written as gathers: every output
//! element is an independent sum accumulated in a fixed order, so the
//! batch/filter parallelism below is bitwise deterministic at any thread
//! count.

use rayon::prelude::*;

use super::{Tape, VarId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy)]
struct ConvDims {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    kh: usize,
    kw: usize,
    pad: usize,
    stride: usize,
    h_out: usize,
    w_out: usize,
}

fn conv_dims(
    in_shape: &[usize],
    k_shape: &[usize],
    pad: usize,
    stride: usize,
) -> Result<ConvDims> {
    let [n, c, h, w] = in_shape else {
        return Err(Error::Shape(format!("conv2d input must be NCHW, got {in_shape:?}")));
    };
    let [f, kc, kh, kw] = k_shape else {
        return Err(Error::Shape(format!("conv2d kernel must be FCKhKw, got {k_shape:?}")));
    };
    if kc != c {
        return Err(Error::Shape(format!(
            "conv2d channel mismatch: input has {c}, kernel expects {kc}"
        )));
    }
    if stride < 1 {
        return Err(Error::InvalidArg("conv2d stride must be >= 1".into()));
    }
    if *kh > h + 2 * pad || *kw > w + 2 * pad {
        return Err(Error::Shape(format!(
            "conv2d kernel {kh}x{kw} larger than padded input {}x{}",
            h + 2 * pad,
            w + 2 * pad
        )));
    }
    Ok(ConvDims {
        n: *n,
        c: *c,
        h: *h,
        w: *w,
        f: *f,
        kh: *kh,
        kw: *kw,
        pad,
        stride,
        h_out: (h + 2 * pad - kh) / stride + 1,
        w_out: (w + 2 * pad - kw) / stride + 1,
    })
}

fn conv_forward<T: Scalar>(input: &[T], kernel: &[T], d: ConvDims) -> Vec<T> {
    let mut out = vec![T::zero(); d.n * d.f * d.h_out * d.w_out];
    let plane = d.h_out * d.w_out;
    out.par_chunks_mut(plane).enumerate().for_each(|(nf, dst)| {
        let (n, f) = (nf / d.f, nf % d.f);
        let in_base = n * d.c * d.h * d.w;
        let k_base = f * d.c * d.kh * d.kw;
        for oy in 0..d.h_out {
            for ox in 0..d.w_out {
                let mut acc = T::zero();
                for c in 0..d.c {
                    let in_c = in_base + c * d.h * d.w;
                    let k_c = k_base + c * d.kh * d.kw;
                    for ki in 0..d.kh {
                        let iy = (oy * d.stride + ki) as isize - d.pad as isize;
                        if iy < 0 || iy >= d.h as isize {
                            continue;
                        }
                        let row = in_c + iy as usize * d.w;
                        let krow = k_c + ki * d.kw;
                        for kj in 0..d.kw {
                            let ix = (ox * d.stride + kj) as isize - d.pad as isize;
                            if ix < 0 || ix >= d.w as isize {
                                continue;
                            }
                            acc += input[row + ix as usize] * kernel[krow + kj];
                        }
                    }
                }
                dst[oy * d.w_out + ox] = acc;
            }
        }
    });
    out
}

fn conv_input_grad<T: Scalar>(grad_out: &[T], kernel: &[T], d: ConvDims) -> Vec<T> {
    let mut din = vec![T::zero(); d.n * d.c * d.h * d.w];
    let plane = d.h * d.w;
    din.par_chunks_mut(plane).enumerate().for_each(|(nc, dst)| {
        let (n, c) = (nc / d.c, nc % d.c);
        let go_base = n * d.f * d.h_out * d.w_out;
        for iy in 0..d.h {
            for ix in 0..d.w {
                let mut acc = T::zero();
                for f in 0..d.f {
                    let go_f = go_base + f * d.h_out * d.w_out;
                    let k_base = (f * d.c + c) * d.kh * d.kw;
                    for ki in 0..d.kh {
                        let oy_num = iy as isize + d.pad as isize - ki as isize;
                        if oy_num < 0 || oy_num % d.stride as isize != 0 {
                            continue;
                        }
                        let oy = (oy_num / d.stride as isize) as usize;
                        if oy >= d.h_out {
                            continue;
                        }
                        for kj in 0..d.kw {
                            let ox_num = ix as isize + d.pad as isize - kj as isize;
                            if ox_num < 0 || ox_num % d.stride as isize != 0 {
                                continue;
                            }
                            let ox = (ox_num / d.stride as isize) as usize;
                            if ox >= d.w_out {
                                continue;
                            }
                            acc += grad_out[go_f + oy * d.w_out + ox]
                                * kernel[k_base + ki * d.kw + kj];
                        }
                    }
                }
                dst[iy * d.w + ix] = acc;
            }
        }
    });
    din
}

fn conv_kernel_grad<T: Scalar>(grad_out: &[T], input: &[T], d: ConvDims) -> Vec<T> {
    let mut dk = vec![T::zero(); d.f * d.c * d.kh * d.kw];
    let plane = d.kh * d.kw;
    dk.par_chunks_mut(plane).enumerate().for_each(|(fc, dst)| {
        let (f, c) = (fc / d.c, fc % d.c);
        for ki in 0..d.kh {
            for kj in 0..d.kw {
                let mut acc = T::zero();
                for n in 0..d.n {
                    let go_base = (n * d.f + f) * d.h_out * d.w_out;
                    let in_base = (n * d.c + c) * d.h * d.w;
                    for oy in 0..d.h_out {
                        let iy = (oy * d.stride + ki) as isize - d.pad as isize;
                        if iy < 0 || iy >= d.h as isize {
                            continue;
                        }
                        let in_row = in_base + iy as usize * d.w;
                        let go_row = go_base + oy * d.w_out;
                        for ox in 0..d.w_out {
                            let ix = (ox * d.stride + kj) as isize - d.pad as isize;
                            if ix < 0 || ix >= d.w as isize {
                                continue;
                            }
                            acc += grad_out[go_row + ox] * input[in_row + ix as usize];
                        }
                    }
                }
                dst[ki * d.kw + kj] = acc;
            }
        }
    });
    dk
}

impl<T: Scalar> Tape<T> {
    /// Cross-correlation of an `[N,C,H,W]` input with an `[F,C,kH,kW]`
    /// kernel. Output is `[N,F,H',W']` with `H' = (H + 2·pad − kH)/stride + 1`
    /// (floor division).
    pub fn conv2d(&mut self, input: VarId, kernel: VarId, pad: usize, stride: usize) -> Result<VarId> {
        let d = conv_dims(self.shape(input), self.shape(kernel), pad, stride)?;
        let out = conv_forward(self.value(input).data(), self.value(kernel).data(), d);
        let out = Tensor::from_vec(vec![d.n, d.f, d.h_out, d.w_out], out)?;
        Ok(self.push(
            out,
            vec![input, kernel],
            Some(Box::new(move |g, vals| {
                let din = conv_input_grad(g.data(), vals[kernel].data(), d);
                let dk = conv_kernel_grad(g.data(), vals[input].data(), d);
                vec![
                    Tensor::from_vec(vec![d.n, d.c, d.h, d.w], din).expect("din shape"),
                    Tensor::from_vec(vec![d.f, d.c, d.kh, d.kw], dk).expect("dk shape"),
                ]
            })),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape.to_vec(), data.to_vec()).unwrap()
    }

    /// Independent quadruple-loop reference used only by this test module.
    fn naive_conv(
        input: &Tensor<f64>,
        kernel: &Tensor<f64>,
        pad: usize,
        stride: usize,
    ) -> Tensor<f64> {
        let (n, c, h, w) = (
            input.shape()[0],
            input.shape()[1],
            input.shape()[2],
            input.shape()[3],
        );
        let (f, kh, kw) = (kernel.shape()[0], kernel.shape()[2], kernel.shape()[3]);
        let h_out = (h + 2 * pad - kh) / stride + 1;
        let w_out = (w + 2 * pad - kw) / stride + 1;
        let at = |t: &Tensor<f64>, idx: [usize; 4], dims: [usize; 4]| {
            t.data()[((idx[0] * dims[1] + idx[1]) * dims[2] + idx[2]) * dims[3] + idx[3]]
        };
        let mut out = vec![0.0; n * f * h_out * w_out];
        for ni in 0..n {
            for fi in 0..f {
                for oy in 0..h_out {
                    for ox in 0..w_out {
                        let mut acc = 0.0;
                        for ci in 0..c {
                            for ki in 0..kh {
                                for kj in 0..kw {
                                    let iy = (oy * stride + ki) as isize - pad as isize;
                                    let ix = (ox * stride + kj) as isize - pad as isize;
                                    if iy >= 0 && (iy as usize) < h && ix >= 0 && (ix as usize) < w
                                    {
                                        acc += at(input, [ni, ci, iy as usize, ix as usize], [n, c, h, w])
                                            * at(kernel, [fi, ci, ki, kj], [f, c, kh, kw]);
                                    }
                                }
                            }
                        }
                        out[((ni * f + fi) * h_out + oy) * w_out + ox] = acc;
                    }
                }
            }
        }
        Tensor::from_vec(vec![n, f, h_out, w_out], out).unwrap()
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let k = tape.leaf(t(&[1, 1, 1, 1], &[1.0]));
        let y = tape.conv2d(x, k, 0, 1).unwrap();
        assert_eq!(tape.shape(y), &[1, 1, 2, 2]);
        assert_eq!(tape.value(y).data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn hand_computed_full_window() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let k = tape.leaf(t(&[1, 1, 2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let y = tape.conv2d(x, k, 0, 1).unwrap();
        assert_eq!(tape.shape(y), &[1, 1, 1, 1]);
        assert_eq!(tape.value(y).data(), &[5.0]);
    }

    #[test]
    fn matches_naive_loop_oracle_on_random_shapes() {
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut next = move || {
            // splitmix64 step, local to the test
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z = z ^ (z >> 31);
            (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for case in 0..100 {
            let (n, c, f) = (1 + case % 2, 1 + case % 3, 1 + case % 2);
            let (h, w) = (4 + case % 5, 4 + case % 4);
            let k = 1 + case % 3;
            let pad = case % 2;
            let stride = 1 + case % 2;
            let input = Tensor::from_vec(
                vec![n, c, h, w],
                (0..n * c * h * w).map(|_| next()).collect(),
            )
            .unwrap();
            let kernel = Tensor::from_vec(
                vec![f, c, k, k],
                (0..f * c * k * k).map(|_| next()).collect(),
            )
            .unwrap();

            let mut tape = Tape::new();
            let xi = tape.leaf(input.clone());
            let ki = tape.leaf(kernel.clone());
            let y = tape.conv2d(xi, ki, pad, stride).unwrap();
            let expect = naive_conv(&input, &kernel, pad, stride);
            assert!(
                tape.value(y).max_abs_diff(&expect) <= 1e-12,
                "case {case}: conv2d deviates from naive oracle"
            );
        }
    }

    #[test]
    fn channel_mismatch_is_fatal() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::zeros(vec![1, 3, 8, 8]));
        let k = tape.leaf(Tensor::zeros(vec![2, 2, 3, 3]));
        assert!(tape.conv2d(x, k, 0, 1).is_err());
    }
}
