//! Dense numerical kernels shared by tracked and untracked evaluation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use super::DiffError;

/// Spatial padding mode of [`conv2d`](super::Graph::conv2d).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// No padding; output shrinks by `kernel - 1`.
    Valid,
    /// Zero padding of `(kernel - 1) / 2` on each side; odd kernels only.
    Same,
}

/// Standard normal CDF `Φ(x) = (1 + erf(x/√2)) / 2`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

/// Exact GELU, `x Φ(x)`.
pub fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

/// d/dx of [`gelu`]: `Φ(x) + x φ(x)`.
pub fn gelu_derivative(x: f64) -> f64 {
    let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    normal_cdf(x) + x * pdf
}

pub(crate) fn check_matmul(a: &[usize], b: &[usize]) -> Result<(), DiffError> {
    if a.len() != 2 || b.len() != 2 || a[1] != b[0] {
        return Err(DiffError::ShapeMismatch {
            op: "matmul",
            lhs: a.to_vec(),
            rhs: b.to_vec(),
        });
    }
    Ok(())
}

/// `out += a[m×k] · b[k×n]`.
pub(crate) fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, bv) in row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m×k] += g[m×n] · b[k×n]ᵀ`.
pub(crate) fn matmul_grad_lhs(g: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let b_row = &b[p * n..(p + 1) * n];
            out[i * k + p] += g_row.iter().zip(b_row).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// `out[k×n] += a[m×k]ᵀ · g[m×n]`.
pub(crate) fn matmul_grad_rhs(a: &[f64], g: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let o_row = &mut out[p * n..(p + 1) * n];
            for (o, gv) in o_row.iter_mut().zip(g_row) {
                *o += av * gv;
            }
        }
    }
}

/// Geometry of a single-sample 2-D convolution.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDims {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub o: usize,
    pub kh: usize,
    pub kw: usize,
    pub pad_h: usize,
    pub pad_w: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvDims {
    pub fn new(input: &[usize], kernel: &[usize], padding: Padding) -> Result<Self, DiffError> {
        if input.len() != 3 || kernel.len() != 4 || input[0] != kernel[1] {
            return Err(DiffError::ShapeMismatch {
                op: "conv2d",
                lhs: input.to_vec(),
                rhs: kernel.to_vec(),
            });
        }
        let (c, h, w) = (input[0], input[1], input[2]);
        let (o, kh, kw) = (kernel[0], kernel[2], kernel[3]);
        let (pad_h, pad_w) = match padding {
            Padding::Valid => (0, 0),
            Padding::Same => {
                if kh % 2 == 0 || kw % 2 == 0 {
                    return Err(DiffError::Invalid("same padding needs odd kernel sizes"));
                }
                ((kh - 1) / 2, (kw - 1) / 2)
            }
        };
        if kh > h + 2 * pad_h || kw > w + 2 * pad_w || kh == 0 || kw == 0 {
            return Err(DiffError::KernelTooLarge {
                kernel: kernel.to_vec(),
                input: input.to_vec(),
            });
        }
        Ok(Self {
            c,
            h,
            w,
            o,
            kh,
            kw,
            pad_h,
            pad_w,
            oh: h + 2 * pad_h - kh + 1,
            ow: w + 2 * pad_w - kw + 1,
        })
    }

    /// Output rows `i` (and input row `i + u - pad`) valid for kernel row `u`.
    fn rows(&self, u: usize) -> (usize, usize) {
        let lo = self.pad_h.saturating_sub(u);
        let hi = (self.h + self.pad_h).saturating_sub(u).min(self.oh);
        (lo, hi.max(lo))
    }

    fn cols(&self, v: usize) -> (usize, usize) {
        let lo = self.pad_w.saturating_sub(v);
        let hi = (self.w + self.pad_w).saturating_sub(v).min(self.ow);
        (lo, hi.max(lo))
    }
}

pub(crate) fn conv2d_forward(d: &ConvDims, input: &[f64], kernel: &[f64], bias: Option<&[f64]>) -> Vec<f64> {
    let mut out = vec![0.0; d.o * d.oh * d.ow];
    for o in 0..d.o {
        let plane = &mut out[o * d.oh * d.ow..(o + 1) * d.oh * d.ow];
        if let Some(b) = bias {
            plane.iter_mut().for_each(|v| *v = b[o]);
        }
        for c in 0..d.c {
            let in_plane = &input[c * d.h * d.w..(c + 1) * d.h * d.w];
            for u in 0..d.kh {
                let (i0, i1) = d.rows(u);
                for v in 0..d.kw {
                    let wgt = kernel[((o * d.c + c) * d.kh + u) * d.kw + v];
                    let (j0, j1) = d.cols(v);
                    for i in i0..i1 {
                        let src_row = i + u - d.pad_h;
                        let src = &in_plane[src_row * d.w + j0 + v - d.pad_w..src_row * d.w + j1 + v - d.pad_w];
                        let dst = &mut plane[i * d.ow + j0..i * d.ow + j1];
                        for (y, x) in dst.iter_mut().zip(src) {
                            *y += wgt * x;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates input, kernel and bias gradients of a convolution.
pub(crate) fn conv2d_backward(
    d: &ConvDims,
    input: &[f64],
    kernel: &[f64],
    grad_out: &[f64],
    mut grad_input: Option<&mut [f64]>,
    mut grad_kernel: Option<&mut [f64]>,
    grad_bias: Option<&mut [f64]>,
) {
    if let Some(gb) = grad_bias {
        for o in 0..d.o {
            gb[o] += grad_out[o * d.oh * d.ow..(o + 1) * d.oh * d.ow].iter().sum::<f64>();
        }
    }
    for o in 0..d.o {
        let g_plane = &grad_out[o * d.oh * d.ow..(o + 1) * d.oh * d.ow];
        for c in 0..d.c {
            let in_off = c * d.h * d.w;
            for u in 0..d.kh {
                let (i0, i1) = d.rows(u);
                for v in 0..d.kw {
                    let k_idx = ((o * d.c + c) * d.kh + u) * d.kw + v;
                    let (j0, j1) = d.cols(v);
                    let wgt = kernel[k_idx];
                    let mut acc = 0.0;
                    for i in i0..i1 {
                        let src_row = i + u - d.pad_h;
                        let s0 = in_off + src_row * d.w + j0 + v - d.pad_w;
                        let s1 = s0 + (j1 - j0);
                        let g = &g_plane[i * d.ow + j0..i * d.ow + j1];
                        if grad_kernel.is_some() {
                            acc += g.iter().zip(&input[s0..s1]).map(|(a, b)| a * b).sum::<f64>();
                        }
                        if let Some(gi) = grad_input.as_deref_mut() {
                            for (dst, gv) in gi[s0..s1].iter_mut().zip(g) {
                                *dst += wgt * gv;
                            }
                        }
                    }
                    if let Some(gk) = grad_kernel.as_deref_mut() {
                        gk[k_idx] += acc;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gelu_basics() {
        assert_eq!(gelu(0.0), 0.0);
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-15);
        assert!((gelu(1.0) - 0.8413447460685429).abs() < 1e-15);
    }

    #[test]
    fn conv_same_matches_direct_sum() {
        // Direct definition with explicit zero padding as the oracle.
        let d = ConvDims::new(&[2, 4, 5], &[3, 2, 3, 3], Padding::Same).unwrap();
        let input: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let kernel: Vec<f64> = (0..54).map(|i| (i as f64 * 0.11).cos()).collect();
        let bias = [0.1, -0.2, 0.3];
        let out = conv2d_forward(&d, &input, &kernel, Some(&bias));
        for o in 0..3 {
            for i in 0..4 {
                for j in 0..5 {
                    let mut s = bias[o];
                    for c in 0..2 {
                        for u in 0..3 {
                            for v in 0..3 {
                                let (ii, jj) = (i as isize + u as isize - 1, j as isize + v as isize - 1);
                                if ii >= 0 && ii < 4 && jj >= 0 && jj < 5 {
                                    s += input[c * 20 + ii as usize * 5 + jj as usize]
                                        * kernel[((o * 2 + c) * 3 + u) * 3 + v];
                                }
                            }
                        }
                    }
                    assert!((out[o * 20 + i * 5 + j] - s).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn conv_rejects_oversized_kernel() {
        assert!(matches!(
            ConvDims::new(&[1, 2, 2], &[1, 1, 3, 3], Padding::Valid),
            Err(DiffError::KernelTooLarge { .. })
        ));
        assert!(ConvDims::new(&[2, 5, 5], &[1, 1, 3, 3], Padding::Valid).is_err());
    }
}
