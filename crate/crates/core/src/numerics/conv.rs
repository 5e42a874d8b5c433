use super::gemm::{gemm, Op};
use super::tensor::Tensor;
use crate::error::{Error, Result};

const K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero-pad by one pixel; output keeps the input's spatial size.
    Same,
    /// No padding; output shrinks by two in each spatial dimension.
    Valid,
}

impl Padding {
    fn pad(self) -> usize {
        match self {
            Padding::Same => 1,
            Padding::Valid => 0,
        }
    }
}

/// Gradients returned by [`conv2d_backward`].
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub kernels: Tensor,
    pub bias: Tensor,
}

struct Geometry {
    cin: usize,
    cout: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
    pad: usize,
}

fn geometry(input: &Tensor, kernels: &Tensor, padding: Padding) -> Result<Geometry> {
    let (cin, h, w) = input.dims3()?;
    let (cout, kcin, kh, kw) = match kernels.shape()[..] {
        [a, b, c, d] => (a, b, c, d),
        _ => {
            return Err(Error::dim(format!(
                "kernels must be [Cout,Cin,3,3], got {:?}",
                kernels.shape()
            )))
        }
    };
    if kh != K || kw != K {
        return Err(Error::dim(format!("kernel must be 3x3, got {kh}x{kw}")));
    }
    if kcin != cin {
        return Err(Error::dim(format!(
            "input has {cin} channels but kernels expect {kcin}"
        )));
    }
    let pad = padding.pad();
    if h + 2 * pad < K || w + 2 * pad < K {
        return Err(Error::dim(format!(
            "input {h}x{w} too small for 3x3 {padding:?} convolution"
        )));
    }
    Ok(Geometry {
        cin,
        cout,
        h,
        w,
        oh: h + 2 * pad - (K - 1),
        ow: w + 2 * pad - (K - 1),
        pad,
    })
}

/// Unfolds the input into a `[Cin·9, OH·OW]` column matrix.
fn im2col(input: &[f64], g: &Geometry) -> Vec<f64> {
    let n = g.oh * g.ow;
    let mut cols = vec![0.0; g.cin * K * K * n];
    for c in 0..g.cin {
        let plane = &input[c * g.h * g.w..(c + 1) * g.h * g.w];
        for dy in 0..K {
            for dx in 0..K {
                let row = &mut cols[((c * K + dy) * K + dx) * n..][..n];
                for y in 0..g.oh {
                    let iy = y + dy;
                    if iy < g.pad || iy - g.pad >= g.h {
                        continue;
                    }
                    let src = &plane[(iy - g.pad) * g.w..][..g.w];
                    let dst = &mut row[y * g.ow..][..g.ow];
                    for (x, d) in dst.iter_mut().enumerate() {
                        let ix = x + dx;
                        if ix >= g.pad && ix - g.pad < g.w {
                            *d = src[ix - g.pad];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Folds a column-gradient matrix back onto the input layout (adjoint of `im2col`).
fn col2im(cols: &[f64], g: &Geometry) -> Vec<f64> {
    let n = g.oh * g.ow;
    let mut out = vec![0.0; g.cin * g.h * g.w];
    for c in 0..g.cin {
        let plane = &mut out[c * g.h * g.w..(c + 1) * g.h * g.w];
        for dy in 0..K {
            for dx in 0..K {
                let row = &cols[((c * K + dy) * K + dx) * n..][..n];
                for y in 0..g.oh {
                    let iy = y + dy;
                    if iy < g.pad || iy - g.pad >= g.h {
                        continue;
                    }
                    let dst = &mut plane[(iy - g.pad) * g.w..][..g.w];
                    let src = &row[y * g.ow..][..g.ow];
                    for (x, s) in src.iter().enumerate() {
                        let ix = x + dx;
                        if ix >= g.pad && ix - g.pad < g.w {
                            dst[ix - g.pad] += s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Forward pass that also hands back the unfolded input for reuse in backward.
pub(crate) fn conv2d_forward_cols(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    padding: Padding,
) -> Result<(Tensor, Vec<f64>)> {
    let g = geometry(input, kernels, padding)?;
    if bias.len() != g.cout {
        return Err(Error::dim(format!(
            "bias has {} entries, expected {}",
            bias.len(),
            g.cout
        )));
    }
    let n = g.oh * g.ow;
    let cols = im2col(input.data(), &g);
    let mut out = Vec::with_capacity(g.cout * n);
    for &b in bias.data() {
        out.extend(std::iter::repeat_n(b, n));
    }
    gemm(
        g.cout,
        g.cin * K * K,
        n,
        kernels.data(),
        Op::N,
        &cols,
        Op::N,
        1.0,
        &mut out,
    );
    Ok((Tensor::new(vec![g.cout, g.oh, g.ow], out)?, cols))
}

pub fn conv2d_forward(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    padding: Padding,
) -> Result<Tensor> {
    conv2d_forward_cols(input, kernels, bias, padding).map(|(out, _)| out)
}

pub(crate) fn conv2d_backward_cols(
    input: &Tensor,
    cols: &[f64],
    kernels: &Tensor,
    grad_out: &Tensor,
    padding: Padding,
    need_input_grad: bool,
) -> Result<ConvGrads> {
    let g = geometry(input, kernels, padding)?;
    if grad_out.shape() != [g.cout, g.oh, g.ow] {
        return Err(Error::dim(format!(
            "grad_out shape {:?} does not match conv output [{}, {}, {}]",
            grad_out.shape(),
            g.cout,
            g.oh,
            g.ow
        )));
    }
    let n = g.oh * g.ow;
    let ck = g.cin * K * K;

    let mut gk = vec![0.0; g.cout * ck];
    gemm(
        g.cout,
        n,
        ck,
        grad_out.data(),
        Op::N,
        cols,
        Op::T,
        0.0,
        &mut gk,
    );

    let gb: Vec<f64> = grad_out
        .data()
        .chunks_exact(n)
        .map(|c| c.iter().sum())
        .collect();

    let gi = if need_input_grad {
        let mut gcols = vec![0.0; ck * n];
        gemm(
            ck,
            g.cout,
            n,
            kernels.data(),
            Op::T,
            grad_out.data(),
            Op::N,
            0.0,
            &mut gcols,
        );
        col2im(&gcols, &g)
    } else {
        vec![0.0; g.cin * g.h * g.w]
    };

    Ok(ConvGrads {
        input: Tensor::new(vec![g.cin, g.h, g.w], gi)?,
        kernels: Tensor::new(kernels.shape().to_vec(), gk)?,
        bias: Tensor::new(vec![g.cout], gb)?,
    })
}

/// Gradients of `sum(grad_out ⊙ conv2d_forward(input, kernels, ·))`.
pub fn conv2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    grad_out: &Tensor,
    padding: Padding,
) -> Result<ConvGrads> {
    let g = geometry(input, kernels, padding)?;
    let cols = im2col(input.data(), &g);
    conv2d_backward_cols(input, &cols, kernels, grad_out, padding, true)
}
