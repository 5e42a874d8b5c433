use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Output of a max-pool forward pass. `argmax[i]` is the flat input index
/// that produced output element `i`.
#[derive(Debug, Clone)]
pub struct Pooled {
    pub output: Tensor,
    pub argmax: Vec<usize>,
    pub input_shape: Vec<usize>,
}

/// 2×2 max pooling with stride 2. A trailing odd row or column is dropped.
/// Ties resolve to the first maximum in row-major window order.
pub fn maxpool2x2(input: &Tensor) -> Result<Pooled> {
    let (c, h, w) = input.dims3()?;
    if h < 2 || w < 2 {
        return Err(Error::dim(format!(
            "maxpool2x2 needs H,W >= 2, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for y in 0..oh {
            for xx in 0..ow {
                let top = base + 2 * y * w + 2 * xx;
                let mut best = top;
                for idx in [top + 1, top + w, top + w + 1] {
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok(Pooled {
        output: Tensor::new(vec![c, oh, ow], out)?,
        argmax,
        input_shape: input.shape().to_vec(),
    })
}

/// Per-channel maximum over all spatial positions, `[C,H,W] -> [C]`.
pub fn global_maxpool(input: &Tensor) -> Result<Pooled> {
    let (c, h, w) = input.dims3()?;
    let plane = h * w;
    let x = input.data();
    let mut out = Vec::with_capacity(c);
    let mut argmax = Vec::with_capacity(c);
    for ch in 0..c {
        let base = ch * plane;
        let mut best = base;
        for idx in base + 1..base + plane {
            if x[idx] > x[best] {
                best = idx;
            }
        }
        out.push(x[best]);
        argmax.push(best);
    }
    Ok(Pooled {
        output: Tensor::new(vec![c], out)?,
        argmax,
        input_shape: input.shape().to_vec(),
    })
}

/// Routes each upstream gradient entry to the recorded argmax position.
pub fn pool_backward(pooled: &Pooled, grad_out: &Tensor) -> Result<Tensor> {
    if grad_out.len() != pooled.argmax.len() {
        return Err(Error::dim(format!(
            "pool grad has {} entries, expected {}",
            grad_out.len(),
            pooled.argmax.len()
        )));
    }
    let mut grad = Tensor::zeros(&pooled.input_shape);
    let g = grad.data_mut();
    for (&idx, &go) in pooled.argmax.iter().zip(grad_out.data()) {
        g[idx] += go;
    }
    Ok(grad)
}
