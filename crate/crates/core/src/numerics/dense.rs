use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Default LeakyReLU negative slope.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// `weight · input + bias` for `input: [n]`, `weight: [m, n]`, `bias: [m]`.
pub fn linear(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (m, n) = linear_dims(input, weight, bias)?;
    let x = input.data();
    let out = weight
        .data()
        .chunks_exact(n)
        .zip(bias.data())
        .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect::<Vec<_>>();
    debug_assert_eq!(out.len(), m);
    Tensor::new(vec![m], out)
}

fn linear_dims(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<(usize, usize)> {
    let (m, n) = match weight.shape()[..] {
        [m, n] => (m, n),
        _ => {
            return Err(Error::dim(format!(
                "weight must be rank 2, got {:?}",
                weight.shape()
            )))
        }
    };
    if input.len() != n {
        return Err(Error::dim(format!(
            "linear input has {} features, weight expects {n}",
            input.len()
        )));
    }
    if bias.len() != m {
        return Err(Error::dim(format!(
            "bias has {} entries, expected {m}",
            bias.len()
        )));
    }
    Ok((m, n))
}

#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

pub fn linear_backward(input: &Tensor, weight: &Tensor, grad_out: &Tensor) -> Result<LinearGrads> {
    let (m, n) = linear_dims(input, weight, grad_out)?;
    let x = input.data();
    let g = grad_out.data();
    let mut gw = vec![0.0; m * n];
    let mut gi = vec![0.0; n];
    for ((row_g, row_w), &go) in gw
        .chunks_exact_mut(n)
        .zip(weight.data().chunks_exact(n))
        .zip(g)
    {
        if go == 0.0 {
            continue;
        }
        for j in 0..n {
            row_g[j] = go * x[j];
            gi[j] += go * row_w[j];
        }
    }
    Ok(LinearGrads {
        input: Tensor::new(input.shape().to_vec(), gi)?,
        weight: Tensor::new(vec![m, n], gw)?,
        bias: grad_out.clone().reshape(vec![m])?,
    })
}

pub fn leaky_relu(input: &Tensor, slope: f64) -> Tensor {
    let mut out = input.clone();
    out.data_mut()
        .iter_mut()
        .for_each(|v| *v = if *v >= 0.0 { *v } else { slope * *v });
    out
}

/// Backward of [`leaky_relu`] given the pre-activation input. The derivative
/// at exactly zero is taken as 1.
pub fn leaky_relu_backward(input: &Tensor, grad_out: &Tensor, slope: f64) -> Result<Tensor> {
    if input.shape() != grad_out.shape() {
        return Err(Error::dim("leaky_relu grad shape mismatch"));
    }
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x >= 0.0 { g } else { slope * g })
        .collect();
    Tensor::new(input.shape().to_vec(), data)
}

/// Per-element multipliers applied by a dropout forward pass (0 or `1/(1-rate)`).
/// `None` means the layer acted as the identity.
pub type DropoutMask = Option<Vec<f64>>;

/// Inverted dropout: at train time each element is zeroed with probability
/// `rate` and survivors are scaled by `1/(1-rate)`. Inference is the identity.
pub fn dropout<R: Rng + ?Sized>(
    input: &Tensor,
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Result<(Tensor, DropoutMask)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!(
            "dropout rate must be in [0,1), got {rate}"
        )));
    }
    if !training || rate == 0.0 {
        return Ok((input.clone(), None));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..input.len())
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep
            }
        })
        .collect();
    let mut out = input.clone();
    out.data_mut()
        .iter_mut()
        .zip(&mask)
        .for_each(|(v, m)| *v *= m);
    Ok((out, Some(mask)))
}

pub fn dropout_backward(grad_out: &Tensor, mask: &DropoutMask) -> Tensor {
    let mut g = grad_out.clone();
    if let Some(mask) = mask {
        g.data_mut().iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
    }
    g
}

/// Numerically stable softmax.
pub fn softmax(logits: &Tensor) -> Tensor {
    let max = logits
        .data()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.data().iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Tensor::new(
        logits.shape().to_vec(),
        exps.into_iter().map(|e| e / total).collect(),
    )
    .expect("same shape as logits")
}

#[derive(Debug, Clone)]
pub struct SoftmaxXent {
    pub loss: f64,
    pub probs: Tensor,
    pub grad_logits: Tensor,
}

pub fn softmax_cross_entropy(logits: &Tensor, true_class: usize) -> Result<SoftmaxXent> {
    if true_class >= logits.len() {
        return Err(Error::Index(format!(
            "class {true_class} out of range for {} logits",
            logits.len()
        )));
    }
    let max = logits
        .data()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = logits.data().iter().map(|&z| z - max).collect();
    let log_total = shifted.iter().map(|s| s.exp()).sum::<f64>().ln();
    let loss = log_total - shifted[true_class];
    let probs = softmax(logits);
    let mut grad = probs.clone();
    grad.data_mut()[true_class] -= 1.0;
    Ok(SoftmaxXent {
        loss,
        probs,
        grad_logits: grad,
    })
}
