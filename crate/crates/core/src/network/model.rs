use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::Architecture;
use crate::error::{Error, Result};
use crate::numerics::{
    conv2d_backward_cols, conv2d_forward_cols, dropout, dropout_backward, global_maxpool,
    leaky_relu, leaky_relu_backward, linear, linear_backward, maxpool2x2, pool_backward, softmax,
    DropoutMask, GradPair, Padding, Pooled, Tensor,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub arch: Architecture,
    pub params: Vec<GradPair>,
    pub rng_seed: u64,
    pub trained_iterations: u64,
}

struct ConvCache {
    input: Tensor,
    cols: Vec<f64>,
    pre: Tensor,
    pool: Pooled,
}

struct FcCache {
    input: Tensor,
    pre: Tensor,
    mask: DropoutMask,
}

/// Intermediate values kept from a forward pass for backpropagation.
pub struct Trace {
    convs: Vec<ConvCache>,
    fcs: Vec<FcCache>,
}

/// Fan-in scaled uniform init for weights, zeros for biases.
pub fn build_model(arch: Architecture, seed: u64) -> Result<CnnModel> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = arch
        .param_shapes()
        .into_iter()
        .map(|shape| {
            if shape.len() == 1 {
                return GradPair::new(Tensor::zeros(&shape));
            }
            let fan_in: usize = shape[1..].iter().product();
            let bound = (6.0 / fan_in as f64).sqrt();
            let n = shape.iter().product();
            let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
            GradPair::new(Tensor::new(shape, data).expect("shape from architecture"))
        })
        .collect();
    Ok(CnnModel {
        arch,
        params,
        rng_seed: seed,
        trained_iterations: 0,
    })
}

impl CnnModel {
    fn n_conv(&self) -> usize {
        self.arch.conv_kernel_counts.len()
    }

    fn check_input(&self, patch: &Tensor) -> Result<()> {
        let (c, h, w) = self.arch.input_shape;
        if patch.shape() != [c, h, w] {
            return Err(Error::dim(format!(
                "patch shape {:?} does not match network input [{c}, {h}, {w}]",
                patch.shape()
            )));
        }
        Ok(())
    }

    /// Runs the network and returns the logits plus the trace needed by
    /// [`CnnModel::backward`]. Dropout is active only when `rng` is given.
    pub fn forward(
        &self,
        patch: &Tensor,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Tensor, Trace)> {
        self.check_input(patch)?;
        let slope = self.arch.leaky_slope;
        let n_conv = self.n_conv();
        let mut x = patch.clone();
        let mut convs = Vec::with_capacity(n_conv);
        for i in 0..n_conv {
            let (pre, cols) = conv2d_forward_cols(
                &x,
                &self.params[2 * i].value,
                &self.params[2 * i + 1].value,
                Padding::Same,
            )?;
            let act = leaky_relu(&pre, slope);
            let pool = if i + 1 < n_conv {
                maxpool2x2(&act)?
            } else {
                global_maxpool(&act)?
            };
            let next = pool.output.clone();
            convs.push(ConvCache {
                input: std::mem::replace(&mut x, next),
                cols,
                pre,
                pool,
            });
        }

        let n_fc = self.arch.fc_sizes.len();
        let mut fcs = Vec::with_capacity(n_fc);
        for j in 0..n_fc {
            let k = 2 * (n_conv + j);
            let pre = linear(&x, &self.params[k].value, &self.params[k + 1].value)?;
            let (next, mask) = if j + 1 < n_fc {
                let act = leaky_relu(&pre, slope);
                match rng.as_deref_mut() {
                    Some(r) => dropout(&act, self.arch.dropout_rate, r, true)?,
                    None => (act, None),
                }
            } else {
                (pre.clone(), None)
            };
            fcs.push(FcCache {
                input: std::mem::replace(&mut x, next),
                pre,
                mask,
            });
        }
        Ok((x, Trace { convs, fcs }))
    }

    /// Backpropagates `grad_logits` and adds parameter gradients into `self.params[..].grad`.
    pub fn backward(&mut self, trace: &Trace, grad_logits: &Tensor) -> Result<()> {
        let slope = self.arch.leaky_slope;
        let n_conv = self.n_conv();
        let n_fc = trace.fcs.len();
        let mut g = grad_logits.clone();
        for j in (0..n_fc).rev() {
            let cache = &trace.fcs[j];
            if j + 1 < n_fc {
                g = dropout_backward(&g, &cache.mask);
                g = leaky_relu_backward(&cache.pre, &g, slope)?;
            }
            let k = 2 * (n_conv + j);
            let grads = linear_backward(&cache.input, &self.params[k].value, &g)?;
            self.params[k].grad.axpy(1.0, &grads.weight)?;
            self.params[k + 1].grad.axpy(1.0, &grads.bias)?;
            g = grads.input;
        }
        for i in (0..n_conv).rev() {
            let cache = &trace.convs[i];
            g = pool_backward(&cache.pool, &g)?;
            g = leaky_relu_backward(&cache.pre, &g, slope)?;
            let grads = conv2d_backward_cols(
                &cache.input,
                &cache.cols,
                &self.params[2 * i].value,
                &g,
                Padding::Same,
                i > 0,
            )?;
            self.params[2 * i].grad.axpy(1.0, &grads.kernels)?;
            self.params[2 * i + 1].grad.axpy(1.0, &grads.bias)?;
            g = grads.input;
        }
        Ok(())
    }

    /// Inference-mode logits.
    pub fn logits(&self, patch: &Tensor) -> Result<Tensor> {
        self.forward(patch, None).map(|(z, _)| z)
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(GradPair::zero_grad);
    }
}

/// Class probabilities for one patch, dropout disabled.
pub fn forward_proba(model: &CnnModel, patch: &Tensor) -> Result<Tensor> {
    Ok(softmax(&model.logits(patch)?))
}
