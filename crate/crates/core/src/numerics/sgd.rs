use super::tensor::{GradPair, Tensor};
use crate::error::{Error, Result};

/// One momentum-SGD update: `v ← μ·v − lr·g; θ ← θ + v`, then gradients are zeroed.
pub fn sgd_step(
    params: &mut [GradPair],
    velocity: &mut [Tensor],
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if params.len() != velocity.len() {
        return Err(Error::dim(format!(
            "{} parameters but {} velocity buffers",
            params.len(),
            velocity.len()
        )));
    }
    for (p, v) in params.iter_mut().zip(velocity.iter_mut()) {
        if p.value.shape() != v.shape() {
            return Err(Error::dim("velocity shape does not match parameter"));
        }
        for ((theta, vel), g) in p
            .value
            .data_mut()
            .iter_mut()
            .zip(v.data_mut().iter_mut())
            .zip(p.grad.data())
        {
            *vel = momentum * *vel - lr * g;
            *theta += *vel;
        }
        p.zero_grad();
    }
    Ok(())
}
