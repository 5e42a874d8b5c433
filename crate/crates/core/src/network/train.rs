use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{forward_proba, CnnModel};
use crate::dataset::{class_counts, LabeledPatch};
use crate::error::{Error, Result};
use crate::numerics::{sgd_step, softmax_cross_entropy, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Drives shuffling and dropout masks.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 16,
            epochs: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0,1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Accuracy on the verification patches after the last epoch, if any were given.
    pub verify_accuracy: Option<f64>,
}

/// Mini-batch momentum SGD on mean cross-entropy. Deterministic in
/// (`model`, `data`, `cfg`).
pub fn train(
    model: &mut CnnModel,
    data: &[LabeledPatch],
    verify: &[LabeledPatch],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if let Some(empty) = class_counts(data).iter().position(|&c| c == 0) {
        return Err(Error::Data(format!(
            "class {empty} has no training patches"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut velocity: Vec<Tensor> = model
        .params
        .iter()
        .map(|p| Tensor::zeros(p.value.shape()))
        .collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    model.zero_grad();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (logits, trace) = model.forward(&data[i].pixels, Some(&mut rng))?;
                let xent = softmax_cross_entropy(&logits, data[i].label)?;
                total += xent.loss;
                let mut g = xent.grad_logits;
                g.scale(scale);
                model.backward(&trace, &g)?;
            }
            sgd_step(
                &mut model.params,
                &mut velocity,
                cfg.learning_rate,
                cfg.momentum,
            )?;
            model.trained_iterations += 1;
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Numeric(format!(
                "training loss diverged at epoch {}",
                epoch + 1
            )));
        }
        epoch_losses.push(mean);
    }

    let verify_accuracy = if verify.is_empty() {
        None
    } else {
        Some(accuracy(model, verify)?)
    };
    Ok(TrainReport {
        epoch_losses,
        verify_accuracy,
    })
}

/// Predicted class (argmax of probabilities) for each patch.
pub fn predict_labels(model: &CnnModel, patches: &[LabeledPatch]) -> Result<Vec<usize>> {
    patches
        .iter()
        .map(|p| forward_proba(model, &p.pixels).map(|pr| pr.argmax()))
        .collect()
}

pub fn accuracy(model: &CnnModel, patches: &[LabeledPatch]) -> Result<f64> {
    if patches.is_empty() {
        return Err(Error::Data("accuracy of an empty set".into()));
    }
    let preds = predict_labels(model, patches)?;
    let hits = preds
        .iter()
        .zip(patches)
        .filter(|(p, t)| **p == t.label)
        .count();
    Ok(hits as f64 / patches.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, split, Origin, SplitSpec, SyntheticSpec};
    use crate::network::{build_model, Architecture};

    fn small_arch() -> Architecture {
        Architecture::custom(vec![6, 8, 10, 12], vec![24, 12, 3])
    }

    #[test]
    fn overfits_two_patches() {
        let d = generate_synthetic(&SyntheticSpec {
            labeled_per_class: 1,
            pool_size: 0,
            benchmark_per_class: 0,
            seed: 5,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let data: Vec<_> = d.labeled.into_iter().filter(|p| p.label < 2).collect();
        let mut arch = small_arch();
        arch.dropout_rate = 0.0;
        let mut model = build_model(arch, 1).unwrap();
        // train() insists on every class being present; a constant patch stands in for class 2.
        let mut with_third = data.clone();
        with_third.push(
            LabeledPatch::new(
                crate::numerics::Tensor::full(&[1, 36, 36], 1.0),
                2,
                Origin::Manual,
            )
            .unwrap(),
        );
        let cfg = TrainConfig {
            batch_size: 3,
            epochs: 150,
            learning_rate: 0.02,
            ..TrainConfig::default()
        };
        train(&mut model, &with_third, &[], &cfg).unwrap();
        for p in &data {
            let pr = forward_proba(&model, &p.pixels).unwrap();
            assert!(pr.data()[p.label] > 0.9, "{:?}", pr.data());
        }
    }

    #[test]
    fn empty_class_rejected() {
        let mut model = build_model(small_arch(), 0).unwrap();
        let p = LabeledPatch::new(
            crate::numerics::Tensor::zeros(&[1, 36, 36]),
            0,
            Origin::Manual,
        )
        .unwrap();
        let err = train(&mut model, &[p], &[], &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn deterministic_and_descending() {
        let d = generate_synthetic(&SyntheticSpec {
            labeled_per_class: 30,
            pool_size: 0,
            benchmark_per_class: 0,
            seed: 2,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            seed: 11,
            ..TrainConfig::default()
        };
        let mut a = build_model(small_arch(), 3).unwrap();
        let mut b = build_model(small_arch(), 3).unwrap();
        let ra = train(&mut a, &d.labeled, &[], &cfg).unwrap();
        let rb = train(&mut b, &d.labeled, &[], &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            ra.epoch_losses.last().unwrap().to_bits(),
            rb.epoch_losses.last().unwrap().to_bits()
        );
        assert!(ra.epoch_losses.last().unwrap() < &ra.epoch_losses[0]);
        assert_eq!(a.trained_iterations, 5 * 90u64.div_ceil(16));
    }

    #[test]
    fn learns_synthetic_classes() {
        let d = generate_synthetic(&SyntheticSpec {
            labeled_per_class: 130,
            pool_size: 0,
            benchmark_per_class: 0,
            noise_sigma: 0.03,
            boundary_fraction: 0.0,
            seed: 3,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let (tr, ve) = split(
            &d.labeled,
            &SplitSpec {
                train_per_class: 30,
                verify_per_class: 100,
                seed: 1,
            },
        )
        .unwrap();
        let mut model = build_model(
            Architecture::custom(vec![12, 20, 32, 45], vec![270, 90, 3]),
            4,
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            seed: 4,
            ..TrainConfig::default()
        };
        let r = train(&mut model, &tr, &ve, &cfg).unwrap();
        let acc = r.verify_accuracy.unwrap();
        assert!(acc > 0.8, "verify accuracy {acc}");
    }
}
