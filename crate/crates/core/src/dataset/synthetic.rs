//! Three-class synthetic texture patches standing in for annotated CT patches.
//!
//! * class 0: large dark circles with a bright wall (airway-like)
//! * class 1: low-intensity background riddled with small dark holes (emphysema-like)
//! * class 2: medium-intensity background with small bright dots (tissue-like)
//!
//! A fraction of patches is split by a random straight boundary with the
//! texture of another class on the minority side; these carry the majority
//! class label and form the hard, boundary-like cases. Acquisition noise is
//! a per-patch intensity offset and gain plus per-pixel Gaussian noise, all
//! scaled by `noise_sigma`.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{HiddenLabels, LabeledPatch, Origin, UnlabeledPatch, UnlabeledPool};
use crate::error::{Error, Result};
use crate::network::PATCH_SIZE;
use crate::numerics::Tensor;
use crate::NUM_CLASSES;

/// Pixels are quantized to multiples of this step so they are exact in `f32`.
pub const QUANT_STEPS: f64 = 4096.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassTexture {
    pub base_intensity: f64,
    /// Amplitude of the smooth low-frequency background variation.
    pub background_amplitude: f64,
    /// Expected number of blobs per patch.
    pub blob_density: f64,
    pub blob_radius: (f64, f64),
    pub blob_intensity: f64,
    /// Intensity of a ring drawn around each blob, if any.
    pub rim_intensity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub classes: [ClassTexture; NUM_CLASSES],
    pub labeled_per_class: usize,
    pub pool_size: usize,
    /// Relative class frequencies in the unlabeled pool.
    pub pool_class_weights: [f64; NUM_CLASSES],
    pub benchmark_per_class: usize,
    pub noise_sigma: f64,
    /// Probability that a patch contains a boundary with another class texture.
    pub boundary_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: [
                ClassTexture {
                    base_intensity: 0.55,
                    background_amplitude: 0.03,
                    blob_density: 1.3,
                    blob_radius: (4.0, 7.0),
                    blob_intensity: 0.10,
                    rim_intensity: Some(0.85),
                },
                ClassTexture {
                    base_intensity: 0.32,
                    background_amplitude: 0.03,
                    blob_density: 9.0,
                    blob_radius: (1.5, 3.5),
                    blob_intensity: 0.06,
                    rim_intensity: None,
                },
                ClassTexture {
                    base_intensity: 0.66,
                    background_amplitude: 0.05,
                    blob_density: 6.0,
                    blob_radius: (1.0, 2.5),
                    blob_intensity: 0.92,
                    rim_intensity: None,
                },
            ],
            labeled_per_class: 600,
            pool_size: 3000,
            pool_class_weights: [1.0; NUM_CLASSES],
            benchmark_per_class: 200,
            noise_sigma: 0.12,
            boundary_fraction: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("invalid synthetic spec: {m}")));
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.boundary_fraction) {
            return bad("boundary_fraction must be in [0,1]");
        }
        if self.pool_class_weights.iter().any(|&w| !(w >= 0.0))
            || self.pool_class_weights.iter().sum::<f64>() <= 0.0
        {
            return bad("pool class weights must be non-negative with a positive sum");
        }
        for c in &self.classes {
            let (lo, hi) = c.blob_radius;
            if !(lo > 0.0 && hi >= lo && hi < PATCH_SIZE as f64 / 2.0) {
                return bad("blob radius range must satisfy 0 < lo <= hi < 18");
            }
            if c.blob_density < 0.0 {
                return bad("blob density must be >= 0");
            }
        }
        Ok(())
    }
}

/// Everything the generator produces. The pool's true labels are kept apart
/// in `pool_truth`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub labeled: Vec<LabeledPatch>,
    pub pool: UnlabeledPool,
    pub pool_truth: HiddenLabels,
    pub benchmark: Vec<LabeledPatch>,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut labeled = Vec::with_capacity(spec.labeled_per_class * NUM_CLASSES);
    for i in 0..spec.labeled_per_class * NUM_CLASSES {
        let class = i % NUM_CLASSES;
        labeled.push(LabeledPatch::new(
            render(spec, class, &mut rng),
            class,
            Origin::Manual,
        )?);
    }

    let total_w: f64 = spec.pool_class_weights.iter().sum();
    let mut pool = Vec::with_capacity(spec.pool_size);
    let mut truth = HashMap::with_capacity(spec.pool_size);
    for id in 0..spec.pool_size as u64 {
        let mut u = rng.random::<f64>() * total_w;
        let mut class = NUM_CLASSES - 1;
        for (c, &w) in spec.pool_class_weights.iter().enumerate() {
            if u < w {
                class = c;
                break;
            }
            u -= w;
        }
        pool.push(UnlabeledPatch::new(render(spec, class, &mut rng), id)?);
        truth.insert(id, class);
    }

    let mut benchmark = Vec::with_capacity(spec.benchmark_per_class * NUM_CLASSES);
    for i in 0..spec.benchmark_per_class * NUM_CLASSES {
        let class = i % NUM_CLASSES;
        benchmark.push(LabeledPatch::new(
            render(spec, class, &mut rng),
            class,
            Origin::Manual,
        )?);
    }

    Ok(SyntheticData {
        labeled,
        pool: UnlabeledPool::new(pool)?,
        pool_truth: HiddenLabels::new(truth),
        benchmark,
    })
}

fn texture(tex: &ClassTexture, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = PATCH_SIZE;
    let mut img = vec![tex.base_intensity; n * n];

    // Two random low-frequency waves.
    for _ in 0..2 {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let freq = rng.random_range(0.08..0.25);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let (kx, ky) = (freq * theta.cos(), freq * theta.sin());
        for y in 0..n {
            for x in 0..n {
                img[y * n + x] +=
                    0.5 * tex.background_amplitude * (kx * x as f64 + ky * y as f64 + phase).sin();
            }
        }
    }

    let whole = tex.blob_density.floor() as usize;
    let count = whole + usize::from(rng.random::<f64>() < tex.blob_density - whole as f64);
    for _ in 0..count {
        let (lo, hi) = tex.blob_radius;
        let r = if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        };
        let cx = rng.random_range(r..n as f64 - r);
        let cy = rng.random_range(r..n as f64 - r);
        let rim_width = 1.5;
        for y in 0..n {
            for x in 0..n {
                let d = ((x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2)).sqrt();
                let px = &mut img[y * n + x];
                // Soft one-pixel edges.
                let inside = (r + 0.5 - d).clamp(0.0, 1.0);
                if let Some(rim) = tex.rim_intensity {
                    let ring = (r + rim_width + 0.5 - d).clamp(0.0, 1.0) - inside;
                    *px += ring * (rim - *px);
                }
                *px += inside * (tex.blob_intensity - *px);
            }
        }
    }
    img
}

fn render(spec: &SyntheticSpec, class: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let n = PATCH_SIZE;
    let mut img = texture(&spec.classes[class], rng);

    if rng.random::<f64>() < spec.boundary_fraction {
        let other = (class + rng.random_range(1..NUM_CLASSES)) % NUM_CLASSES;
        let foreign = texture(&spec.classes[other], rng);
        // Half-plane through a point offset from the centre so the foreign
        // side covers well under half of the patch.
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let offset = rng.random_range(3.0..10.0);
        let (nx, ny) = (theta.cos(), theta.sin());
        let c = n as f64 / 2.0;
        for y in 0..n {
            for x in 0..n {
                let s = (x as f64 + 0.5 - c) * nx + (y as f64 + 0.5 - c) * ny - offset;
                let w = (s + 0.5).clamp(0.0, 1.0);
                let i = y * n + x;
                img[i] += w * (foreign[i] - img[i]);
            }
        }
    }

    if spec.noise_sigma > 0.0 {
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let offset = 1.5 * spec.noise_sigma * unit.sample(rng);
        let gain = 1.0 + spec.noise_sigma * unit.sample(rng);
        for v in img.iter_mut() {
            *v = gain * *v + offset + spec.noise_sigma * unit.sample(rng);
        }
    }

    let data = img
        .into_iter()
        .map(|v| (v.clamp(0.0, 1.0) * QUANT_STEPS).round() / QUANT_STEPS)
        .collect();
    Tensor::new(vec![1, n, n], data).expect("patch shape")
}
