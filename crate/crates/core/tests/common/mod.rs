//! Reference implementations shared by the integration tests. None of these
//! call into the crate's own statistics code.
#![allow(dead_code)]

use std::path::Path;

use rand::Rng;
use spcnn::bootstrap::PredictionMatrix;
use spcnn::pipeline::PipelineConfig;
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

pub fn statrs_t_cdf(t: f64, dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof).unwrap().cdf(t)
}

fn t_pdf(x: f64, dof: f64) -> f64 {
    let ln_norm =
        ln_gamma((dof + 1.0) / 2.0) - ln_gamma(dof / 2.0) - 0.5 * (dof * std::f64::consts::PI).ln();
    (ln_norm - (dof + 1.0) / 2.0 * (1.0 + x * x / dof).ln()).exp()
}

fn simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Student-t CDF by adaptive Simpson integration of the density over [0, |t|].
pub fn quadrature_t_cdf(t: f64, dof: f64) -> f64 {
    let f = |x: f64| t_pdf(x, dof);
    let b = t.abs();
    if b == 0.0 {
        return 0.5;
    }
    let (fa, fm, fb) = (f(0.0), f(0.5 * b), f(b));
    let whole = b / 6.0 * (fa + 4.0 * fm + fb);
    let area = simpson(&f, 0.0, b, fa, fm, fb, whole, 1e-14, 60);
    if t > 0.0 {
        0.5 + area
    } else {
        0.5 - area
    }
}

pub struct WelchOracle {
    pub t: f64,
    pub dof: f64,
    pub p: f64,
}

/// Textbook Welch statistic with a statrs upper tail.
pub fn welch_oracle(a: &[f64], b: &[f64]) -> WelchOracle {
    let stats = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
        (m, v / n, n)
    };
    let (ma, sa, na) = stats(a);
    let (mb, sb, nb) = stats(b);
    let t = (ma - mb) / (sa + sb).sqrt();
    let dof = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let p = StudentsT::new(0.0, 1.0, dof).unwrap().sf(t);
    WelchOracle { t, dof, p }
}

/// Benjamini–Hochberg by counting: `k* = max{k : #{p_j <= k·α/m} >= k}`;
/// reject every `p_j <= k*·α/m`.
pub fn bh_oracle(p: &[f64], alpha: f64) -> Vec<bool> {
    let m = p.len();
    let k_star = (1..=m)
        .rev()
        .find(|&k| {
            p.iter()
                .filter(|&&x| x <= k as f64 * alpha / m as f64)
                .count()
                >= k
        })
        .unwrap_or(0);
    let cut = k_star as f64 * alpha / m as f64;
    p.iter().map(|&x| k_star > 0 && x <= cut).collect()
}

/// A random bootstrap matrix whose rows lean towards a random class with a
/// random confidence, roughly like real ensemble output.
pub fn random_matrix(rng: &mut impl Rng, patch_id: u64, n_networks: usize) -> PredictionMatrix {
    let lean = rng.random_range(0..3);
    let strength = rng.random_range(0.0..4.0);
    let spread = rng.random_range(0.05..1.5);
    let rows = (0..n_networks)
        .map(|_| {
            let mut z = [0.0; 3];
            for (c, v) in z.iter_mut().enumerate() {
                *v = rng.random_range(-spread..spread) + if c == lean { strength } else { 0.0 };
            }
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
            let s: f64 = e.iter().sum();
            [e[0] / s, e[1] / s, e[2] / s]
        })
        .collect();
    PredictionMatrix::new(patch_id, rows).unwrap()
}

/// A small synthetic configuration that runs in a few seconds.
pub fn tiny_config(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::from_text(
        "synthetic.labeled_per_class = 30
         synthetic.pool_size = 120
         synthetic.benchmark_per_class = 20
         split.train_per_class = 20
         split.verify_per_class = 10
         arch.variant = custom
         arch.conv = 4,6,8
         arch.fc = 16,3
         train.epochs = 4
         bootstrap.n_networks = 4
         selection.alpha = 0.1",
    )
    .unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg
}

/// The reduced-scale desk experiment configuration.
pub fn desk_config(out: &Path, seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::from_text(
        "synthetic.labeled_per_class = 600
         synthetic.pool_size = 3000
         synthetic.benchmark_per_class = 200
         split.train_per_class = 100
         split.verify_per_class = 200
         arch.variant = custom
         arch.conv = 12,20,32,45
         arch.fc = 270,90,3
         train.epochs = 15
         bootstrap.n_networks = 10
         selection.alpha = 0.1
         rounds = 1",
    )
    .unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg.seed = seed;
    cfg
}
