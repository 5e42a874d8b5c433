//! Bootstrap ensemble: networks trained on class-stratified subsamples of the
//! labeled set, used to score every unlabeled patch.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{indices_by_class, LabeledPatch, UnlabeledPool};
use crate::error::{Error, Result, ResultExt};
use crate::network::{build_model, forward_proba, train, Architecture, CnnModel, TrainConfig};
use crate::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub n_networks: usize,
    pub subsample_fraction: f64,
    /// Network `i` uses `base_seed + i` for its subsample, init and training.
    pub base_seed: u64,
    pub train_cfg: TrainConfig,
    pub n_workers: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_networks: 10,
            subsample_fraction: 0.9,
            base_seed: 0,
            train_cfg: TrainConfig::default(),
            n_workers: 1,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_networks < 2 {
            return Err(Error::Config("bootstrap needs at least 2 networks".into()));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "subsample fraction must be in (0,1], got {}",
                self.subsample_fraction
            )));
        }
        if self.n_workers == 0 {
            return Err(Error::Config("n_workers must be >= 1".into()));
        }
        self.train_cfg.validate()
    }

    fn member_seed(&self, i: usize) -> u64 {
        self.base_seed.wrapping_add(i as u64)
    }
}

/// Bootstrap probabilities for one unlabeled patch: one row per network.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    pub patch_id: u64,
    rows: Vec<[f64; NUM_CLASSES]>,
}

impl PredictionMatrix {
    pub fn new(patch_id: u64, rows: Vec<[f64; NUM_CLASSES]>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Data(format!(
                "patch {patch_id}: prediction matrix has no rows"
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::Data(format!(
                    "patch {patch_id}: row {i} {row:?} is not a probability vector"
                )));
            }
        }
        Ok(PredictionMatrix { patch_id, rows })
    }

    pub fn rows(&self) -> &[[f64; NUM_CLASSES]] {
        &self.rows
    }

    pub fn n_networks(&self) -> usize {
        self.rows.len()
    }

    /// All bootstrap values for one class.
    pub fn column(&self, class: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[class]).collect()
    }

    pub fn column_means(&self) -> [f64; NUM_CLASSES] {
        let mut m = [0.0; NUM_CLASSES];
        for row in &self.rows {
            for (acc, v) in m.iter_mut().zip(row) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.rows.len() as f64);
        m
    }
}

/// Class-stratified subsample without replacement: `round(fraction·n_c)`
/// patches from each class (halves round up), returned in shuffled order.
pub fn subsample(train: &[LabeledPatch], fraction: f64, seed: u64) -> Result<Vec<LabeledPatch>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Parameter(format!(
            "subsample fraction {fraction} not in (0,1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::new();
    for (class, mut idx) in indices_by_class(train).into_iter().enumerate() {
        let k = (fraction * idx.len() as f64 + 0.5).floor() as usize;
        if k == 0 {
            return Err(Error::Data(format!(
                "class {class} has {} patches; a {fraction} subsample would be empty",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        picked.extend_from_slice(&idx[..k]);
    }
    picked.shuffle(&mut rng);
    Ok(picked.into_iter().map(|i| train[i].clone()).collect())
}

fn train_member(
    train_set: &[LabeledPatch],
    arch: &Architecture,
    cfg: &BootstrapConfig,
    i: usize,
) -> Result<CnnModel> {
    let seed = cfg.member_seed(i);
    let data = subsample(train_set, cfg.subsample_fraction, seed)?;
    let mut model = build_model(arch.clone(), seed)?;
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train_cfg
    };
    train(&mut model, &data, &[], &train_cfg)?;
    Ok(model)
}

/// Trains `n_networks` members on `n_workers` threads. Each member's numerics
/// depend only on its index, so the result is independent of the worker count.
pub fn train_ensemble(
    train_set: &[LabeledPatch],
    arch: &Architecture,
    cfg: &BootstrapConfig,
) -> Result<Vec<CnnModel>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.n_workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..cfg.n_networks)
            .into_par_iter()
            .map(|i| {
                train_member(train_set, arch, cfg, i).context(format!("bootstrap network {i}"))
            })
            .collect()
    })
}

/// Scores every pool patch with every ensemble member, in pool order.
pub fn predict_pool(ensemble: &[CnnModel], pool: &UnlabeledPool) -> Result<Vec<PredictionMatrix>> {
    if ensemble.is_empty() {
        return Err(Error::Data("empty ensemble".into()));
    }
    pool.patches()
        .par_iter()
        .map(|patch| {
            let rows = ensemble
                .iter()
                .map(|m| {
                    let p = forward_proba(m, &patch.pixels)?;
                    let mut row = [0.0; NUM_CLASSES];
                    row.copy_from_slice(p.data());
                    Ok(row)
                })
                .collect::<Result<Vec<_>>>()
                .context(format!("patch {}", patch.patch_id))?;
            PredictionMatrix::new(patch.patch_id, rows)
        })
        .collect()
}

pub const PREDICTION_CSV_HEADER: &str = "patch_id,network_index,p_class0,p_class1,p_class2";

/// One line per (patch, network); probabilities carry 17 significant digits.
pub fn prediction_csv(matrices: &[PredictionMatrix]) -> String {
    let mut out = String::from(PREDICTION_CSV_HEADER);
    out.push('\n');
    for m in matrices {
        for (i, row) in m.rows.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e}",
                m.patch_id, i, row[0], row[1], row[2]
            );
        }
    }
    out
}

pub fn parse_prediction_csv(text: &str) -> Result<Vec<PredictionMatrix>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == PREDICTION_CSV_HEADER => {}
        _ => {
            return Err(Error::Data(
                "prediction CSV: missing or wrong header".into(),
            ))
        }
    }
    let mut out: Vec<PredictionMatrix> = Vec::new();
    let mut current: Option<(u64, Vec<[f64; NUM_CLASSES]>)> = None;
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| Error::Data(format!("prediction CSV line {}: {m}", lineno + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad("expected 5 fields"));
        }
        let id: u64 = f[0].parse().map_err(|_| bad("bad patch_id"))?;
        let net: usize = f[1].parse().map_err(|_| bad("bad network_index"))?;
        let mut row = [0.0; NUM_CLASSES];
        for (c, v) in row.iter_mut().enumerate() {
            *v = f[2 + c].parse().map_err(|_| bad("bad probability"))?;
        }
        match current.as_mut() {
            Some((cid, rows)) if *cid == id => {
                if net != rows.len() {
                    return Err(bad("network rows out of order"));
                }
                rows.push(row);
            }
            _ => {
                if let Some((cid, rows)) = current.take() {
                    out.push(PredictionMatrix::new(cid, rows)?);
                }
                if net != 0 {
                    return Err(bad("first row of a patch must be network 0"));
                }
                current = Some((id, vec![row]));
            }
        }
    }
    if let Some((cid, rows)) = current {
        out.push(PredictionMatrix::new(cid, rows)?);
    }
    if let Some(b) = out.first().map(PredictionMatrix::n_networks) {
        if out.iter().any(|m| m.n_networks() != b) {
            return Err(Error::Data(
                "prediction CSV: patches have different network counts".into(),
            ));
        }
    }
    Ok(out)
}
