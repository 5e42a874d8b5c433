//! Flat `key = value` configuration with dotted section prefixes.
//!
//! ```text
//! seed = 7
//! rounds = 2
//! arch.variant = half
//! train.epochs = 15
//! bootstrap.n_networks = 10
//! selection.alpha = 0.1
//! ```
//!
//! `train.*` sets the hyperparameters for every training stage;
//! `bootstrap.*` and `retrain.*` accept the same keys as overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bootstrap::BootstrapConfig;
use crate::dataset::{SplitSpec, SyntheticSpec};
use crate::error::{Error, Result};
use crate::network::{Architecture, TrainConfig, Variant};
use crate::selection::FamilyStrategy;
use crate::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    /// Patch files as written by `gen-data`. `pool_truth` is optional and only
    /// used for reporting selection precision.
    Files {
        labeled: PathBuf,
        pool: PathBuf,
        benchmark: PathBuf,
        pool_truth: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub data: DataSource,
    pub split: SplitSpec,
    pub arch: Architecture,
    pub baseline_train: TrainConfig,
    pub retrain: TrainConfig,
    pub bootstrap: BootstrapConfig,
    pub alpha: f64,
    /// Per-round alpha; rounds past its end reuse `alpha`.
    pub alpha_schedule: Vec<f64>,
    pub strategy: FamilyStrategy,
    pub rounds: usize,
    pub out_dir: PathBuf,
    /// Every stage seed is derived from this one.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data: DataSource::Synthetic(SyntheticSpec::default()),
            split: SplitSpec::default(),
            arch: Architecture::baseline(),
            baseline_train: TrainConfig::default(),
            retrain: TrainConfig::default(),
            bootstrap: BootstrapConfig::default(),
            alpha: 0.1,
            alpha_schedule: Vec::new(),
            strategy: FamilyStrategy::Separate,
            rounds: 1,
            out_dir: PathBuf::from("spcnn_out"),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Stage {
    Data = 1,
    Split = 2,
    Baseline = 3,
    Bootstrap = 4,
    Retrain = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be >= 1".into()));
        }
        for &a in std::iter::once(&self.alpha).chain(&self.alpha_schedule) {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Config(format!("alpha must be in (0,1), got {a}")));
            }
        }
        if self.split.train_per_class == 0 {
            return Err(Error::Config("split.train_per_class must be >= 1".into()));
        }
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate()?;
            if spec.labeled_per_class < self.split.train_per_class + self.split.verify_per_class {
                return Err(Error::Config(format!(
                    "synthetic.labeled_per_class = {} is smaller than train + verify per class",
                    spec.labeled_per_class
                )));
            }
        }
        self.arch.validate()?;
        self.baseline_train.validate()?;
        self.retrain.validate()?;
        self.bootstrap.validate()
    }

    pub fn alpha_for(&self, round: usize) -> f64 {
        round
            .checked_sub(1)
            .and_then(|i| self.alpha_schedule.get(i))
            .copied()
            .unwrap_or(self.alpha)
    }

    pub(crate) fn stage_seed(&self, stage: Stage, round: usize) -> u64 {
        splitmix64(splitmix64(self.seed ^ ((stage as u64) << 56)) ^ round as u64)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if entries.insert(k.clone(), (lineno + 1, v)).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key '{k}'",
                    lineno + 1
                )));
            }
        }
        let cfg = Self::from_entries(&entries)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_entries(entries: &BTreeMap<String, (usize, String)>) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        let mut synth = SyntheticSpec::default();
        let mut files: [Option<PathBuf>; 4] = Default::default();
        let mut source = "synthetic".to_string();
        let mut conv: Option<Vec<usize>> = None;
        let mut fc: Option<Vec<usize>> = None;
        let mut variant = Variant::Baseline;
        let (mut dropout, mut slope) = (None, None);

        // Shared training keys first so section overrides win.
        let ordered = entries
            .iter()
            .filter(|(k, _)| k.starts_with("train."))
            .chain(entries.iter().filter(|(k, _)| !k.starts_with("train.")));
        for (key, (line, value)) in ordered {
            let err = |m: String| Error::Config(format!("line {line}: {key}: {m}"));
            let num = |v: &str| -> Result<f64> { v.parse::<f64>().map_err(|e| err(e.to_string())) };
            let int =
                |v: &str| -> Result<usize> { v.parse::<usize>().map_err(|e| err(e.to_string())) };
            let list =
                |v: &str| -> Result<Vec<usize>> { v.split(',').map(|x| int(x.trim())).collect() };
            let (section, field) = key.split_once('.').unwrap_or(("", key.as_str()));
            match (section, field) {
                ("", "seed") => {
                    cfg.seed = value
                        .parse()
                        .map_err(|e: std::num::ParseIntError| err(e.to_string()))?
                }
                ("", "rounds") => cfg.rounds = int(value)?,
                ("", "out") => cfg.out_dir = PathBuf::from(value),
                ("data", "source") => source = value.clone(),
                ("data", "labeled") => files[0] = Some(value.into()),
                ("data", "pool") => files[1] = Some(value.into()),
                ("data", "benchmark") => files[2] = Some(value.into()),
                ("data", "pool_truth") => files[3] = Some(value.into()),
                ("synthetic", "labeled_per_class") => synth.labeled_per_class = int(value)?,
                ("synthetic", "pool_size") => synth.pool_size = int(value)?,
                ("synthetic", "benchmark_per_class") => synth.benchmark_per_class = int(value)?,
                ("synthetic", "noise_sigma") => synth.noise_sigma = num(value)?,
                ("synthetic", "boundary_fraction") => synth.boundary_fraction = num(value)?,
                ("synthetic", "pool_class_weights") => {
                    let w = value
                        .split(',')
                        .map(|x| num(x.trim()))
                        .collect::<Result<Vec<_>>>()?;
                    synth.pool_class_weights = w
                        .try_into()
                        .map_err(|_| err(format!("expected {NUM_CLASSES} weights")))?;
                }
                ("split", "train_per_class") => cfg.split.train_per_class = int(value)?,
                ("split", "verify_per_class") => cfg.split.verify_per_class = int(value)?,
                ("arch", "variant") => variant = value.parse()?,
                ("arch", "conv") => conv = Some(list(value)?),
                ("arch", "fc") => fc = Some(list(value)?),
                ("arch", "dropout") => dropout = Some(num(value)?),
                ("arch", "leaky_slope") => slope = Some(num(value)?),
                ("bootstrap", "n_networks") => cfg.bootstrap.n_networks = int(value)?,
                ("bootstrap", "subsample_fraction") => {
                    cfg.bootstrap.subsample_fraction = num(value)?
                }
                ("bootstrap", "n_workers") => cfg.bootstrap.n_workers = int(value)?,
                ("selection", "alpha") => cfg.alpha = num(value)?,
                ("selection", "alpha_schedule") => {
                    cfg.alpha_schedule = value
                        .split(',')
                        .map(|x| num(x.trim()))
                        .collect::<Result<_>>()?
                }
                ("selection", "strategy") => cfg.strategy = FamilyStrategy::from_str(value)?,
                ("train", f) => {
                    for t in [
                        &mut cfg.baseline_train,
                        &mut cfg.retrain,
                        &mut cfg.bootstrap.train_cfg,
                    ] {
                        set_train_field(t, f, value).map_err(&err)?;
                    }
                }
                ("retrain", f) => set_train_field(&mut cfg.retrain, f, value).map_err(&err)?,
                ("bootstrap", f) => {
                    set_train_field(&mut cfg.bootstrap.train_cfg, f, value).map_err(&err)?
                }
                _ => return Err(Error::Config(format!("line {line}: unknown key '{key}'"))),
            }
        }

        cfg.data = match source.as_str() {
            "synthetic" => DataSource::Synthetic(synth),
            "files" => {
                let need = |i: usize, name: &str| {
                    files[i].clone().ok_or_else(|| {
                        Error::Config(format!("data.source = files requires data.{name}"))
                    })
                };
                DataSource::Files {
                    labeled: need(0, "labeled")?,
                    pool: need(1, "pool")?,
                    benchmark: need(2, "benchmark")?,
                    pool_truth: files[3].clone(),
                }
            }
            other => return Err(Error::Config(format!("unknown data.source '{other}'"))),
        };

        cfg.arch = match (variant, conv, fc) {
            (Variant::Custom, Some(c), Some(f)) => Architecture::custom(c, f),
            (Variant::Custom, _, _) => {
                return Err(Error::Config(
                    "arch.variant = custom requires arch.conv and arch.fc".into(),
                ))
            }
            (v, None, None) => Architecture::variant(v),
            _ => {
                return Err(Error::Config(
                    "arch.conv / arch.fc are only allowed with arch.variant = custom".into(),
                ))
            }
        };
        if let Some(d) = dropout {
            cfg.arch.dropout_rate = d;
        }
        if let Some(s) = slope {
            cfg.arch.leaky_slope = s;
        }
        Ok(cfg)
    }

    /// Renders the config in the same format `from_text` reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        kv("seed", self.seed.to_string());
        kv("rounds", self.rounds.to_string());
        kv("out", self.out_dir.display().to_string());
        match &self.data {
            DataSource::Synthetic(sp) => {
                kv("data.source", "synthetic".into());
                kv(
                    "synthetic.labeled_per_class",
                    sp.labeled_per_class.to_string(),
                );
                kv("synthetic.pool_size", sp.pool_size.to_string());
                kv(
                    "synthetic.benchmark_per_class",
                    sp.benchmark_per_class.to_string(),
                );
                kv("synthetic.noise_sigma", format!("{:?}", sp.noise_sigma));
                kv(
                    "synthetic.boundary_fraction",
                    format!("{:?}", sp.boundary_fraction),
                );
                let w: Vec<String> = sp
                    .pool_class_weights
                    .iter()
                    .map(|w| format!("{w:?}"))
                    .collect();
                kv("synthetic.pool_class_weights", w.join(","));
            }
            DataSource::Files {
                labeled,
                pool,
                benchmark,
                pool_truth,
            } => {
                kv("data.source", "files".into());
                kv("data.labeled", labeled.display().to_string());
                kv("data.pool", pool.display().to_string());
                kv("data.benchmark", benchmark.display().to_string());
                if let Some(t) = pool_truth {
                    kv("data.pool_truth", t.display().to_string());
                }
            }
        }
        kv(
            "split.train_per_class",
            self.split.train_per_class.to_string(),
        );
        kv(
            "split.verify_per_class",
            self.split.verify_per_class.to_string(),
        );
        kv("arch.variant", self.arch.variant.to_string());
        if self.arch.variant == Variant::Custom {
            kv("arch.conv", join(&self.arch.conv_kernel_counts));
            kv("arch.fc", join(&self.arch.fc_sizes));
        }
        kv("arch.dropout", format!("{:?}", self.arch.dropout_rate));
        kv("arch.leaky_slope", format!("{:?}", self.arch.leaky_slope));
        for (prefix, t) in [
            ("train", &self.baseline_train),
            ("bootstrap", &self.bootstrap.train_cfg),
            ("retrain", &self.retrain),
        ] {
            kv(
                &format!("{prefix}.learning_rate"),
                format!("{:?}", t.learning_rate),
            );
            kv(&format!("{prefix}.momentum"), format!("{:?}", t.momentum));
            kv(&format!("{prefix}.batch_size"), t.batch_size.to_string());
            kv(&format!("{prefix}.epochs"), t.epochs.to_string());
        }
        kv(
            "bootstrap.n_networks",
            self.bootstrap.n_networks.to_string(),
        );
        kv(
            "bootstrap.subsample_fraction",
            format!("{:?}", self.bootstrap.subsample_fraction),
        );
        kv("bootstrap.n_workers", self.bootstrap.n_workers.to_string());
        kv("selection.alpha", format!("{:?}", self.alpha));
        if !self.alpha_schedule.is_empty() {
            let a: Vec<String> = self
                .alpha_schedule
                .iter()
                .map(|a| format!("{a:?}"))
                .collect();
            kv("selection.alpha_schedule", a.join(","));
        }
        kv(
            "selection.strategy",
            match self.strategy {
                FamilyStrategy::Separate => "separate",
                FamilyStrategy::Pooled => "pooled",
                FamilyStrategy::MaxP => "max_p",
            }
            .into(),
        );
        s
    }
}

fn set_train_field(
    t: &mut TrainConfig,
    field: &str,
    value: &str,
) -> std::result::Result<(), String> {
    match field {
        "learning_rate" => t.learning_rate = value.parse().map_err(|e| format!("{e}"))?,
        "momentum" => t.momentum = value.parse().map_err(|e| format!("{e}"))?,
        "batch_size" => t.batch_size = value.parse().map_err(|e| format!("{e}"))?,
        "epochs" => t.epochs = value.parse().map_err(|e| format!("{e}"))?,
        _ => return Err("unknown key".into()),
    }
    Ok(())
}
