use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{DataSource, PipelineConfig, Stage};
use super::eval::{
    confusion_matrix, metrics_from_confusion, pool_accuracy, selection_precision, summary_csv,
    EvalReport,
};
use crate::bootstrap::{
    predict_pool, prediction_csv, train_ensemble, BootstrapConfig, PredictionMatrix,
};
use crate::dataset::{
    generate_synthetic, load_labeled, load_unlabeled, save_labeled, save_unlabeled, split,
    HiddenLabels, LabeledPatch, Origin, SplitSpec, SyntheticSpec, UnlabeledPool,
};
use crate::error::{Error, Result, ResultExt};
use crate::network::{
    build_model, encode_checkpoint, save_checkpoint, train, CnnModel, TrainConfig,
};
use crate::selection::{select_with_strategy, SelectionReport};
use crate::NUM_CLASSES;

/// Everything a run needs: the manual train/verify split, the unlabeled pool
/// and the benchmark set.
#[derive(Debug, Clone)]
pub struct PipelineData {
    pub train: Vec<LabeledPatch>,
    pub verify: Vec<LabeledPatch>,
    pub pool: UnlabeledPool,
    pub pool_truth: Option<HiddenLabels>,
    pub benchmark: Vec<LabeledPatch>,
}

/// Train set and remaining pool going into `round`.
#[derive(Debug, Clone)]
pub struct RoundState {
    pub round: usize,
    pub train: Vec<LabeledPatch>,
    pub pool: UnlabeledPool,
}

#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub model: CnnModel,
    pub report: EvalReport,
    pub selection: SelectionReport,
    pub next: RoundState,
}

pub fn model_path(dir: &Path, round: usize) -> PathBuf {
    dir.join(format!("round{round}_model.spck"))
}

pub fn report_path(dir: &Path, round: usize) -> PathBuf {
    dir.join(format!("round{round}_report.txt"))
}

pub fn predictions_path(dir: &Path, round: usize) -> PathBuf {
    dir.join(format!("round{round}_predictions.csv"))
}

pub fn selection_path(dir: &Path, round: usize) -> PathBuf {
    dir.join(format!("round{round}_selection.csv"))
}

pub fn summary_path(dir: &Path) -> PathBuf {
    dir.join("summary.csv")
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| Error::Io(e).context(format!("writing {}", path.display())))
}

fn synthetic_spec(cfg: &PipelineConfig, spec: &SyntheticSpec) -> SyntheticSpec {
    SyntheticSpec {
        seed: cfg.stage_seed(Stage::Data, 0),
        ..spec.clone()
    }
}

pub const TRUTH_CSV_HEADER: &str = "patch_id,label";

pub fn truth_csv(truth: &HiddenLabels) -> String {
    let mut rows: Vec<(u64, usize)> = truth.iter().collect();
    rows.sort_unstable();
    let mut s = String::from(TRUTH_CSV_HEADER);
    s.push('\n');
    for (id, label) in rows {
        let _ = writeln!(s, "{id},{label}");
    }
    s
}

pub fn parse_truth_csv(text: &str) -> Result<HiddenLabels> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(TRUTH_CSV_HEADER) {
        return Err(Error::Data("truth CSV: missing or wrong header".into()));
    }
    let mut map = HashMap::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Error::Data(format!("truth CSV line {}: malformed row '{line}'", i + 2));
        let (id, label) = line.split_once(',').ok_or_else(bad)?;
        let id: u64 = id.trim().parse().map_err(|_| bad())?;
        let label: usize = label.trim().parse().map_err(|_| bad())?;
        if label >= NUM_CLASSES || map.insert(id, label).is_some() {
            return Err(bad());
        }
    }
    Ok(HiddenLabels::new(map))
}

/// Writes the synthetic dataset described by `cfg` as patch files into `dir`.
pub fn write_synthetic(cfg: &PipelineConfig, dir: &Path) -> Result<()> {
    let DataSource::Synthetic(spec) = &cfg.data else {
        return Err(Error::Config(
            "gen-data needs data.source = synthetic".into(),
        ));
    };
    let d = generate_synthetic(&synthetic_spec(cfg, spec))?;
    std::fs::create_dir_all(dir)?;
    save_labeled(&dir.join("labeled.spcn"), &d.labeled)?;
    save_unlabeled(&dir.join("pool.spcn"), &d.pool)?;
    save_labeled(&dir.join("benchmark.spcn"), &d.benchmark)?;
    write(&dir.join("pool_truth.csv"), truth_csv(&d.pool_truth))
}

pub fn load_data(cfg: &PipelineConfig) -> Result<PipelineData> {
    let (labeled, pool, pool_truth, benchmark) = match &cfg.data {
        DataSource::Synthetic(spec) => {
            let d = generate_synthetic(&synthetic_spec(cfg, spec))?;
            (d.labeled, d.pool, Some(d.pool_truth), d.benchmark)
        }
        DataSource::Files {
            labeled,
            pool,
            benchmark,
            pool_truth,
        } => {
            let truth = match pool_truth {
                Some(p) => Some(parse_truth_csv(&std::fs::read_to_string(p)?)?),
                None => None,
            };
            (
                load_labeled(labeled)?,
                load_unlabeled(pool)?,
                truth,
                load_labeled(benchmark)?,
            )
        }
    };
    let spec = SplitSpec {
        seed: cfg.stage_seed(Stage::Split, 0),
        ..cfg.split
    };
    let (train, verify) = split(&labeled, &spec)?;
    Ok(PipelineData {
        train,
        verify,
        pool,
        pool_truth,
        benchmark,
    })
}

pub fn initial_state(data: &PipelineData) -> RoundState {
    RoundState {
        round: 1,
        train: data.train.clone(),
        pool: data.pool.clone(),
    }
}

fn evaluate(
    model: &CnnModel,
    data: &PipelineData,
    pool: &UnlabeledPool,
    round: usize,
    train_set: &[LabeledPatch],
) -> Result<EvalReport> {
    let confusion = confusion_matrix(model, &data.benchmark)?;
    let (accuracy, precision, recall) = metrics_from_confusion(&confusion);
    let pool_accuracy = match &data.pool_truth {
        Some(t) if !pool.is_empty() => Some(pool_accuracy(model, pool, t)?),
        _ => None,
    };
    Ok(EvalReport {
        round,
        alpha: None,
        confusion,
        accuracy,
        precision,
        recall,
        n_virtual_used: train_set
            .iter()
            .filter(|p| p.origin != Origin::Manual)
            .count(),
        n_virtual_selected: 0,
        n_train_total: train_set.len(),
        verify_accuracy: None,
        pool_accuracy,
        selection_precision: None,
    })
}

fn fit(
    cfg: &PipelineConfig,
    train_cfg: &TrainConfig,
    seed: u64,
    train_set: &[LabeledPatch],
    verify: &[LabeledPatch],
) -> Result<(CnnModel, Option<f64>)> {
    let mut model = build_model(cfg.arch.clone(), seed)?;
    let report = train(
        &mut model,
        train_set,
        verify,
        &TrainConfig { seed, ..*train_cfg },
    )?;
    Ok((model, report.verify_accuracy))
}

/// Trains the raw CNN on the manual samples, evaluates it and writes its
/// checkpoint and report (round 0).
pub fn run_baseline(cfg: &PipelineConfig, data: &PipelineData) -> Result<(CnnModel, EvalReport)> {
    let inner = || {
        let seed = cfg.stage_seed(Stage::Baseline, 0);
        let (model, verify_accuracy) =
            fit(cfg, &cfg.baseline_train, seed, &data.train, &data.verify)?;
        let mut report = evaluate(&model, data, &data.pool, 0, &data.train)?;
        report.verify_accuracy = verify_accuracy;
        std::fs::create_dir_all(&cfg.out_dir)?;
        save_checkpoint(&model, &model_path(&cfg.out_dir, 0))?;
        write(&report_path(&cfg.out_dir, 0), report.to_text())?;
        Ok((model, report))
    };
    inner().context("baseline")
}

pub fn bootstrap_config(cfg: &PipelineConfig, round: usize) -> BootstrapConfig {
    BootstrapConfig {
        base_seed: cfg.stage_seed(Stage::Bootstrap, round),
        ..cfg.bootstrap.clone()
    }
}

/// Trains the round's ensemble and scores the pool; writes the prediction CSV.
pub fn bootstrap_stage(cfg: &PipelineConfig, state: &RoundState) -> Result<Vec<PredictionMatrix>> {
    if state.pool.is_empty() {
        return Err(Error::Data("unlabeled pool is empty".into()));
    }
    let ensemble = train_ensemble(&state.train, &cfg.arch, &bootstrap_config(cfg, state.round))?;
    let matrices = predict_pool(&ensemble, &state.pool)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    write(
        &predictions_path(&cfg.out_dir, state.round),
        prediction_csv(&matrices),
    )?;
    Ok(matrices)
}

/// Runs selection at the round's alpha and writes the selection CSV.
pub fn select_stage(
    cfg: &PipelineConfig,
    state: &RoundState,
    matrices: &[PredictionMatrix],
    alpha: f64,
) -> Result<SelectionReport> {
    let report = select_with_strategy(matrices, &state.pool, alpha, cfg.strategy)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    write(&selection_path(&cfg.out_dir, state.round), report.to_csv())?;
    Ok(report)
}

/// Moves selected patches from the pool into the train set as virtual samples.
pub fn apply_selection(state: &RoundState, selection: &SelectionReport) -> RoundState {
    let ids: HashSet<u64> = selection
        .virtual_samples
        .iter()
        .filter_map(virtual_id)
        .collect();
    let mut train = state.train.clone();
    train.extend(selection.virtual_samples.iter().cloned());
    RoundState {
        round: state.round + 1,
        train,
        pool: state.pool.without(&ids),
    }
}

fn virtual_id(p: &LabeledPatch) -> Option<u64> {
    match p.origin {
        Origin::Virtual { patch_id } => Some(patch_id),
        Origin::Manual => None,
    }
}

/// Trains a fresh network on the mixed train set of `next` and evaluates it.
pub fn retrain_stage(
    cfg: &PipelineConfig,
    data: &PipelineData,
    round: usize,
    next: &RoundState,
) -> Result<(CnnModel, EvalReport)> {
    let seed = cfg.stage_seed(Stage::Retrain, round);
    let (model, verify_accuracy) = fit(cfg, &cfg.retrain, seed, &next.train, &data.verify)?;
    let mut report = evaluate(&model, data, &next.pool, round, &next.train)?;
    report.verify_accuracy = verify_accuracy;
    std::fs::create_dir_all(&cfg.out_dir)?;
    save_checkpoint(&model, &model_path(&cfg.out_dir, round))?;
    Ok((model, report))
}

/// One bootstrap → select → retrain → evaluate cycle.
pub fn run_round(
    cfg: &PipelineConfig,
    data: &PipelineData,
    state: &RoundState,
) -> Result<RoundOutcome> {
    let r = state.round;
    let alpha = cfg.alpha_for(r);
    let matrices = bootstrap_stage(cfg, state).context(format!("round {r}: bootstrap"))?;
    let selection =
        select_stage(cfg, state, &matrices, alpha).context(format!("round {r}: selection"))?;
    let next = apply_selection(state, &selection);
    let (model, mut report) =
        retrain_stage(cfg, data, r, &next).context(format!("round {r}: retrain"))?;
    report.alpha = Some(alpha);
    report.n_virtual_selected = selection.n_selected;
    if let Some(t) = &data.pool_truth {
        report.selection_precision = selection_precision(&selection, t)?;
    }
    write(&report_path(&cfg.out_dir, r), report.to_text()).context(format!("round {r}: report"))?;
    Ok(RoundOutcome {
        model,
        report,
        selection,
        next,
    })
}

/// Baseline followed by `cfg.rounds` rounds. All artifacts land in
/// `cfg.out_dir`; the summary CSV is rewritten after every stage so a failed
/// run keeps what it finished.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Vec<EvalReport>> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    write(&cfg.out_dir.join("config.txt"), cfg.to_text())?;
    let data = load_data(cfg).context("loading data")?;
    let (_, baseline) = run_baseline(cfg, &data)?;
    let mut reports = vec![baseline];
    write(&summary_path(&cfg.out_dir), summary_csv(&reports))?;
    let mut state = initial_state(&data);
    for _ in 0..cfg.rounds {
        let out = run_round(cfg, &data, &state)?;
        reports.push(out.report);
        write(&summary_path(&cfg.out_dir), summary_csv(&reports))?;
        state = out.next;
    }
    Ok(reports)
}

/// Parses the selected `(patch_id, label)` pairs from a selection CSV.
pub fn parse_selected(text: &str) -> Result<Vec<(u64, usize)>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(crate::selection::SELECTION_CSV_HEADER) {
        return Err(Error::Data("selection CSV: missing or wrong header".into()));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Error::Data(format!("selection CSV line {}: malformed row", i + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(bad());
        }
        if f[9] == "true" {
            let id = f[0].parse().map_err(|_| bad())?;
            let label: usize = f[1].parse().map_err(|_| bad())?;
            if label >= NUM_CLASSES {
                return Err(bad());
            }
            out.push((id, label));
        }
    }
    Ok(out)
}

/// Rebuilds the state entering `round` from the selection CSVs of earlier
/// rounds in `cfg.out_dir`.
pub fn state_for_round(
    cfg: &PipelineConfig,
    data: &PipelineData,
    round: usize,
) -> Result<RoundState> {
    if round == 0 {
        return Err(Error::Config("rounds are numbered from 1".into()));
    }
    let mut state = initial_state(data);
    for r in 1..round {
        let path = selection_path(&cfg.out_dir, r);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Io(e).context(format!("reading {}", path.display())))?;
        let mut ids = HashSet::new();
        for (id, label) in parse_selected(&text)? {
            let patch = state.pool.get(id).ok_or_else(|| {
                Error::Data(format!("{}: patch {id} is not in the pool", path.display()))
            })?;
            state.train.push(LabeledPatch::new(
                patch.pixels.clone(),
                label,
                Origin::Virtual { patch_id: id },
            )?);
            ids.insert(id);
        }
        state.pool = state.pool.without(&ids);
        state.round = r + 1;
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub workers: usize,
    pub seconds: f64,
}

/// Trains the round-1 ensemble once per worker count and times it. Fails with
/// a numeric error if any member differs from the first run.
pub fn benchmark_parallel(
    cfg: &PipelineConfig,
    train_set: &[LabeledPatch],
    workers: &[usize],
) -> Result<Vec<BenchRow>> {
    if workers.is_empty() {
        return Err(Error::Config("no worker counts given".into()));
    }
    let mut reference: Option<Vec<Vec<u8>>> = None;
    let mut rows = Vec::new();
    for &w in workers {
        let bcfg = BootstrapConfig {
            n_workers: w,
            ..bootstrap_config(cfg, 1)
        };
        let start = Instant::now();
        let ensemble = train_ensemble(train_set, &cfg.arch, &bcfg)?;
        let seconds = start.elapsed().as_secs_f64();
        let bytes: Vec<Vec<u8>> = ensemble.iter().map(encode_checkpoint).collect();
        match &reference {
            None => reference = Some(bytes),
            Some(r) if *r != bytes => {
                return Err(Error::Numeric(format!(
                    "ensemble trained with {w} workers differs from the {}-worker run",
                    workers[0]
                )))
            }
            Some(_) => {}
        }
        rows.push(BenchRow {
            workers: w,
            seconds,
        });
    }
    Ok(rows)
}

pub fn bench_table(rows: &[BenchRow]) -> String {
    let mut s = String::from("workers,seconds,speedup\n");
    let base = rows.first().map_or(1.0, |r| r.seconds);
    for r in rows {
        let _ = writeln!(s, "{},{:.3},{:.3}", r.workers, r.seconds, base / r.seconds);
    }
    s
}
