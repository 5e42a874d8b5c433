//! Acceptance suite. Runs every criterion in sequence and prints one
//! PASS / FAIL / SKIP line per criterion; exits non-zero if any failed.
//!
//! Pass a substring as the first argument to run only matching criteria,
//! e.g. `cargo test --test acceptance -- desk`.

mod common;

use std::cell::RefCell;
use std::collections::HashSet;
use std::panic::AssertUnwindSafe;
use std::path::Path;
use std::time::Instant;

use common::{bh_oracle, quadrature_t_cdf, random_matrix, statrs_t_cdf, welch_oracle};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spcnn::bootstrap::subsample;
use spcnn::dataset::{generate_synthetic, SyntheticSpec, UnlabeledPatch, UnlabeledPool};
use spcnn::network::{
    build_model, forward_proba, train, Architecture, CnnModel, TrainConfig, Variant,
};
use spcnn::numerics::gradcheck::{central_difference, rel_err};
use spcnn::numerics::{
    conv2d_backward, conv2d_forward, dropout, dropout_backward, global_maxpool, leaky_relu,
    leaky_relu_backward, linear, linear_backward, maxpool2x2, pool_backward, softmax_cross_entropy,
    Padding, Tensor,
};
use spcnn::pipeline::{benchmark_parallel, load_data, run_pipeline};
use spcnn::selection::{
    bh_fdr, select_with_strategy, student_t_cdf, welch_t_one_sided, FamilyStrategy,
};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Largest relative error between `analytic` and central differences of `f` at `x`.
fn max_err(x: &Tensor, analytic: &Tensor, f: impl Fn(&Tensor) -> f64) -> f64 {
    (0..x.len())
        .map(|i| rel_err(analytic.data()[i], central_difference(x, i, &f)))
        .fold(0.0, f64::max)
}

/// Distinct values at least 0.01 apart, so max-pool winners never change
/// under a finite-difference step.
fn spaced_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let mut v: Vec<f64> = (0..n).map(|i| i as f64 * 0.01 - 0.3).collect();
    v.shuffle(rng);
    Tensor::new(shape.to_vec(), v).unwrap()
}

fn gradient_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut per_op: Vec<(&str, f64)> = Vec::new();

    for (name, padding) in [("conv same", Padding::Same), ("conv valid", Padding::Valid)] {
        let x = random_tensor(&[2, 6, 5], &mut rng);
        let k = random_tensor(&[3, 2, 3, 3], &mut rng);
        let b = random_tensor(&[3], &mut rng);
        let out_shape = conv2d_forward(&x, &k, &b, padding)
            .unwrap()
            .shape()
            .to_vec();
        let r = random_tensor(&out_shape, &mut rng);
        let g = conv2d_backward(&x, &k, &r, padding).unwrap();
        let ex = max_err(&x, &g.input, |x| {
            dot(&r, &conv2d_forward(x, &k, &b, padding).unwrap())
        });
        let ek = max_err(&k, &g.kernels, |k| {
            dot(&r, &conv2d_forward(&x, k, &b, padding).unwrap())
        });
        let eb = max_err(&b, &g.bias, |b| {
            dot(&r, &conv2d_forward(&x, &k, b, padding).unwrap())
        });
        per_op.push((name, ex.max(ek).max(eb)));
    }

    for shape in [[2, 6, 6], [1, 5, 7]] {
        let x = spaced_tensor(&shape, &mut rng);
        let p = maxpool2x2(&x).unwrap();
        let r = random_tensor(p.output.shape(), &mut rng);
        let g = pool_backward(&p, &r).unwrap();
        per_op.push((
            "maxpool2x2",
            max_err(&x, &g, |x| dot(&r, &maxpool2x2(x).unwrap().output)),
        ));
    }
    {
        let x = spaced_tensor(&[3, 4, 4], &mut rng);
        let p = global_maxpool(&x).unwrap();
        let r = random_tensor(&[3], &mut rng);
        let g = pool_backward(&p, &r).unwrap();
        per_op.push((
            "global maxpool",
            max_err(&x, &g, |x| dot(&r, &global_maxpool(x).unwrap().output)),
        ));
    }
    {
        let x = random_tensor(&[7], &mut rng);
        let w = random_tensor(&[5, 7], &mut rng);
        let b = random_tensor(&[5], &mut rng);
        let r = random_tensor(&[5], &mut rng);
        let g = linear_backward(&x, &w, &r).unwrap();
        let e = max_err(&x, &g.input, |x| dot(&r, &linear(x, &w, &b).unwrap()))
            .max(max_err(&w, &g.weight, |w| {
                dot(&r, &linear(&x, w, &b).unwrap())
            }))
            .max(max_err(&b, &g.bias, |b| {
                dot(&r, &linear(&x, &w, b).unwrap())
            }));
        per_op.push(("linear", e));
    }
    for slope in [0.01, 0.2] {
        let mut x = random_tensor(&[40], &mut rng);
        x.data_mut()
            .iter_mut()
            .filter(|v| v.abs() < 0.05)
            .for_each(|v| *v += 0.1);
        let r = random_tensor(&[40], &mut rng);
        let g = leaky_relu_backward(&x, &r, slope).unwrap();
        per_op.push((
            "leaky relu",
            max_err(&x, &g, |x| dot(&r, &leaky_relu(x, slope))),
        ));
    }
    {
        let x = random_tensor(&[30], &mut rng);
        let r = random_tensor(&[30], &mut rng);
        let mask_rng = ChaCha8Rng::seed_from_u64(5);
        let (_, mask) = dropout(&x, 0.5, &mut mask_rng.clone(), true).unwrap();
        let g = dropout_backward(&r, &mask);
        let f = |x: &Tensor| dot(&r, &dropout(x, 0.5, &mut mask_rng.clone(), true).unwrap().0);
        per_op.push(("dropout", max_err(&x, &g, f)));
    }
    for n in [3, 6] {
        let z = random_tensor(&[n], &mut rng);
        for class in 0..n {
            let g = softmax_cross_entropy(&z, class).unwrap().grad_logits;
            per_op.push((
                "softmax xent",
                max_err(&z, &g, |z| softmax_cross_entropy(z, class).unwrap().loss),
            ));
        }
    }

    // End to end: every parameter of a tiny network with dropout active.
    let mut model = build_model(Architecture::custom(vec![2, 2, 2, 2], vec![12, 6, 3]), 5).unwrap();
    let mut brng = ChaCha8Rng::seed_from_u64(77);
    for p in model
        .params
        .iter_mut()
        .filter(|p| p.value.shape().len() == 1)
    {
        p.value
            .data_mut()
            .iter_mut()
            .for_each(|v| *v = brng.random_range(-0.3..0.3));
    }
    let x = Tensor::new(
        vec![1, 36, 36],
        (0..1296).map(|_| brng.random::<f64>()).collect(),
    )
    .unwrap();
    let drop_rng = ChaCha8Rng::seed_from_u64(99);
    let class = 2;
    let (z, trace) = model.forward(&x, Some(&mut drop_rng.clone())).unwrap();
    model
        .backward(
            &trace,
            &softmax_cross_entropy(&z, class).unwrap().grad_logits,
        )
        .unwrap();
    let loss = |m: &CnnModel| {
        let (z, _) = m.forward(&x, Some(&mut drop_rng.clone())).unwrap();
        softmax_cross_entropy(&z, class).unwrap().loss
    };
    let mut e2e: f64 = 0.0;
    let mut n_checked = 0;
    for k in 0..model.params.len() {
        for i in 0..model.params[k].value.len() {
            let analytic = model.params[k].grad.data()[i];
            let mut probe = model.clone();
            let numeric = central_difference(&model.params[k].value, i, |v| {
                probe.params[k].value = v.clone();
                loss(&probe)
            });
            e2e = e2e.max(rel_err(analytic, numeric));
            n_checked += 1;
        }
    }

    let worst = per_op
        .iter()
        .cloned()
        .fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
    verdict(
        worst.1 < 1e-6 && e2e < 1e-5,
        format!(
            "{} per-op checks, worst {:.2e} ({}) < 1e-6; end-to-end {} params, worst {:.2e} < 1e-5",
            per_op.len(),
            worst.1,
            worst.0,
            n_checked,
            e2e
        ),
    )
}

fn statistical_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut e_statrs, mut e_quad) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let t = rng.random_range(-10.0..10.0);
        let dof = 10f64.powf(rng.random_range(-0.3..2.5));
        let got = student_t_cdf(t, dof).unwrap();
        e_statrs = e_statrs.max((got - statrs_t_cdf(t, dof)).abs());
        e_quad = e_quad.max((got - quadrature_t_cdf(t, dof)).abs());
    }
    let at_ref = (student_t_cdf(2.10, 18.0).unwrap() - quadrature_t_cdf(2.10, 18.0)).abs();

    let mut e_welch = 0.0f64;
    for _ in 0..1000 {
        let na = rng.random_range(2..30);
        let nb = rng.random_range(2..30);
        let shift = rng.random_range(-0.4..0.4);
        let a: Vec<f64> = (0..na).map(|_| rng.random::<f64>() + shift).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.random::<f64>()).collect();
        let got = welch_t_one_sided(&a, &b).unwrap();
        let want = welch_oracle(&a, &b);
        e_welch = e_welch
            .max((got.p_value - want.p).abs())
            .max((got.t_stat - want.t).abs() / want.t.abs().max(1.0))
            .max((got.dof - want.dof).abs() / want.dof);
    }

    let mut bh_mismatch = 0;
    for _ in 0..1000 {
        let m = rng.random_range(1..120);
        let coarse = rng.random_bool(0.3);
        let p: Vec<f64> = (0..m)
            .map(|_| {
                let v = rng.random::<f64>().powi(rng.random_range(1..5));
                if coarse {
                    (v * 40.0).round() / 40.0
                } else {
                    v
                }
            })
            .collect();
        let alpha = [0.025, 0.05, 0.1][rng.random_range(0..3)];
        if bh_fdr(&p, alpha).unwrap() != bh_oracle(&p, alpha) {
            bh_mismatch += 1;
        }
    }
    verdict(
        e_statrs < 1e-9 && e_quad < 1e-9 && e_welch < 1e-9 && at_ref < 1e-9 && bh_mismatch == 0,
        format!(
            "t-CDF max |err| vs statrs {e_statrs:.1e}, vs quadrature {e_quad:.1e} (dof 18, t 2.10: {at_ref:.1e}); \
             Welch max err {e_welch:.1e}; BH mismatches {bh_mismatch}/1000"
        ),
    )
}

fn selection_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut violations = 0;
    let mut sizes = [0usize; 3];
    let template = Tensor::full(&[1, 36, 36], 0.5);
    for _ in 0..500 {
        let n = rng.random_range(5..150);
        let mats: Vec<_> = (0..n as u64)
            .map(|i| random_matrix(&mut rng, i, 10))
            .collect();
        let pool = UnlabeledPool::new(
            (0..n as u64)
                .map(|i| UnlabeledPatch::new(template.clone(), i).unwrap())
                .collect(),
        )
        .unwrap();
        for strategy in [
            FamilyStrategy::Separate,
            FamilyStrategy::Pooled,
            FamilyStrategy::MaxP,
        ] {
            let sets: Vec<HashSet<u64>> = [0.025, 0.05, 0.1]
                .iter()
                .map(|&a| {
                    select_with_strategy(&mats, &pool, a, strategy)
                        .unwrap()
                        .selected_ids()
                        .into_iter()
                        .collect()
                })
                .collect();
            if !sets[0].is_subset(&sets[1]) || !sets[1].is_subset(&sets[2]) {
                violations += 1;
            }
            if strategy == FamilyStrategy::Separate {
                for (s, set) in sizes.iter_mut().zip(&sets) {
                    *s += set.len();
                }
            }
        }
    }
    verdict(
        violations == 0,
        format!(
            "500 pools x 3 family strategies, {violations} violations; default strategy selected {} <= {} <= {} in total",
            sizes[0], sizes[1], sizes[2]
        ),
    )
}

fn counting_fidelity() -> Outcome {
    let d = generate_synthetic(&SyntheticSpec {
        labeled_per_class: 400,
        pool_size: 0,
        benchmark_per_class: 0,
        seed: 8,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let key = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let all: HashSet<Vec<u64>> = d.labeled.iter().map(|p| key(&p.pixels)).collect();
    let mut problems = Vec::new();
    for i in 0..10u64 {
        let s = subsample(&d.labeled, 0.9, 1000 + i).unwrap();
        let mut counts = [0usize; 3];
        s.iter().for_each(|p| counts[p.label] += 1);
        let distinct: HashSet<Vec<u64>> = s.iter().map(|p| key(&p.pixels)).collect();
        if counts != [360; 3]
            || s.len() != 1080
            || distinct.len() != 1080
            || !distinct.is_subset(&all)
        {
            problems.push(format!(
                "network {i}: {counts:?}, {} total, {} distinct",
                s.len(),
                distinct.len()
            ));
        }
    }
    verdict(
        problems.is_empty(),
        if problems.is_empty() {
            "10 subsamples of 400/class at 0.9: each 360/class, 1080 distinct patches".into()
        } else {
            problems.join("; ")
        },
    )
}

struct DeskRun {
    seed: u64,
    baseline: f64,
    retrained: f64,
    n_selected: usize,
    pool_accuracy: f64,
    precision: Option<f64>,
}

fn desk_experiment(tmp: &Path) -> Result<Vec<DeskRun>, String> {
    let mut runs = Vec::new();
    for seed in 0..10 {
        let start = Instant::now();
        let cfg = common::desk_config(&tmp.join(format!("desk{seed}")), seed);
        let reports = run_pipeline(&cfg).map_err(|e| format!("seed {seed}: {e}"))?;
        let run = DeskRun {
            seed,
            baseline: reports[0].accuracy,
            retrained: reports[1].accuracy,
            n_selected: reports[1].n_virtual_selected,
            pool_accuracy: reports[0]
                .pool_accuracy
                .ok_or("baseline pool accuracy missing")?,
            precision: reports[1].selection_precision,
        };
        println!(
            "       seed {}: baseline {:.4} -> retrained {:.4} ({:+.4}), {} virtual, selection precision {}, baseline pool accuracy {:.4} [{:.0}s]",
            run.seed,
            run.baseline,
            run.retrained,
            run.retrained - run.baseline,
            run.n_selected,
            run.precision.map_or("n/a".into(), |p| format!("{p:.4}")),
            run.pool_accuracy,
            start.elapsed().as_secs_f64()
        );
        runs.push(run);
    }
    Ok(runs)
}

fn desk_improvement(runs: &[DeskRun]) -> Outcome {
    let wins = runs.iter().filter(|r| r.retrained >= r.baseline).count();
    let mean = runs.iter().map(|r| r.retrained - r.baseline).sum::<f64>() / runs.len() as f64;
    let base = runs.iter().map(|r| r.baseline).sum::<f64>() / runs.len() as f64;
    let retr = runs.iter().map(|r| r.retrained).sum::<f64>() / runs.len() as f64;
    verdict(
        wins >= 8 && mean > 0.0,
        format!(
            "retrained >= baseline in {wins}/10 seeds; mean accuracy {base:.4} -> {retr:.4} ({:+.2} points)",
            100.0 * mean
        ),
    )
}

fn desk_precision(runs: &[DeskRun]) -> Outcome {
    let bad: Vec<String> = runs
        .iter()
        .filter(|r| r.precision.is_none_or(|p| p < r.pool_accuracy))
        .map(|r| format!("seed {}", r.seed))
        .collect();
    let worst_margin = runs
        .iter()
        .filter_map(|r| r.precision.map(|p| p - r.pool_accuracy))
        .fold(f64::INFINITY, f64::min);
    verdict(
        bad.is_empty(),
        format!(
            "selection precision >= baseline pool accuracy in {}/10 seeds (smallest margin {worst_margin:+.4}){}",
            10 - bad.len(),
            if bad.is_empty() { String::new() } else { format!("; failing: {}", bad.join(", ")) }
        ),
    )
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism(tmp: &Path) -> Outcome {
    let mut a = common::tiny_config(&tmp.join("det_a"));
    a.rounds = 2;
    a.seed = 17;
    let mut b = a.clone();
    b.out_dir = tmp.join("det_b");
    let mut c = a.clone();
    c.out_dir = tmp.join("det_c");
    c.bootstrap.n_workers = 4;
    for cfg in [&a, &b, &c] {
        if let Err(e) = run_pipeline(cfg) {
            return Outcome::Fail(e.to_string());
        }
    }
    // config.txt records the output directory, so it is left out.
    let artifacts = |dir: &Path| -> Vec<_> {
        dir_contents(dir)
            .into_iter()
            .filter(|(n, _)| n != "config.txt")
            .collect()
    };
    let (fa, fb, fc) = (
        artifacts(&a.out_dir),
        artifacts(&b.out_dir),
        artifacts(&c.out_dir),
    );
    let identical = fa == fb;
    let worker_invariant = fa == fc;
    let data = load_data(&a).unwrap();
    let bench = benchmark_parallel(&a, &data.train, &[1, 3, 8]);
    verdict(
        identical && worker_invariant && bench.is_ok(),
        format!(
            "{} artifacts byte-identical across reruns: {identical}; identical with 4 workers: {worker_invariant}; \
             ensemble identity check over 1/3/8 workers: {}",
            fa.len(),
            bench.map_or_else(|e| format!("failed ({e})"), |_| "ok".into())
        ),
    )
}

fn parallel_benchmark(tmp: &Path) -> Outcome {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    if cores < 4 {
        // Still exercise the harness and its identity check on a small ensemble.
        let cfg = common::tiny_config(&tmp.join("bench"));
        let data = load_data(&cfg).unwrap();
        return match benchmark_parallel(&cfg, &data.train, &[1, 4, 8]) {
            Ok(rows) => Outcome::Skip(format!(
                "host has {cores} core(s), criterion needs >= 4; identity check passed, timings {}",
                rows.iter()
                    .map(|r| format!("{}w {:.2}s", r.workers, r.seconds))
                    .collect::<Vec<_>>()
                    .join(", ")
            )),
            Err(e) => Outcome::Fail(e.to_string()),
        };
    }
    let cfg = common::desk_config(&tmp.join("bench"), 0);
    let n = cfg.bootstrap.n_networks;
    let data = load_data(&cfg).unwrap();
    let rows = match benchmark_parallel(&cfg, &data.train, &[1, 4, n, 2 * n]) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let speedup = |i: usize| rows[0].seconds / rows[i].seconds;
    let (s4, sn, s2n) = (speedup(1), speedup(2), speedup(3));
    verdict(
        s4 >= 1.5 && s2n <= sn * 1.15,
        format!(
            "{cores} cores: speedup 4 workers {s4:.2}x (>= 1.5), {n} workers {sn:.2}x, {} workers {s2n:.2}x (saturated)",
            2 * n
        ),
    )
}

fn closed_form_params(conv: &[usize], fc: &[usize]) -> usize {
    let mut total = 0;
    let mut prev = 1;
    for &k in conv {
        total += k * (prev * 9 + 1);
        prev = k;
    }
    for &n in fc {
        total += n * (prev + 1);
        prev = n;
    }
    total
}

fn variant_suite() -> Outcome {
    let expected: [(Variant, &[usize], &[usize]); 5] = [
        (Variant::Baseline, &[45, 80, 125, 180], &[1080, 360, 3]),
        (Variant::Half, &[23, 40, 63, 90], &[540, 180, 3]),
        (Variant::Plus50, &[68, 120, 188, 270], &[1620, 540, 3]),
        (Variant::ExtraFc, &[45, 80, 125, 180], &[1080, 360, 180, 3]),
        (Variant::DropFirstConv, &[80, 125, 180], &[1080, 360, 3]),
    ];
    let d = generate_synthetic(&SyntheticSpec {
        labeled_per_class: 8,
        pool_size: 0,
        benchmark_per_class: 4,
        seed: 3,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let mut notes = Vec::new();
    let mut ok = closed_form_params(&[45, 80, 125, 180], &[1080, 360, 3]) == 911_458;
    for (variant, conv, fc) in expected {
        let arch = Architecture::variant(variant);
        let want = closed_form_params(conv, fc);
        let shapes_ok = arch.conv_kernel_counts == conv && arch.fc_sizes == fc;
        let mut model = build_model(arch, 1).unwrap();
        let count: usize = model.params.iter().map(|p| p.value.len()).sum();
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let trained =
            train(&mut model, &d.labeled, &[], &cfg).is_ok() && model.trained_iterations > 0;
        let probs_ok = d.benchmark.iter().all(|p| {
            let pr = forward_proba(&model, &p.pixels).unwrap();
            pr.len() == 3
                && (pr.sum() - 1.0).abs() < 1e-12
                && pr.data().iter().all(|v| (0.0..=1.0).contains(v))
        });
        ok &= shapes_ok && count == want && model.arch.param_count() == want && trained && probs_ok;
        notes.push(format!(
            "{variant} {count}{}",
            if count == want { "" } else { " (mismatch)" }
        ));
    }
    verdict(
        ok,
        format!(
            "built, trained 1 epoch, valid probabilities; parameters: {}",
            notes.join(", ")
        ),
    )
}

fn main() {
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let tmp = tempfile::tempdir().unwrap();
    let tmp_path = tmp.path().to_path_buf();
    let desk: RefCell<Option<Result<Vec<DeskRun>, String>>> = RefCell::new(None);
    let with_desk = |f: fn(&[DeskRun]) -> Outcome| {
        let mut slot = desk.borrow_mut();
        match slot.get_or_insert_with(|| desk_experiment(&tmp_path)) {
            Ok(r) => f(r),
            Err(e) => Outcome::Fail(e.clone()),
        }
    };

    let criteria: Vec<(&str, Box<dyn FnMut() -> Outcome>)> = vec![
        ("gradient suite", Box::new(gradient_suite)),
        ("statistical oracles", Box::new(statistical_oracles)),
        ("selection monotonicity", Box::new(selection_monotonicity)),
        ("counting fidelity", Box::new(counting_fidelity)),
        ("desk experiment", Box::new(|| with_desk(desk_improvement))),
        (
            "desk selection precision",
            Box::new(|| with_desk(desk_precision)),
        ),
        ("determinism", Box::new(|| determinism(&tmp_path))),
        (
            "parallel benchmark",
            Box::new(|| parallel_benchmark(&tmp_path)),
        ),
        ("architecture variants", Box::new(variant_suite)),
    ];

    let mut failed = 0;
    for (i, (name, mut run)) in criteria.into_iter().enumerate() {
        if let Some(f) = &filter {
            if !name.contains(f.as_str()) {
                continue;
            }
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(AssertUnwindSafe(&mut run))
            .unwrap_or_else(|_| Outcome::Fail("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {}. {name} ({secs:.1}s): {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
