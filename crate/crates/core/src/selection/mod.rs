//! Virtual-sample selection: per-patch one-sided Welch tests of the candidate
//! class against both other classes, Benjamini–Hochberg control across the
//! pool, and promotion of the surviving patches to labeled samples.

mod fdr;
mod stats;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

pub use fdr::bh_fdr;
pub use stats::{
    ln_gamma, reg_inc_beta, student_t_cdf, student_t_sf, welch_t_one_sided, TTestResult,
};

use crate::bootstrap::PredictionMatrix;
use crate::dataset::{LabeledPatch, Origin, UnlabeledPool};
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::NUM_CLASSES;

/// How the two per-patch p-values are grouped for FDR control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FamilyStrategy {
    /// One BH family for the runner-up comparisons and one for the
    /// second-runner-up comparisons; a patch needs both to survive.
    #[default]
    Separate,
    /// A single BH family holding all 2N p-values.
    Pooled,
    /// One p-value per patch, the larger of its two, in a single family.
    MaxP,
}

impl FromStr for FamilyStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "separate" => Ok(FamilyStrategy::Separate),
            "pooled" => Ok(FamilyStrategy::Pooled),
            "max_p" => Ok(FamilyStrategy::MaxP),
            _ => Err(Error::Config(format!("unknown FDR family strategy '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchVerdict {
    pub patch_id: u64,
    /// Class with the highest mean bootstrap probability.
    pub candidate_label: usize,
    pub means: [f64; NUM_CLASSES],
    /// The two other classes, runner-up first.
    pub others: [usize; 2],
    pub p_first: f64,
    pub p_second: f64,
    pub pass_first: bool,
    pub pass_second: bool,
    pub selected: bool,
    /// The top mean was tied, so the patch was never tested.
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub alpha: f64,
    pub strategy: FamilyStrategy,
    pub verdicts: Vec<PatchVerdict>,
    pub n_selected: usize,
    pub virtual_samples: Vec<LabeledPatch>,
}

impl SelectionReport {
    pub fn selected_ids(&self) -> Vec<u64> {
        self.verdicts
            .iter()
            .filter(|v| v.selected)
            .map(|v| v.patch_id)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(SELECTION_CSV_HEADER);
        out.push('\n');
        for v in &self.verdicts {
            let _ = writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}",
                v.patch_id,
                v.candidate_label,
                v.means[0],
                v.means[1],
                v.means[2],
                v.p_first,
                v.p_second,
                v.pass_first,
                v.pass_second,
                v.selected
            );
        }
        out
    }
}

pub const SELECTION_CSV_HEADER: &str =
    "patch_id,candidate_label,mean_p0,mean_p1,mean_p2,p_first,p_second,pass_first,pass_second,selected";

/// Orders the two non-candidate classes: higher mean first, ties broken by
/// comparing the sorted columns so the order does not depend on class index.
fn runner_up_order(
    m: &PredictionMatrix,
    means: &[f64; NUM_CLASSES],
    a: usize,
    b: usize,
) -> [usize; 2] {
    let key = |c: usize| {
        let mut col = m.column(c);
        col.sort_by(f64::total_cmp);
        col
    };
    let first_is_a = match means[a].total_cmp(&means[b]) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => {
            let (ka, kb) = (key(a), key(b));
            ka.iter()
                .zip(&kb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .is_none_or(|o| o.is_ge())
        }
    };
    if first_is_a {
        [a, b]
    } else {
        [b, a]
    }
}

fn test_patch(m: &PredictionMatrix) -> Result<PatchVerdict> {
    let means = m.column_means();
    let top = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let at_top: Vec<usize> = (0..NUM_CLASSES).filter(|&c| means[c] == top).collect();
    let candidate = at_top[0];
    let rest: Vec<usize> = (0..NUM_CLASSES).filter(|&c| c != candidate).collect();
    let others = runner_up_order(m, &means, rest[0], rest[1]);
    let mut v = PatchVerdict {
        patch_id: m.patch_id,
        candidate_label: candidate,
        means,
        others,
        p_first: 1.0,
        p_second: 1.0,
        pass_first: false,
        pass_second: false,
        selected: false,
        tied: at_top.len() > 1,
    };
    if !v.tied {
        let cand = m.column(candidate);
        v.p_first = welch_t_one_sided(&cand, &m.column(others[0]))?.p_value;
        v.p_second = welch_t_one_sided(&cand, &m.column(others[1]))?.p_value;
    }
    Ok(v)
}

/// Runs the tests and FDR control with the default (separate-family) strategy.
pub fn select_virtual_samples(
    matrices: &[PredictionMatrix],
    pool: &UnlabeledPool,
    alpha: f64,
) -> Result<SelectionReport> {
    select_with_strategy(matrices, pool, alpha, FamilyStrategy::Separate)
}

pub fn select_with_strategy(
    matrices: &[PredictionMatrix],
    pool: &UnlabeledPool,
    alpha: f64,
    strategy: FamilyStrategy,
) -> Result<SelectionReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!(
            "alpha must be in (0,1), got {alpha}"
        )));
    }
    if matrices.len() != pool.len() {
        return Err(Error::Data(format!(
            "{} prediction matrices for a pool of {} patches",
            matrices.len(),
            pool.len()
        )));
    }
    let by_id: HashMap<u64, &Tensor> = pool
        .patches()
        .iter()
        .map(|p| (p.patch_id, &p.pixels))
        .collect();
    if let Some(m) = matrices.iter().find(|m| !by_id.contains_key(&m.patch_id)) {
        return Err(Error::Data(format!(
            "prediction for patch {} which is not in the pool",
            m.patch_id
        )));
    }

    let mut verdicts = matrices
        .iter()
        .map(test_patch)
        .collect::<Result<Vec<_>>>()?;
    let tested: Vec<usize> = (0..verdicts.len()).filter(|&i| !verdicts[i].tied).collect();
    let p1: Vec<f64> = tested.iter().map(|&i| verdicts[i].p_first).collect();
    let p2: Vec<f64> = tested.iter().map(|&i| verdicts[i].p_second).collect();

    let (pass1, pass2) = match strategy {
        FamilyStrategy::Separate => (bh_fdr(&p1, alpha)?, bh_fdr(&p2, alpha)?),
        FamilyStrategy::Pooled => {
            let all: Vec<f64> = p1.iter().chain(&p2).copied().collect();
            let r = bh_fdr(&all, alpha)?;
            let (a, b) = r.split_at(p1.len());
            (a.to_vec(), b.to_vec())
        }
        FamilyStrategy::MaxP => {
            let maxp: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a.max(*b)).collect();
            let r = bh_fdr(&maxp, alpha)?;
            (r.clone(), r)
        }
    };

    let mut virtual_samples = Vec::new();
    for (k, &i) in tested.iter().enumerate() {
        let v = &mut verdicts[i];
        v.pass_first = pass1[k];
        v.pass_second = pass2[k];
        v.selected = v.pass_first && v.pass_second;
        if v.selected {
            let pixels = by_id[&v.patch_id].clone();
            virtual_samples.push(LabeledPatch::new(
                pixels,
                v.candidate_label,
                Origin::Virtual {
                    patch_id: v.patch_id,
                },
            )?);
        }
    }
    Ok(SelectionReport {
        alpha,
        strategy,
        n_selected: virtual_samples.len(),
        verdicts,
        virtual_samples,
    })
}
