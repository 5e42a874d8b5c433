use std::fmt::Write as _;

use crate::dataset::{HiddenLabels, LabeledPatch, UnlabeledPool};
use crate::error::{Error, Result};
use crate::network::{forward_proba, predict_labels, CnnModel};
use crate::selection::SelectionReport;
use crate::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// 0 for the baseline, then 1, 2, ...
    pub round: usize,
    pub alpha: Option<f64>,
    /// `confusion[truth][predicted]` on the benchmark set.
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
    pub accuracy: f64,
    pub precision: [f64; NUM_CLASSES],
    pub recall: [f64; NUM_CLASSES],
    pub n_virtual_used: usize,
    pub n_virtual_selected: usize,
    pub n_train_total: usize,
    pub verify_accuracy: Option<f64>,
    /// Accuracy of this model on the pool it scored, when true pool labels are known.
    pub pool_accuracy: Option<f64>,
    /// Fraction of this round's virtual labels that match the true pool labels.
    pub selection_precision: Option<f64>,
}

/// Builds the metrics from a confusion matrix; classes with no predictions
/// (or no members) get precision (recall) 0.
pub fn metrics_from_confusion(
    confusion: &[[usize; NUM_CLASSES]; NUM_CLASSES],
) -> (f64, [f64; NUM_CLASSES], [f64; NUM_CLASSES]) {
    let total: usize = confusion.iter().flatten().sum();
    let trace: usize = (0..NUM_CLASSES).map(|c| confusion[c][c]).sum();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut precision = [0.0; NUM_CLASSES];
    let mut recall = [0.0; NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        let predicted: usize = (0..NUM_CLASSES).map(|t| confusion[t][c]).sum();
        let actual: usize = confusion[c].iter().sum();
        precision[c] = ratio(confusion[c][c], predicted);
        recall[c] = ratio(confusion[c][c], actual);
    }
    (ratio(trace, total), precision, recall)
}

pub fn confusion_matrix(
    model: &CnnModel,
    patches: &[LabeledPatch],
) -> Result<[[usize; NUM_CLASSES]; NUM_CLASSES]> {
    if patches.is_empty() {
        return Err(Error::Data("evaluation set is empty".into()));
    }
    let mut m = [[0; NUM_CLASSES]; NUM_CLASSES];
    for (p, pred) in patches.iter().zip(predict_labels(model, patches)?) {
        m[p.label][pred] += 1;
    }
    Ok(m)
}

/// Accuracy of `model` on the pool against its hidden labels.
pub fn pool_accuracy(model: &CnnModel, pool: &UnlabeledPool, truth: &HiddenLabels) -> Result<f64> {
    if pool.is_empty() {
        return Err(Error::Data("pool is empty".into()));
    }
    let mut correct = 0usize;
    for p in pool.patches() {
        let t = truth
            .label(p.patch_id)
            .ok_or_else(|| Error::Data(format!("no true label for pool patch {}", p.patch_id)))?;
        if forward_proba(model, &p.pixels)?.argmax() == t {
            correct += 1;
        }
    }
    Ok(correct as f64 / pool.len() as f64)
}

/// Share of selected virtual samples whose label matches the truth; `None`
/// when nothing was selected.
pub fn selection_precision(report: &SelectionReport, truth: &HiddenLabels) -> Result<Option<f64>> {
    if report.virtual_samples.is_empty() {
        return Ok(None);
    }
    let mut correct = 0usize;
    for v in report.verdicts.iter().filter(|v| v.selected) {
        let t = truth
            .label(v.patch_id)
            .ok_or_else(|| Error::Data(format!("no true label for pool patch {}", v.patch_id)))?;
        if t == v.candidate_label {
            correct += 1;
        }
    }
    Ok(Some(correct as f64 / report.n_selected as f64))
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6}"));
        let _ = writeln!(s, "round = {}", self.round);
        let _ = writeln!(
            s,
            "alpha = {}",
            self.alpha.map_or("n/a".to_string(), |a| a.to_string())
        );
        let _ = writeln!(s, "n_virtual_selected = {}", self.n_virtual_selected);
        let _ = writeln!(s, "n_virtual_used = {}", self.n_virtual_used);
        let _ = writeln!(s, "n_train_total = {}", self.n_train_total);
        let _ = writeln!(s, "benchmark_accuracy = {:.6}", self.accuracy);
        let _ = writeln!(s, "verify_accuracy = {}", opt(self.verify_accuracy));
        let _ = writeln!(s, "pool_accuracy = {}", opt(self.pool_accuracy));
        let _ = writeln!(s, "selection_precision = {}", opt(self.selection_precision));
        for c in 0..NUM_CLASSES {
            let _ = writeln!(
                s,
                "class {c}: precision = {:.6} recall = {:.6}",
                self.precision[c], self.recall[c]
            );
        }
        let _ = writeln!(s, "confusion (rows = truth, cols = predicted):");
        for row in &self.confusion {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>6}")).collect();
            let _ = writeln!(s, "{}", cells.join(""));
        }
        s
    }
}

pub const SUMMARY_CSV_HEADER: &str =
    "round,alpha,n_virtual_selected,n_train_total,benchmark_accuracy";

pub fn summary_csv(reports: &[EvalReport]) -> String {
    let mut s = String::from(SUMMARY_CSV_HEADER);
    s.push('\n');
    for r in reports {
        let alpha = r.alpha.map_or(String::new(), |a| a.to_string());
        let _ = writeln!(
            s,
            "{},{},{},{},{:.6}",
            r.round, alpha, r.n_virtual_selected, r.n_train_total, r.accuracy
        );
    }
    s
}
