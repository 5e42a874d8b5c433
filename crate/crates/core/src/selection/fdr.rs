use crate::error::{Error, Result};

/// Benjamini–Hochberg step-up procedure at level `alpha`.
///
/// Finds the largest `k` with `p_(k) <= k·alpha/m` and rejects every
/// hypothesis whose p-value is at most `p_(k)`, so tied p-values always share
/// a verdict. Returns the rejection mask in input order.
pub fn bh_fdr(p_values: &[f64], alpha: f64) -> Result<Vec<bool>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!(
            "alpha must be in (0,1), got {alpha}"
        )));
    }
    if let Some(bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Parameter(format!("p-value {bad} outside [0,1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));

    let threshold = order
        .iter()
        .enumerate()
        .rev()
        .find(|&(rank, &i)| p_values[i] <= (rank + 1) as f64 * alpha / m as f64)
        .map(|(_, &i)| p_values[i]);

    Ok(match threshold {
        Some(t) => p_values.iter().map(|&p| p <= t).collect(),
        None => vec![false; m],
    })
}
