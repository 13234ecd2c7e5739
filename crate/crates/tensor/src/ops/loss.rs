use crate::error::{arg_err, Result};
use crate::Tensor;

/// Row-wise `log Σ exp`, stabilized by subtracting the row maximum.
pub fn log_sum_exp(row: &[f64]) -> f64 {
    let (arg, max) = arg_max(row);
    max + rest_sum(row, arg, max).ln_1p()
}

/// `-log softmax(row)[t]`. The maximum's own `exp(0) = 1` is kept out of the
/// sum and folded in with `ln_1p`, so tiny losses keep full precision.
pub fn nll_row(row: &[f64], t: usize) -> f64 {
    let (arg, max) = arg_max(row);
    (max - row[t]) + rest_sum(row, arg, max).ln_1p()
}

fn arg_max(row: &[f64]) -> (usize, f64) {
    row.iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
}

fn rest_sum(row: &[f64], arg: usize, max: f64) -> f64 {
    row.iter()
        .enumerate()
        .filter(|&(i, _)| i != arg)
        .map(|(_, &s)| (s - max).exp())
        .sum()
}

/// Row-wise softmax of a `[B, N]` tensor.
pub fn softmax_rows(logits: &Tensor) -> Result<Tensor> {
    let (_, n) = logits.dims2()?;
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks_exact(n) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        let mut total = 0.0;
        for &s in row {
            let e = (s - max).exp();
            total += e;
            out.push(e);
        }
        for p in &mut out[start..] {
            *p /= total;
        }
    }
    Tensor::new(logits.shape(), out)
}

/// Mean negative log-probability of the indexed class, without
/// materializing probabilities.
pub fn cross_entropy_index(logits: &Tensor, targets: &[usize]) -> Result<f64> {
    let (batch, n) = logits.dims2()?;
    check_targets(batch, n, targets)?;
    let total: f64 = logits
        .data()
        .chunks_exact(n)
        .zip(targets)
        .map(|(row, &t)| nll_row(row, t))
        .sum();
    Ok(total / batch as f64)
}

pub fn check_targets(batch: usize, classes: usize, targets: &[usize]) -> Result<()> {
    if targets.len() != batch {
        return arg_err(format!("{} targets for batch of {batch}", targets.len()));
    }
    if let Some((i, &t)) = targets.iter().enumerate().find(|(_, &t)| t >= classes) {
        return arg_err(format!("target {t} at row {i} outside [0, {classes})"));
    }
    Ok(())
}
