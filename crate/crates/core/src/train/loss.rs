use vehreid_tensor::ops::loss::{cross_entropy_index, log_sum_exp, softmax_rows};

use crate::{Error, Result, Tensor};

/// Row-wise softmax of `[B, N]` similarities, stabilized by subtracting the
/// row maximum.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    Ok(softmax_rows(logits)?)
}

pub fn log_softmax(logits: &Tensor) -> Result<Tensor> {
    let (_, n) = logits.dims2()?;
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks_exact(n) {
        let lse = log_sum_exp(row);
        out.extend(row.iter().map(|s| s - lse));
    }
    Ok(Tensor::new(logits.shape(), out)?)
}

/// `-(1/M) Σ_k Σ_i y_ki · ln p_ki` for probability rows `probs` and label
/// distributions `labels`. Terms with `y = 0` contribute nothing.
pub fn cross_entropy_full(probs: &Tensor, labels: &Tensor) -> Result<f64> {
    let (batch, n) = probs.dims2()?;
    if labels.shape() != probs.shape() {
        return Err(Error::InvalidArgument(format!(
            "labels shape {:?} differs from probs {:?}",
            labels.shape(),
            probs.shape()
        )));
    }
    let mut total = 0.0;
    for (k, (p, y)) in probs.data().chunks_exact(n).zip(labels.data().chunks_exact(n)).enumerate() {
        let mass: f64 = y.iter().sum();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!("label row {k} sums to {mass}, not 1")));
        }
        total -= p.iter().zip(y).filter(|(_, &y)| y != 0.0).map(|(p, y)| y * p.ln()).sum::<f64>();
    }
    Ok(total / batch as f64)
}

/// Cross-entropy against class indices, via log-sum-exp on the similarities.
pub fn cross_entropy_onehot(logits: &Tensor, classes: &[usize]) -> Result<f64> {
    cross_entropy_index(logits, classes).map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn onehot(classes: &[usize], n: usize) -> Result<Tensor> {
    let mut data = vec![0.0; classes.len() * n];
    for (row, &c) in classes.iter().enumerate() {
        if c >= n {
            return Err(Error::InvalidArgument(format!("class {c} at row {row} outside [0, {n})")));
        }
        data[row * n + c] = 1.0;
    }
    Ok(Tensor::new(vec![classes.len(), n], data)?)
}
