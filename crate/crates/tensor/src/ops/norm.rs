use crate::error::{arg_err, shape_err, Result};
use crate::Tensor;

/// Per-channel statistics of one standardization pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    /// Population variance (divides by `B·H·W`).
    pub var: Vec<f64>,
}

/// Z-normalization over the batch and spatial axes of each channel:
/// `(x − mean_c) / sqrt(var_c + epsilon)`. No learned scale or shift.
pub fn znorm_forward(x: &Tensor, epsilon: f64) -> Result<(Tensor, ChannelStats)> {
    if !(epsilon > 0.0) {
        return arg_err(format!("znorm epsilon must be positive, got {epsilon}"));
    }
    let (b, c, h, w) = x.dims4()?;
    let plane = h * w;
    let count = (b * plane) as f64;
    let data = x.data();
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for ch in 0..c {
        let mut sum = 0.0;
        for n in 0..b {
            sum += data[(n * c + ch) * plane..(n * c + ch + 1) * plane].iter().sum::<f64>();
        }
        let mu = sum / count;
        let mut sq = 0.0;
        for n in 0..b {
            sq += data[(n * c + ch) * plane..(n * c + ch + 1) * plane]
                .iter()
                .map(|v| (v - mu) * (v - mu))
                .sum::<f64>();
        }
        mean[ch] = mu;
        var[ch] = sq / count;
    }
    let stats = ChannelStats { mean, var };
    let y = standardize(x, &stats, epsilon)?;
    Ok((y, stats))
}

/// Applies fixed per-channel statistics, as used at inference time.
pub fn standardize(x: &Tensor, stats: &ChannelStats, epsilon: f64) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    if stats.mean.len() != c || stats.var.len() != c {
        return shape_err(format!(
            "standardize: {} channels but statistics for {}",
            c,
            stats.mean.len()
        ));
    }
    let plane = h * w;
    let mut out = x.data().to_vec();
    for n in 0..b {
        for ch in 0..c {
            let inv = 1.0 / (stats.var[ch] + epsilon).sqrt();
            let mu = stats.mean[ch];
            for v in &mut out[(n * c + ch) * plane..(n * c + ch + 1) * plane] {
                *v = (*v - mu) * inv;
            }
        }
    }
    Tensor::new(x.shape(), out)
}

/// Input adjoint of [`znorm_forward`], differentiating through the batch statistics:
/// `dx = s/n · (n·dy − Σdy − y·Σ(dy·y))` with `s = 1/sqrt(var + epsilon)`.
pub fn znorm_backward(y: &Tensor, stats: &ChannelStats, epsilon: f64, grad_out: &[f64]) -> Vec<f64> {
    let (b, c, h, w) = (y.shape()[0], y.shape()[1], y.shape()[2], y.shape()[3]);
    let plane = h * w;
    let count = (b * plane) as f64;
    let yd = y.data();
    let mut dx = vec![0.0; yd.len()];
    for ch in 0..c {
        let mut sum_dy = 0.0;
        let mut sum_dy_y = 0.0;
        for n in 0..b {
            let r = (n * c + ch) * plane..(n * c + ch + 1) * plane;
            for (g, v) in grad_out[r.clone()].iter().zip(&yd[r]) {
                sum_dy += g;
                sum_dy_y += g * v;
            }
        }
        let s = 1.0 / (stats.var[ch] + epsilon).sqrt();
        let mean_dy = sum_dy / count;
        let mean_dy_y = sum_dy_y / count;
        for n in 0..b {
            let r = (n * c + ch) * plane..(n * c + ch + 1) * plane;
            for ((d, g), v) in dx[r.clone()].iter_mut().zip(&grad_out[r.clone()]).zip(&yd[r]) {
                *d = s * (g - mean_dy - v * mean_dy_y);
            }
        }
    }
    dx
}

/// Input adjoint of [`standardize`].
pub fn standardize_backward(shape: &[usize], stats: &ChannelStats, epsilon: f64, grad_out: &[f64]) -> Vec<f64> {
    let (c, plane) = (shape[1], shape[2] * shape[3]);
    let mut dx = grad_out.to_vec();
    for (i, chunk) in dx.chunks_exact_mut(plane).enumerate() {
        let inv = 1.0 / (stats.var[i % c] + epsilon).sqrt();
        chunk.iter_mut().for_each(|v| *v *= inv);
    }
    dx
}
