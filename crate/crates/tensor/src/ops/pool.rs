use crate::error::{arg_err, Result};
use crate::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolGeometry {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl PoolGeometry {
    pub fn new(shape: &[usize], kernel: usize, stride: usize, padding: usize) -> Result<Self> {
        let &[batch, channels, height, width] = shape else {
            return crate::error::shape_err(format!("maxpool input must be [B,C,H,W], got {shape:?}"));
        };
        if kernel == 0 || stride == 0 {
            return arg_err("maxpool kernel and stride must be positive");
        }
        if padding >= kernel {
            return arg_err(format!("maxpool padding {padding} must be below kernel {kernel}"));
        }
        if kernel > height + 2 * padding || kernel > width + 2 * padding {
            return crate::error::shape_err(format!(
                "maxpool window {kernel} larger than padded input {height}x{width}+{padding}"
            ));
        }
        Ok(Self {
            batch,
            channels,
            height,
            width,
            kernel,
            stride,
            padding,
            out_h: (height + 2 * padding - kernel) / stride + 1,
            out_w: (width + 2 * padding - kernel) / stride + 1,
        })
    }
}

/// Max pooling; padded positions never win. Returns the flat input index of
/// each selected element (first maximum in scan order on ties).
pub fn maxpool_forward(x: &Tensor, kernel: usize, stride: usize, padding: usize) -> Result<(Tensor, Vec<usize>)> {
    let g = PoolGeometry::new(x.shape(), kernel, stride, padding)?;
    let data = x.data();
    let planes = g.batch * g.channels;
    let mut out = Vec::with_capacity(planes * g.out_h * g.out_w);
    let mut argmax = Vec::with_capacity(out.capacity());
    for p in 0..planes {
        let base = p * g.height * g.width;
        for oy in 0..g.out_h {
            let y0 = (oy * stride) as isize - padding as isize;
            for ox in 0..g.out_w {
                let x0 = (ox * stride) as isize - padding as isize;
                let mut best = f64::NEG_INFINITY;
                let mut best_at = usize::MAX;
                for iy in y0.max(0)..(y0 + kernel as isize).min(g.height as isize) {
                    for ix in x0.max(0)..(x0 + kernel as isize).min(g.width as isize) {
                        let at = base + iy as usize * g.width + ix as usize;
                        if best_at == usize::MAX || data[at] > best {
                            best = data[at];
                            best_at = at;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_at);
            }
        }
    }
    Ok((Tensor::new(vec![g.batch, g.channels, g.out_h, g.out_w], out)?, argmax))
}

pub fn maxpool_backward(input_len: usize, argmax: &[usize], grad_out: &[f64]) -> Vec<f64> {
    let mut dx = vec![0.0; input_len];
    for (&at, &g) in argmax.iter().zip(grad_out) {
        dx[at] += g;
    }
    dx
}

/// `[B, C, H, W]` → `[B, C]` spatial mean.
pub fn global_avg_pool_forward(x: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    let plane = h * w;
    let out = x
        .data()
        .chunks_exact(plane)
        .map(|p| p.iter().sum::<f64>() / plane as f64)
        .collect();
    Tensor::new(vec![b, c], out)
}

pub fn global_avg_pool_backward(shape: &[usize], grad_out: &[f64]) -> Vec<f64> {
    let plane = shape[2] * shape[3];
    let scale = 1.0 / plane as f64;
    grad_out
        .iter()
        .flat_map(|&g| std::iter::repeat_n(g * scale, plane))
        .collect()
}
