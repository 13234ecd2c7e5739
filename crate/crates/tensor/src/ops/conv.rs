use crate::error::{arg_err, shape_err, Result};
use crate::gemm::{gemm_nn, gemm_nt, gemm_tn};
use crate::Tensor;

/// Resolved extents of a 2-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn new(input: &[usize], kernel: &[usize], stride: usize, padding: usize) -> Result<Self> {
        let &[batch, in_channels, height, width] = input else {
            return shape_err(format!("conv2d input must be [B,C,H,W], got {input:?}"));
        };
        let &[out_channels, kc, kernel_h, kernel_w] = kernel else {
            return shape_err(format!("conv2d kernel must be [Cout,Cin,kh,kw], got {kernel:?}"));
        };
        if stride == 0 {
            return arg_err("conv2d stride must be positive");
        }
        if kc != in_channels {
            return shape_err(format!(
                "conv2d kernel expects {kc} input channels, input has {in_channels}"
            ));
        }
        if kernel_h > height + 2 * padding || kernel_w > width + 2 * padding {
            return shape_err(format!(
                "conv2d kernel {kernel_h}x{kernel_w} larger than padded input {}x{}",
                height + 2 * padding,
                width + 2 * padding
            ));
        }
        Ok(Self {
            batch,
            in_channels,
            height,
            width,
            out_channels,
            kernel_h,
            kernel_w,
            stride,
            padding,
            out_h: (height + 2 * padding - kernel_h) / stride + 1,
            out_w: (width + 2 * padding - kernel_w) / stride + 1,
        })
    }

    pub fn output_shape(&self) -> [usize; 4] {
        [self.batch, self.out_channels, self.out_h, self.out_w]
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    fn columns(&self) -> usize {
        self.batch * self.out_h * self.out_w
    }

    /// Multiply-accumulate count of one forward pass.
    pub fn macs(&self) -> usize {
        self.patch_len() * self.out_channels * self.columns()
    }
}

/// Unfolds `x` into a `[Cin·kh·kw, B·oh·ow]` patch matrix.
fn im2col(g: &ConvGeometry, x: &[f64]) -> Vec<f64> {
    let cols = g.columns();
    let plane = g.out_h * g.out_w;
    let mut col = vec![0.0; g.patch_len() * cols];
    for c in 0..g.in_channels {
        for ky in 0..g.kernel_h {
            for kx in 0..g.kernel_w {
                let row = (c * g.kernel_h + ky) * g.kernel_w + kx;
                let dst_row = &mut col[row * cols..(row + 1) * cols];
                for b in 0..g.batch {
                    let src = &x[(b * g.in_channels + c) * g.height * g.width..];
                    let dst = &mut dst_row[b * plane..(b + 1) * plane];
                    for oy in 0..g.out_h {
                        let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                        if iy < 0 || iy >= g.height as isize {
                            continue;
                        }
                        let src_row = &src[iy as usize * g.width..(iy as usize + 1) * g.width];
                        let dst_row = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                        for (ox, d) in dst_row.iter_mut().enumerate() {
                            let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                            if ix >= 0 && ix < g.width as isize {
                                *d = src_row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the input.
fn col2im(g: &ConvGeometry, col: &[f64], dx: &mut [f64]) {
    let cols = g.columns();
    let plane = g.out_h * g.out_w;
    for c in 0..g.in_channels {
        for ky in 0..g.kernel_h {
            for kx in 0..g.kernel_w {
                let row = (c * g.kernel_h + ky) * g.kernel_w + kx;
                let src_row = &col[row * cols..(row + 1) * cols];
                for b in 0..g.batch {
                    let dst = &mut dx[(b * g.in_channels + c) * g.height * g.width..];
                    let src = &src_row[b * plane..(b + 1) * plane];
                    for oy in 0..g.out_h {
                        let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                        if iy < 0 || iy >= g.height as isize {
                            continue;
                        }
                        let dst_row = &mut dst[iy as usize * g.width..(iy as usize + 1) * g.width];
                        for (ox, &s) in src[oy * g.out_w..(oy + 1) * g.out_w].iter().enumerate() {
                            let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                            if ix >= 0 && ix < g.width as isize {
                                dst_row[ix as usize] += s;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `[B, C, P]` → `[C, B·P]`
fn batch_to_channel_major(batch: usize, channels: usize, plane: usize, src: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for b in 0..batch {
        for c in 0..channels {
            out[(c * batch + b) * plane..(c * batch + b + 1) * plane]
                .copy_from_slice(&src[(b * channels + c) * plane..(b * channels + c + 1) * plane]);
        }
    }
    out
}

/// `[C, B·P]` → `[B, C, P]`
fn channel_to_batch_major(batch: usize, channels: usize, plane: usize, src: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for c in 0..channels {
        for b in 0..batch {
            out[(b * channels + c) * plane..(b * channels + c + 1) * plane]
                .copy_from_slice(&src[(c * batch + b) * plane..(c * batch + b + 1) * plane]);
        }
    }
    out
}

pub fn conv2d_forward(
    input: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<(Tensor, ConvGeometry)> {
    let (y, g, _) = conv2d_forward_keep(input, kernel, bias, stride, padding, false)?;
    Ok((y, g))
}

/// [`conv2d_forward`] that can also hand back the unfolded input, which the
/// kernel gradient needs again.
pub fn conv2d_forward_keep(
    input: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
    keep_cols: bool,
) -> Result<(Tensor, ConvGeometry, Option<Vec<f64>>)> {
    let g = ConvGeometry::new(input.shape(), kernel.shape(), stride, padding)?;
    if bias.shape() != [g.out_channels] {
        return shape_err(format!(
            "conv2d bias must be [{}], got {:?}",
            g.out_channels,
            bias.shape()
        ));
    }
    let col = im2col(&g, input.data());
    let cols = g.columns();
    let mut y = vec![0.0; g.out_channels * cols];
    for (o, row) in y.chunks_exact_mut(cols).enumerate() {
        row.fill(bias.data()[o]);
    }
    gemm_nn(g.out_channels, cols, g.patch_len(), kernel.data(), &col, &mut y);
    let out = channel_to_batch_major(g.batch, g.out_channels, g.out_h * g.out_w, &y);
    Ok((Tensor::new(g.output_shape(), out)?, g, keep_cols.then_some(col)))
}

pub struct ConvGrads {
    pub input: Option<Vec<f64>>,
    pub kernel: Option<Vec<f64>>,
    pub bias: Option<Vec<f64>>,
}

/// Gradients of a convolution given the output adjoint in `[B, Cout, oh, ow]` layout.
/// `saved_cols` is the unfolded input from the forward pass, rebuilt when absent.
pub fn conv2d_backward(
    g: &ConvGeometry,
    input: &[f64],
    saved_cols: Option<&[f64]>,
    kernel: &[f64],
    grad_out: &[f64],
    need: [bool; 3],
) -> ConvGrads {
    let cols = g.columns();
    let dy = batch_to_channel_major(g.batch, g.out_channels, g.out_h * g.out_w, grad_out);
    let kernel_grad = need[1].then(|| {
        let rebuilt;
        let col = match saved_cols {
            Some(c) => c,
            None => {
                rebuilt = im2col(g, input);
                &rebuilt
            }
        };
        let mut dk = vec![0.0; g.out_channels * g.patch_len()];
        gemm_nt(g.out_channels, g.patch_len(), cols, &dy, col, &mut dk);
        dk
    });
    let bias_grad = need[2].then(|| dy.chunks_exact(cols).map(|r| r.iter().sum()).collect());
    let input_grad = need[0].then(|| {
        let mut dcol = vec![0.0; g.patch_len() * cols];
        gemm_tn(g.patch_len(), cols, g.out_channels, kernel, &dy, &mut dcol);
        let mut dx = vec![0.0; input.len()];
        col2im(g, &dcol, &mut dx);
        dx
    });
    ConvGrads {
        input: input_grad,
        kernel: kernel_grad,
        bias: bias_grad,
    }
}
