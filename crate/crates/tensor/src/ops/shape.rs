use crate::error::{arg_err, shape_err, Result};
use crate::Tensor;

/// Concatenates `[B, Ci, H, W]` tensors along the channel axis in argument order.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    let Some(first) = parts.first() else {
        return arg_err("concat_channels of zero tensors");
    };
    let (b, _, h, w) = first.dims4()?;
    let mut total = 0;
    for p in parts {
        let (pb, pc, ph, pw) = p.dims4()?;
        if (pb, ph, pw) != (b, h, w) {
            return shape_err(format!(
                "concat_channels: part {:?} incompatible with {:?}",
                p.shape(),
                first.shape()
            ));
        }
        total += pc;
    }
    let plane = h * w;
    let mut out = Vec::with_capacity(b * total * plane);
    for n in 0..b {
        for p in parts {
            let c = p.shape()[1];
            out.extend_from_slice(&p.data()[n * c * plane..(n + 1) * c * plane]);
        }
    }
    Tensor::new(vec![b, total, h, w], out)
}

/// Channels `[start, start + count)` of a `[B, C, H, W]` tensor.
pub fn slice_channels(x: &Tensor, start: usize, count: usize) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    if count == 0 || start + count > c {
        return arg_err(format!("channel slice {start}+{count} outside {c} channels"));
    }
    let plane = h * w;
    let mut out = Vec::with_capacity(b * count * plane);
    for n in 0..b {
        let base = (n * c + start) * plane;
        out.extend_from_slice(&x.data()[base..base + count * plane]);
    }
    Tensor::new(vec![b, count, h, w], out)
}
