use crate::error::{shape_err, Result};
use crate::gemm::{gemm_nn, gemm_nt, gemm_tn};
use crate::Tensor;

/// `x[B,D] · w[D,K] + b[K]`
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (batch, d) = x.dims2()?;
    let (wd, k) = w.dims2()?;
    if wd != d {
        return shape_err(format!("dense: input width {d} but weight is {:?}", w.shape()));
    }
    if b.shape() != [k] {
        return shape_err(format!("dense: bias must be [{k}], got {:?}", b.shape()));
    }
    let mut y = Vec::with_capacity(batch * k);
    for _ in 0..batch {
        y.extend_from_slice(b.data());
    }
    gemm_nn(batch, k, d, x.data(), w.data(), &mut y);
    Tensor::new(vec![batch, k], y)
}

/// Returns `(dx, dw, db)`; each only when requested.
pub fn dense_backward(
    x: &Tensor,
    w: &Tensor,
    grad_out: &[f64],
    need: [bool; 3],
) -> (Option<Vec<f64>>, Option<Vec<f64>>, Option<Vec<f64>>) {
    let (batch, d) = (x.shape()[0], x.shape()[1]);
    let k = w.shape()[1];
    let dx = need[0].then(|| {
        let mut dx = vec![0.0; batch * d];
        gemm_nt(batch, d, k, grad_out, w.data(), &mut dx);
        dx
    });
    let dw = need[1].then(|| {
        let mut dw = vec![0.0; d * k];
        gemm_tn(d, k, batch, x.data(), grad_out, &mut dw);
        dw
    });
    let db = need[2].then(|| {
        let mut db = vec![0.0; k];
        for row in grad_out.chunks_exact(k) {
            for (acc, g) in db.iter_mut().zip(row) {
                *acc += g;
            }
        }
        db
    });
    (dx, dw, db)
}
