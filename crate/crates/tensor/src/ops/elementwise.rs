use crate::error::{arg_err, shape_err, Result};
use crate::Tensor;

/// `x` for `x > 0`, `alpha·(eˣ − 1)` otherwise.
pub fn elu(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        alpha * x.exp_m1()
    }
}

/// Derivative of [`elu`] expressed through its input. Defined as 1 at zero.
pub fn elu_derivative(x: f64, alpha: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        alpha * x.exp()
    }
}

pub fn elu_forward(x: &Tensor, alpha: f64) -> Result<Tensor> {
    if !(alpha > 0.0) {
        return arg_err(format!("elu alpha must be positive, got {alpha}"));
    }
    Tensor::new(x.shape(), x.data().iter().map(|&v| elu(v, alpha)).collect())
}

pub fn relu_forward(x: &Tensor) -> Tensor {
    Tensor::new(x.shape(), x.data().iter().map(|&v| v.max(0.0)).collect())
        .expect("same shape")
}

pub fn check_same_shape(op: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return shape_err(format!(
            "{op}: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        ));
    }
    Ok(())
}

pub fn add_forward(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_same_shape("add", a, b)?;
    Tensor::new(a.shape(), a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect())
}

pub fn mul_forward(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_same_shape("mul", a, b)?;
    Tensor::new(a.shape(), a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect())
}
