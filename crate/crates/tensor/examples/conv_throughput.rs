//! Prints forward and backward convolution throughput for the shapes the
//! default networks use.

use std::time::Instant;
use vehreid_tensor::ops::conv::{conv2d_backward, conv2d_forward};
use vehreid_tensor::Tensor;

fn filled(shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 - 0.5).collect()).unwrap()
}

fn main() {
    let cases = [
        ("stem 3->16 3x3/2 @64", [16, 3, 64, 64], [16, 3, 3, 3], 2, 1),
        ("16->16 3x3 @16", [16, 16, 16, 16], [16, 16, 3, 3], 1, 1),
        ("32->32 3x3 @8", [16, 32, 8, 8], [32, 32, 3, 3], 1, 1),
        ("64->64 3x3 @4", [16, 64, 4, 4], [64, 64, 3, 3], 1, 1),
    ];
    for (name, xs, ks, stride, pad) in cases {
        let x = filled(&xs);
        let k = filled(&ks);
        let b = Tensor::zeros(vec![ks[0]]);
        let reps = 20;
        let start = Instant::now();
        let mut geom = None;
        let mut y = None;
        for _ in 0..reps {
            let (out, g) = conv2d_forward(&x, &k, &b, stride, pad).unwrap();
            geom = Some(g);
            y = Some(out);
        }
        let fwd = start.elapsed().as_secs_f64() / reps as f64;
        let g = geom.unwrap();
        let dy = y.unwrap();
        let start = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(conv2d_backward(&g, x.data(), None, k.data(), dy.data(), [true, true, true]));
        }
        let bwd = start.elapsed().as_secs_f64() / reps as f64;
        let gmacs = g.macs() as f64 / 1e9;
        println!(
            "{name:<24} fwd {:7.3} ms ({:5.2} GMAC/s)  bwd {:7.3} ms ({:5.2} GMAC/s)",
            fwd * 1e3,
            gmacs / fwd,
            bwd * 1e3,
            2.0 * gmacs / bwd
        );
    }
}
