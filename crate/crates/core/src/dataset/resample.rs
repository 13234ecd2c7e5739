//! Separable filtering and resampling on planar images.

use super::image::Image;

/// Index into `[0, n)` after half-sample symmetric extension (period `2n`).
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let r = i.rem_euclid(period);
    if r < n as isize {
        r as usize
    } else {
        (period - 1 - r) as usize
    }
}

/// Normalized Gaussian taps truncated at `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Gaussian blur with symmetric boundary extension. Symmetric extension
/// commutes with a symmetric kernel, so the image mean is preserved.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Image {
    if sigma <= 0.0 {
        return img.clone();
    }
    let taps = gaussian_kernel(sigma);
    let radius = (taps.len() / 2) as isize;
    let (w, h) = (img.width(), img.height());
    let mut out = img.clone();
    let mut tmp = vec![0.0; w * h];
    for c in 0..3 {
        let src = img.plane(c);
        for y in 0..h {
            for x in 0..w {
                tmp[y * w + x] = taps
                    .iter()
                    .enumerate()
                    .map(|(k, t)| t * src[y * w + reflect(x as isize + k as isize - radius, w)])
                    .sum();
            }
        }
        let dst = out.plane_mut(c);
        for y in 0..h {
            for x in 0..w {
                dst[y * w + x] = taps
                    .iter()
                    .enumerate()
                    .map(|(k, t)| t * tmp[reflect(y as isize + k as isize - radius, h) * w + x])
                    .sum();
            }
        }
    }
    out
}

/// Exact-coverage weights mapping `n_in` source cells onto `n_out` equal
/// footprints. Row `o` holds `(source index, weight)` with weights summing to 1.
fn area_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let mut row = Vec::new();
            let mut i = lo.floor() as usize;
            while (i as f64) < hi && i < n_in {
                let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                if overlap > 0.0 {
                    row.push((i, overlap / scale));
                }
                i += 1;
            }
            row
        })
        .collect()
}

/// Box-filter (area averaging) resize, intended for shrinking.
pub fn area_resize(img: &Image, out_w: usize, out_h: usize) -> Image {
    let wx = area_weights(img.width(), out_w);
    let wy = area_weights(img.height(), out_h);
    separable(img, out_w, out_h, &wx, &wy)
}

/// Bilinear weights with half-pixel centers and edge clamping.
fn bilinear_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
            let i0 = src.floor() as usize;
            let frac = src - i0 as f64;
            if frac == 0.0 || i0 + 1 >= n_in {
                vec![(i0, 1.0)]
            } else {
                vec![(i0, 1.0 - frac), (i0 + 1, frac)]
            }
        })
        .collect()
}

/// Bilinear resize. Corner output pixels take the corner source values; a
/// same-size resize is the identity.
pub fn bilinear_resize(img: &Image, out_w: usize, out_h: usize) -> Image {
    if out_w == img.width() && out_h == img.height() {
        return img.clone();
    }
    let wx = bilinear_weights(img.width(), out_w);
    let wy = bilinear_weights(img.height(), out_h);
    separable(img, out_w, out_h, &wx, &wy)
}

fn separable(img: &Image, out_w: usize, out_h: usize, wx: &[Vec<(usize, f64)>], wy: &[Vec<(usize, f64)>]) -> Image {
    let (w, h) = (img.width(), img.height());
    let mut planes: [Vec<f64>; 3] = Default::default();
    let mut tmp = vec![0.0; out_w * h];
    for (c, plane) in planes.iter_mut().enumerate() {
        let src = img.plane(c);
        for y in 0..h {
            for (x, taps) in wx.iter().enumerate() {
                tmp[y * out_w + x] = taps.iter().map(|&(i, t)| t * src[y * w + i]).sum();
            }
        }
        let mut dst = vec![0.0; out_w * out_h];
        for (y, taps) in wy.iter().enumerate() {
            for x in 0..out_w {
                dst[y * out_w + x] = taps.iter().map(|&(i, t)| t * tmp[i * out_w + x]).sum();
            }
        }
        *plane = dst;
    }
    Image::from_planes(out_w, out_h, planes).expect("consistent sizes")
}

/// Mean absolute 4-neighbour Laplacian over interior pixels; a proxy for
/// high-frequency energy.
pub fn mean_abs_laplacian(img: &Image) -> f64 {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return 0.0;
    }
    let mut total = 0.0;
    for c in 0..3 {
        let p = img.plane(c);
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let v = 4.0 * p[y * w + x] - p[y * w + x - 1] - p[y * w + x + 1] - p[(y - 1) * w + x] - p[(y + 1) * w + x];
                total += v.abs();
            }
        }
    }
    total / (3 * (w - 2) * (h - 2)) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_is_half_sample_symmetric() {
        let idx: Vec<usize> = (-4..8).map(|i| reflect(i, 4)).collect();
        assert_eq!(idx, vec![3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0]);
    }

    #[test]
    fn kernel_normalized_and_truncated() {
        let k = gaussian_kernel(1.5);
        assert_eq!(k.len(), 2 * 5 + 1);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn area_weights_sum_to_one() {
        for (i, o) in [(64, 16), (10, 3), (7, 7)] {
            for row in area_weights(i, o) {
                assert!((row.iter().map(|r| r.1).sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
