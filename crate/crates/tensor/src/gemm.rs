//! Row-major matrix products used by the convolution and dense kernels.
//!
//! All routines accumulate into `c`. Tiles of `c` are summed in registers
//! over a block of the shared dimension, rows of `b` are read contiguously,
//! and the shared dimension is blocked so a strip of `b` stays in cache.
//! Summation order depends only on the shapes, never on the tile an entry
//! falls in or on the instruction set.

const KC: usize = 128;
const NC: usize = 512;

/// Wraps a kernel body so it is compiled for the baseline target and again
/// with AVX2 and AVX-512 enabled, picked at run time. Every build performs
/// the same operations in the same order, so results are bitwise identical.
macro_rules! dispatch {
    ($(#[$doc:meta])* pub fn $name:ident => $body:path) => {
        dispatch! { $(#[$doc])* pub fn $name => $body, $body, $body }
    };
    ($(#[$doc:meta])* pub fn $name:ident => $base:path, $avx2:path, $avx512:path) => {
        $(#[$doc])*
        pub fn $name(m: usize, n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
            #[cfg(target_arch = "x86_64")]
            {
                #[target_feature(enable = "avx512f")]
                unsafe fn wider(m: usize, n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
                    $avx512(m, n, k, a, b, c)
                }
                #[target_feature(enable = "avx2")]
                unsafe fn wide(m: usize, n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
                    $avx2(m, n, k, a, b, c)
                }
                if std::is_x86_feature_detected!("avx512f") {
                    // SAFETY: the feature was detected on this CPU.
                    return unsafe { wider(m, n, k, a, b, c) };
                }
                if std::is_x86_feature_detected!("avx2") {
                    // SAFETY: the feature was detected on this CPU.
                    return unsafe { wide(m, n, k, a, b, c) };
                }
            }
            $base(m, n, k, a, b, c)
        }
    };
}

dispatch! {
    /// `c[m×n] += a[m×k] · b[k×n]`
    pub fn gemm_nn => nn_body::<4, 8>, nn_body::<4, 8>, nn_body::<MR512, NR512>
}

const MR512: usize = 4;
const NR512: usize = 16;

/// Tiles of `MR×NR`; a `KC×NR` strip of `b` stays in L1 while every row
/// block of `a` passes over it. The tile shape only groups independent
/// entries, so it does not change any result.
#[inline(always)]
fn nn_body<const MR: usize, const NR: usize>(m: usize, n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    for j0 in (0..n).step_by(NC) {
        let j1 = (j0 + NC).min(n);
        let full = j0 + (j1 - j0) / NR * NR;
        for p0 in (0..k).step_by(KC) {
            let p1 = (p0 + KC).min(k);
            for j in (j0..full).step_by(NR) {
                let mut i = 0;
                while i + MR <= m {
                    tile::<MR, NR>(n, k, a, b, c, i, j, p0, p1);
                    i += MR;
                }
                for r in i..m {
                    row_update(n, k, a, b, c, r, j, j + NR, p0, p1);
                }
            }
            if full < j1 {
                for r in 0..m {
                    row_update(n, k, a, b, c, r, full, j1, p0, p1);
                }
            }
        }
    }
}

/// One `MR×NR` block of `c`, accumulated in registers over `p0..p1`.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn tile<const MR: usize, const NR: usize>(n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64], i: usize, j: usize, p0: usize, p1: usize) {
    let mut acc = [[0.0f64; NR]; MR];
    for p in p0..p1 {
        let bv: &[f64; NR] = b[p * n + j..p * n + j + NR].try_into().unwrap();
        for (r, row) in acc.iter_mut().enumerate() {
            let av = a[(i + r) * k + p];
            for (x, &y) in row.iter_mut().zip(bv) {
                *x += av * y;
            }
        }
    }
    for (r, row) in acc.iter().enumerate() {
        let out = &mut c[(i + r) * n + j..(i + r) * n + j + NR];
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn row_update(n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64], r: usize, j0: usize, j1: usize, p0: usize, p1: usize) {
    // Same order as `tile`: each block is summed from zero and then added to
    // `c`, so an entry does not depend on whether it falls inside a full tile.
    const W: usize = 8;
    for jc in (j0..j1).step_by(W) {
        let w = (j1 - jc).min(W);
        let mut acc = [0.0f64; W];
        for p in p0..p1 {
            let av = a[r * k + p];
            for (x, &bv) in acc[..w].iter_mut().zip(&b[p * n + jc..p * n + jc + w]) {
                *x += av * bv;
            }
        }
        for (o, &v) in c[r * n + jc..r * n + jc + w].iter_mut().zip(&acc[..w]) {
            *o += v;
        }
    }
}

dispatch! {
    /// `c[m×n] += a[m×k] · b[n×k]ᵀ`
    ///
    /// Both operands are read along contiguous rows. Each entry is a dot product
    /// kept in `LANES` partial sums, blocked over the shared dimension.
    pub fn gemm_nt => nt_body::<2, 2>, nt_body::<4, 2>, nt_body::<4, 2>
}

/// Dot products in `RA×RB` groups, so each loaded chunk of a row feeds
/// several sums. Grouping does not change any entry's summation order.
#[inline(always)]
fn nt_body<const RA: usize, const RB: usize>(m: usize, n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    const KB: usize = 2048;
    for p0 in (0..k).step_by(KB) {
        let p1 = (p0 + KB).min(k);
        for i in (0..m).step_by(RA) {
            for j in (0..n).step_by(RB) {
                // Missing rows repeat the last one; their sums are dropped.
                let ar: [&[f64]; RA] = std::array::from_fn(|r| {
                    let row = (i + r).min(m - 1);
                    &a[row * k + p0..row * k + p1]
                });
                let br: [&[f64]; RB] = std::array::from_fn(|r| {
                    let row = (j + r).min(n - 1);
                    &b[row * k + p0..row * k + p1]
                });
                let sums = dots::<RA, RB>(&ar, &br);
                for (r, row) in sums.iter().enumerate().take(m - i) {
                    for (q, &v) in row.iter().enumerate().take(n - j) {
                        c[(i + r) * n + j + q] += v;
                    }
                }
            }
        }
    }
}

const LANES: usize = 4;

/// Every dot product of the rows in `a` with the rows in `b`, each summed in
/// `LANES` interleaved partial sums that are added left to right at the end.
#[inline(always)]
fn dots<const RA: usize, const RB: usize>(a: &[&[f64]; RA], b: &[&[f64]; RB]) -> [[f64; RB]; RA] {
    let len = a[0].len();
    let body = len / LANES * LANES;
    let mut acc = [[[0.0f64; LANES]; RB]; RA];
    let mut p = 0;
    while p < body {
        for r in 0..RA {
            let x = &a[r][p..p + LANES];
            for q in 0..RB {
                let y = &b[q][p..p + LANES];
                let s = &mut acc[r][q];
                s[0] += x[0] * y[0];
                s[1] += x[1] * y[1];
                s[2] += x[2] * y[2];
                s[3] += x[3] * y[3];
            }
        }
        p += LANES;
    }
    let mut out = [[0.0; RB]; RA];
    for r in 0..RA {
        for q in 0..RB {
            let mut s = acc[r][q].iter().sum::<f64>();
            for p in body..len {
                s += a[r][p] * b[q][p];
            }
            out[r][q] = s;
        }
    }
    out
}

/// `c[m×n] += a[k×m]ᵀ · b[k×n]`
pub fn gemm_tn(m: usize, n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    let at = transpose(k, m, a);
    gemm_nn(m, n, k, &at, b, c);
}

/// Transpose of a row-major `rows×cols` matrix.
pub fn transpose(rows: usize, cols: usize, src: &[f64]) -> Vec<f64> {
    const TB: usize = 32;
    let mut out = vec![0.0; rows * cols];
    for r0 in (0..rows).step_by(TB) {
        for c0 in (0..cols).step_by(TB) {
            for r in r0..(r0 + TB).min(rows) {
                for c in c0..(c0 + TB).min(cols) {
                    out[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
    out
}
