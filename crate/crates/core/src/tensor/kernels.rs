//! Hot numeric kernels: matrix products and convolution lowering.
//!
//! Loop orders are chosen so the innermost loop streams contiguous rows,
//! which LLVM auto-vectorizes at opt-level 3. All reductions run in a fixed
//! order, keeping results bit-reproducible across runs.

use crate::scalar::Scalar;

/// c[m,n] += a[m,k] * b[k,n]
pub fn mm_nn<S: Scalar>(a: &[S], b: &[S], c: &mut [S], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == S::zero() {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for j in 0..n {
                c_row[j] = c_row[j] + aip * b_row[j];
            }
        }
    }
}

/// c[m,n] += a[m,k] * b[n,k]^T  (dot products of rows)
pub fn mm_nt<S: Scalar>(a: &[S], b: &[S], c: &mut [S], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for j in 0..n {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = S::zero();
            for p in 0..k {
                acc = acc + a_row[p] * b_row[p];
            }
            c_row[j] = c_row[j] + acc;
        }
    }
}

/// c[k,n] += a[m,k]^T * b[m,n]
pub fn mm_tn<S: Scalar>(a: &[S], b: &[S], c: &mut [S], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    for p in 0..m {
        let b_row = &b[p * n..(p + 1) * n];
        for i in 0..k {
            let api = a[p * k + i];
            if api == S::zero() {
                continue;
            }
            let c_row = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                c_row[j] = c_row[j] + api * b_row[j];
            }
        }
    }
}

/// Unfold x[c,h,w] into columns [c*k*k, ho*wo] for cross-correlation with an
/// odd k×k kernel at the given stride/padding.
#[allow(clippy::too_many_arguments)]
pub fn im2col<S: Scalar>(
    x: &[S],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
) -> Vec<S> {
    let mut cols = vec![S::zero(); c * k * k * ho * wo];
    let span = ho * wo;
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ch * k + ky) * k + kx) * span;
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = (ch * h + iy as usize) * w;
                    let dst = row + oy * wo;
                    for ox in 0..wo {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            cols[dst + ox] = x[src + ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Fold columns back into x-shaped gradients (scatter-add inverse of im2col).
#[allow(clippy::too_many_arguments)]
pub fn col2im<S: Scalar>(
    cols: &[S],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
) -> Vec<S> {
    let mut x = vec![S::zero(); c * h * w];
    let span = ho * wo;
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ch * k + ky) * k + kx) * span;
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = (ch * h + iy as usize) * w;
                    let src = row + oy * wo;
                    for ox in 0..wo {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            x[dst + ix as usize] = x[dst + ix as usize] + cols[src + ox];
                        }
                    }
                }
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mm_variants_agree() {
        // a: 2x3, b: 3x2
        let a = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [7.0f64, 8.0, 9.0, 10.0, 11.0, 12.0];
        let mut c = [0.0f64; 4];
        mm_nn(&a, &b, &mut c, 2, 3, 2);
        assert_eq!(c, [58.0, 64.0, 139.0, 154.0]);

        // a * b == a * (b^T)^T via mm_nt with b stored transposed
        let bt = [7.0f64, 9.0, 11.0, 8.0, 10.0, 12.0]; // 2x3
        let mut c2 = [0.0f64; 4];
        mm_nt(&a, &bt, &mut c2, 2, 3, 2);
        assert_eq!(c, c2);

        // a^T stored as a, i.e. mm_tn with at: 3x2 -> (a^T)^T * b
        let at = [1.0f64, 4.0, 2.0, 5.0, 3.0, 6.0]; // 3x2 = a^T
        let mut c3 = [0.0f64; 4];
        mm_tn(&at, &b, &mut c3, 3, 2, 2);
        assert_eq!(c, c3);
    }

    #[test]
    fn im2col_roundtrip_counts() {
        // 1x3x3 input, k=3, pad=1, stride=1: col2im(ones) counts patch coverage.
        let ones = vec![1.0f64; 9 * 9];
        let x = col2im(&ones, 1, 3, 3, 3, 1, 1, 3, 3);
        // center pixel participates in all 9 positions, corner in 4
        assert_eq!(x[4], 9.0);
        assert_eq!(x[0], 4.0);
    }
}
