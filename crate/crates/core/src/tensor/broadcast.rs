//! Shape broadcasting: right-aligned, a dimension matches if equal or one of
//! them is 1. Gradients flowing back through a broadcast are sum-reduced over
//! the expanded dimensions.

use super::Grads;
use crate::scalar::Scalar;

/// Broadcast shape of `a` and `b`, or `None` if incompatible.
pub fn broadcast_shapes(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0usize; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let db = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        if da == db {
            out[i] = da;
        } else if da == 1 {
            out[i] = db;
        } else if db == 1 {
            out[i] = da;
        } else {
            return None;
        }
    }
    Some(out)
}

/// Element strides for reading `shape` as if it had `out_shape`, with stride 0
/// on broadcast dimensions (right-aligned).
pub fn bcast_strides(shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let rank = out_shape.len();
    let offset = rank - shape.len();
    let mut strides = vec![0usize; rank];
    let mut s = 1usize;
    for i in (0..shape.len()).rev() {
        strides[offset + i] = if shape[i] == 1 { 0 } else { s };
        s *= shape[i];
    }
    strides
}

/// Apply `f(a_i, b_i)` over the broadcast iteration space.
pub fn zip_broadcast<S: Scalar>(
    a: &[S],
    a_shape: &[usize],
    b: &[S],
    b_shape: &[usize],
    out_shape: &[usize],
    mut f: impl FnMut(S, S) -> S,
) -> Vec<S> {
    let n: usize = out_shape.iter().product();
    if a_shape == out_shape && b_shape == out_shape {
        return a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect();
    }
    let sa = bcast_strides(a_shape, out_shape);
    let sb = bcast_strides(b_shape, out_shape);
    let rank = out_shape.len();
    let mut idx = vec![0usize; rank];
    let mut ia = 0usize;
    let mut ib = 0usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(f(a[ia], b[ib]));
        // odometer increment
        for d in (0..rank).rev() {
            idx[d] += 1;
            ia += sa[d];
            ib += sb[d];
            if idx[d] < out_shape[d] {
                break;
            }
            idx[d] = 0;
            ia -= sa[d] * out_shape[d];
            ib -= sb[d] * out_shape[d];
        }
    }
    out
}

/// Accumulate `grad` (laid out as `out_shape`) into node `id`, sum-reducing
/// over the dimensions where `in_shape` was broadcast.
pub fn acc_reduced<S: Scalar>(
    grads: &mut Grads<S>,
    id: usize,
    grad: &[S],
    out_shape: &[usize],
    in_shape: &[usize],
) {
    if in_shape == out_shape {
        grads.acc(id, grad);
        return;
    }
    let n_in: usize = in_shape.iter().product();
    let mut reduced = vec![S::zero(); n_in];
    let si = bcast_strides(in_shape, out_shape);
    let rank = out_shape.len();
    let mut idx = vec![0usize; rank];
    let mut ii = 0usize;
    for &g in grad {
        reduced[ii] = reduced[ii] + g;
        for d in (0..rank).rev() {
            idx[d] += 1;
            ii += si[d];
            if idx[d] < out_shape[d] {
                break;
            }
            idx[d] = 0;
            ii -= si[d] * out_shape[d];
        }
    }
    grads.acc_owned(id, reduced);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_right_aligned() {
        assert_eq!(broadcast_shapes(&[4, 3], &[3]), Some(vec![4, 3]));
        assert_eq!(broadcast_shapes(&[8, 1, 1], &[8, 4, 4]), Some(vec![8, 4, 4]));
        assert_eq!(broadcast_shapes(&[2, 3], &[2, 3]), Some(vec![2, 3]));
        assert_eq!(broadcast_shapes(&[1], &[5]), Some(vec![5]));
        assert_eq!(broadcast_shapes(&[2, 3], &[4]), None);
    }

    #[test]
    fn zip_with_channel_broadcast() {
        // [2,1] + [2,3]
        let a = [10.0f64, 20.0];
        let b = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let out = zip_broadcast(&a, &[2, 1], &b, &[2, 3], &[2, 3], |x, y| x + y);
        assert_eq!(out, vec![11.0, 12.0, 13.0, 24.0, 25.0, 26.0]);
    }
}
