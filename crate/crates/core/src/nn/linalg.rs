//! Thin row-major wrappers over `matrixmultiply::dgemm`.

/// `c = a · b` (+ `c` when `accumulate`), with `a` of shape `m×k` and `b` of
/// shape `k×n`. Transposed operands are expressed through strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    c: &mut [f64],
    accumulate: bool,
) {
    debug_assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c[..m * n].iter_mut().for_each(|v| *v = 0.0);
        }
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: slice lengths cover every index addressed by the given
    // dimensions and strides; callers pass strides derived from the shapes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
/// Row-major `m×k` times row-major `k×n`.
pub(crate) fn matmul(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    let mut c = vec![0.0; m * n];
    gemm(m, k, n, a, (k as isize, 1), b, (n as isize, 1), &mut c, false);
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_product() {
        // [1 2; 3 4] · [5; 6] = [17; 39]
        let c = matmul(2, 2, 1, &[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0]);
        assert_eq!(c, vec![17.0, 39.0]);
    }

    #[test]
    fn transposed_operand_via_strides() {
        // aᵀ·b with a = [1 2; 3 4] (row-major), b = I
        let a = [1.0, 2.0, 3.0, 4.0];
        let mut c = vec![0.0; 4];
        gemm(2, 2, 2, &a, (1, 2), &[1.0, 0.0, 0.0, 1.0], (2, 1), &mut c, false);
        assert_eq!(c, vec![1.0, 3.0, 2.0, 4.0]);
    }
}
