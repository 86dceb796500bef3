//! Bounds-checked strided matrix product, `C += A * B`.

/// Strided view description: offset into the backing slice plus row and
/// column strides.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Layout {
    pub offset: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

impl Layout {
    pub fn new(offset: usize, row_stride: usize, col_stride: usize) -> Self {
        Self { offset, row_stride, col_stride }
    }

    fn last_index(&self, rows: usize, cols: usize) -> usize {
        self.offset + (rows - 1) * self.row_stride + (cols - 1) * self.col_stride
    }
}

/// `c[m x n] += a[m x k] * b[k x n]`, accumulating in f64.
pub(crate) fn gemm_acc(
    (m, k, n): (usize, usize, usize),
    a: &[f64],
    la: Layout,
    b: &[f64],
    lb: Layout,
    c: &mut [f64],
    lc: Layout,
) {
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    assert!(la.last_index(m, k) < a.len(), "gemm: A out of bounds");
    assert!(lb.last_index(k, n) < b.len(), "gemm: B out of bounds");
    assert!(lc.last_index(m, n) < c.len(), "gemm: C out of bounds");
    // SAFETY: every element addressed by the three layouts lies inside its
    // slice (checked above), and `c` is a unique borrow disjoint from `a`, `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr().add(la.offset),
            la.row_stride as isize,
            la.col_stride as isize,
            b.as_ptr().add(lb.offset),
            lb.row_stride as isize,
            lb.col_stride as isize,
            1.0,
            c.as_mut_ptr().add(lc.offset),
            lc.row_stride as isize,
            lc.col_stride as isize,
        );
    }
}
