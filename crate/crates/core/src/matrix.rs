//! Dense row-major `f64` matrices and the GEMM kernel behind them.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has the wrong length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.cols.max(1))
    }
}

/// Operand orientation for [`gemm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    N,
    T,
}

/// A read-only row-major view: `rows x cols` elements starting at `data[0]`
/// with the given row stride.
#[derive(Clone, Copy)]
pub struct View<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub stride: usize,
}

impl<'a> View<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Self::strided(data, rows, cols, cols)
    }

    /// Panics if `data` is too short for the described layout.
    pub fn strided(data: &'a [f64], rows: usize, cols: usize, stride: usize) -> Self {
        assert!(cols <= stride || rows <= 1);
        assert!(rows == 0 || data.len() >= (rows - 1) * stride + cols, "view out of bounds");
        View {
            data,
            rows,
            cols,
            stride,
        }
    }

    fn dims(&self, op: Op) -> (usize, usize, isize, isize) {
        match op {
            Op::N => (self.rows, self.cols, self.stride as isize, 1),
            Op::T => (self.cols, self.rows, 1, self.stride as isize),
        }
    }
}

impl<'a> From<&'a Matrix> for View<'a> {
    fn from(m: &'a Matrix) -> Self {
        View::new(&m.data, m.rows, m.cols)
    }
}

/// `c = alpha * op(a) * op(b) + beta * c`, with `c` an `m x n` row-major
/// buffer. With `beta == 0` the previous contents of `c` are ignored.
pub fn gemm(alpha: f64, a: View<'_>, op_a: Op, b: View<'_>, op_b: Op, beta: f64, c: &mut [f64]) {
    let (m, k, rsa, csa) = a.dims(op_a);
    let (k2, n, rsb, csb) = b.dims(op_b);
    assert_eq!(k, k2, "inner dimensions differ");
    assert!(c.len() >= m * n, "output buffer too small");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in &mut c[..m * n] {
            *v *= beta;
        }
        return;
    }
    // SAFETY: the views were bounds-checked on construction and `c` covers
    // `m * n`; strides describe exactly those row-major layouts.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c = a * b` (or `c += a * b` when `accumulate`) for short, wide products
/// such as one recurrent step over a minibatch. `a` is `m x k` with row
/// stride `lda`, `b` is `k x n` with row stride `ldb`, `c` is a contiguous
/// `m x n` buffer. Unlike [`gemm`] nothing is packed, which wins when `m` is
/// a handful of rows.
#[allow(clippy::too_many_arguments)]
pub fn gemm_rows(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    accumulate: bool,
    c: &mut [f64],
) {
    assert!(m == 0 || k == 0 || a.len() >= (m - 1) * lda + k, "a out of bounds");
    assert!(k == 0 || n == 0 || b.len() >= (k - 1) * ldb + n, "b out of bounds");
    assert!(c.len() >= m * n, "output buffer too small");
    #[cfg(target_arch = "x86_64")]
    {
        if has_fma() {
            // SAFETY: the CPU supports the enabled target features.
            unsafe { gemm_rows_fma(m, k, n, a, lda, b, ldb, accumulate, c) };
            return;
        }
    }
    gemm_rows_impl::<false>(m, k, n, a, lda, b, ldb, accumulate, c);
}

#[cfg(target_arch = "x86_64")]
fn has_fma() -> bool {
    use std::sync::OnceLock;
    static FMA: OnceLock<bool> = OnceLock::new();
    *FMA.get_or_init(|| is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma"))
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
#[allow(clippy::too_many_arguments)]
unsafe fn gemm_rows_fma(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    accumulate: bool,
    c: &mut [f64],
) {
    gemm_rows_impl::<true>(m, k, n, a, lda, b, ldb, accumulate, c);
}

#[inline(always)]
fn madd<const FMA: bool>(a: f64, b: f64, c: f64) -> f64 {
    if FMA {
        a.mul_add(b, c)
    } else {
        a * b + c
    }
}

const COLS: usize = 8;

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn gemm_rows_impl<const FMA: bool>(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    accumulate: bool,
    c: &mut [f64],
) {
    let mut i0 = 0;
    while i0 < m {
        let rows = (m - i0).min(6);
        let a = &a[i0 * lda..];
        let c = &mut c[i0 * n..(i0 + rows) * n];
        match rows {
            1 => row_block::<FMA, 1>(k, n, a, lda, b, ldb, accumulate, c),
            2 => row_block::<FMA, 2>(k, n, a, lda, b, ldb, accumulate, c),
            3 => row_block::<FMA, 3>(k, n, a, lda, b, ldb, accumulate, c),
            4 => row_block::<FMA, 4>(k, n, a, lda, b, ldb, accumulate, c),
            5 => row_block::<FMA, 5>(k, n, a, lda, b, ldb, accumulate, c),
            _ => row_block::<FMA, 6>(k, n, a, lda, b, ldb, accumulate, c),
        }
        i0 += rows;
    }
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn row_block<const FMA: bool, const R: usize>(
    k: usize,
    n: usize,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    accumulate: bool,
    c: &mut [f64],
) {
    let full = n / COLS * COLS;
    let mut j0 = 0;
    while j0 < full {
        let mut acc = [[0.0f64; COLS]; R];
        for p in 0..k {
            let bv: &[f64; COLS] = b[p * ldb + j0..p * ldb + j0 + COLS].try_into().unwrap();
            for (r, acc_r) in acc.iter_mut().enumerate() {
                let av = a[r * lda + p];
                for jj in 0..COLS {
                    acc_r[jj] = madd::<FMA>(av, bv[jj], acc_r[jj]);
                }
            }
        }
        for (r, acc_r) in acc.iter().enumerate() {
            let dst = &mut c[r * n + j0..r * n + j0 + COLS];
            for (d, v) in dst.iter_mut().zip(acc_r) {
                *d = if accumulate { *d + v } else { *v };
            }
        }
        j0 += COLS;
    }
    for j in full..n {
        for r in 0..R {
            let mut s = 0.0;
            for p in 0..k {
                s = madd::<FMA>(a[r * lda + p], b[p * ldb + j], s);
            }
            let d = &mut c[r * n + j];
            *d = if accumulate { *d + s } else { s };
        }
    }
}
