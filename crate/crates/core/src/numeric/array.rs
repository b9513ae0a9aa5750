use crate::error::{ImrlError, Result};

/// Row-major array of `f64` with an explicit shape.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseArray {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseArray {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        DenseArray {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(ImrlError::Shape(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(DenseArray {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn zeros_like(&self) -> Self {
        DenseArray::zeros(&self.shape)
    }

    /// Element at a 2-D index `(row, col)`.
    pub fn at2(&self, row: usize, col: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[row * self.shape[1] + col]
    }
}

/// `out[m×n] = beta·out + a[m×k] · b`, where `b` is `k×n` when `b_transposed`
/// is false and `n×k` otherwise. All operands are row-major.
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_transposed: bool,
    b: &[f64],
    b_transposed: bool,
    beta: f64,
    out: &mut [f64],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(out.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_transposed { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_transposed { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above guarantee every index the strides reach is in
    // bounds for `a`, `b` and `out`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(DenseArray::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(matches!(
            DenseArray::from_vec(&[2, 3], vec![0.0; 5]),
            Err(ImrlError::Shape(_))
        ));
    }

    #[test]
    fn gemm_matches_naive_in_all_layouts() {
        let (m, k, n) = (3, 4, 2);
        let a: Vec<f64> = (0..m * k).map(|i| i as f64 * 0.5 - 1.0).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64).sin()).collect();
        let at = |i: usize, j: usize| a[i * k + j];
        let bt = |i: usize, j: usize| b[i * n + j];
        let mut want = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                want[i * n + j] = (0..k).map(|p| at(i, p) * bt(p, j)).sum();
            }
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &a, false, &b, false, 0.0, &mut out);
        for (x, y) in out.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }

        // Same product with both operands stored transposed.
        let mut a_t = vec![0.0; m * k];
        for i in 0..m {
            for j in 0..k {
                a_t[j * m + i] = at(i, j);
            }
        }
        let mut b_t = vec![0.0; k * n];
        for i in 0..k {
            for j in 0..n {
                b_t[j * k + i] = bt(i, j);
            }
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &a_t, true, &b_t, true, 0.0, &mut out);
        for (x, y) in out.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
