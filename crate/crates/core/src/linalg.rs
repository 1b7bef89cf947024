//! Small dense symmetric positive-definite kernels used by the graph layer.

/// Row-major square matrix.
#[derive(Clone, Debug)]
pub(crate) struct DenseMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
#[derive(Clone, Debug)]
pub(crate) struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    /// Factorizes `a`. Returns `None` when a pivot is not positive or falls
    /// below `rel_tol` times the largest diagonal entry.
    pub fn new(a: &DenseMatrix, rel_tol: f64) -> Option<Self> {
        let n = a.n;
        let max_diag = (0..n).map(|i| a.get(i, i)).fold(0.0_f64, f64::max);
        let mut l = DenseMatrix::zeros(n);
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                let v = l.get(j, k);
                d -= v * v;
            }
            if !(d > rel_tol * max_diag) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l.data[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.data[i * n + j] = s / d;
            }
        }
        Some(Self { l })
    }

    pub fn log_det(&self) -> f64 {
        (0..self.l.n).map(|i| self.l.get(i, i).ln()).sum::<f64>() * 2.0
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l.get(i, k) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l.get(k, i) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        y
    }

    pub fn inverse(&self) -> DenseMatrix {
        let n = self.l.n;
        let mut inv = DenseMatrix::zeros(n);
        let mut e = vec![0.0; n];
        for c in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[c] = 1.0;
            let col = self.solve(&e);
            for (r, v) in col.into_iter().enumerate() {
                inv.data[r * n + c] = v;
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_and_solve_2x2() {
        let a = DenseMatrix { n: 2, data: vec![4.0, 2.0, 2.0, 3.0] };
        let c = Cholesky::new(&a, 1e-14).unwrap();
        assert!((c.log_det() - 8.0_f64.ln()).abs() < 1e-14);
        let x = c.solve(&[2.0, 1.0]);
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-14);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_singular() {
        let a = DenseMatrix { n: 2, data: vec![1.0, 1.0, 1.0, 1.0] };
        assert!(Cholesky::new(&a, 1e-14).is_none());
    }
}
