//! Banded symmetric positive definite storage and Cholesky factorization.
//!
//! Only the lower band is stored, row by row, with columns increasing so the
//! inner products of the factorization run over contiguous slices.

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + self.bw + j - i
    }

    /// Entry `(i, j)` of the symmetric matrix; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.pos(i, j)]
        }
    }

    /// Adds `v` to the symmetric pair `(i, j)`, `(j, i)`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        let k = self.pos(i, j);
        self.data[k] += v;
    }

    pub fn add_diagonal(&mut self, diag: &[f64]) {
        for (i, d) in diag.iter().enumerate() {
            let k = self.pos(i, i);
            self.data[k] += d;
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.data[self.pos(i, j)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
    }

    /// In-place Cholesky `A = L L^T`; `None` when `A` is not positive definite.
    pub fn cholesky(mut self) -> Option<BandCholesky> {
        let (n, bw) = (self.n, self.bw);
        let stride = bw + 1;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                // Columns below `lo` are outside row i's band.
                let row_i = i * stride + bw - i;
                let row_j = j * stride + bw - j;
                let start = lo.max(j.saturating_sub(bw));
                let mut sum = self.data[row_i + j];
                let (a, b) = (
                    &self.data[row_i + start..row_i + j],
                    &self.data[row_j + start..row_j + j],
                );
                sum -= a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
                if j == i {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return None;
                    }
                    self.data[row_i + i] = sum.sqrt();
                } else {
                    self.data[row_i + j] = sum / self.data[row_j + j];
                }
            }
        }
        Some(BandCholesky { n, bw, data: self.data })
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`, overwriting `b` with `x`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let stride = bw + 1;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = i * stride + bw - i;
            let s: f64 = self.data[row + lo..row + i]
                .iter()
                .zip(&b[lo..i])
                .map(|(l, x)| l * x)
                .sum();
            b[i] = (b[i] - s) / self.data[row + i];
        }
        for i in (0..n).rev() {
            let row = i * stride + bw - i;
            b[i] /= self.data[row + i];
            let xi = b[i];
            let lo = i.saturating_sub(bw);
            for (bj, l) in b[lo..i].iter_mut().zip(&self.data[row + lo..row + i]) {
                *bj -= l * xi;
            }
        }
    }

    /// `log det A`.
    pub fn log_det(&self) -> f64 {
        let stride = self.bw + 1;
        (0..self.n).map(|i| 2.0 * self.data[i * stride + self.bw].ln()).sum()
    }
}
