//! Dense `n^3` arrays and brute-force twins of the low-rank operations.
//!
//! Everything here materializes full arrays, so it is restricted to small
//! grids (`n <= DENSE_LIMIT`). The test suites use these as independent
//! oracles for the Tucker-format code paths.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Largest mode size the dense twins accept.
pub const DENSE_LIMIT: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    n: usize,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n] }
    }

    /// Builds `a[i,j,k] = f(i,j,k)`; storage is column-major (`i` fastest).
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { n, data }
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n * n, "dense data length must be n^3");
        Self { n, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&a| f(a)).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|a| c * a)
    }

    /// Relative Frobenius distance `||self - reference|| / ||reference||`.
    pub fn rel_error(&self, reference: &Self) -> f64 {
        let r = reference.norm();
        let d = self.sub(reference).norm();
        if r == 0.0 {
            d
        } else {
            d / r
        }
    }

    /// Seven-point Laplacian `Delta_h` with zero Dirichlet ghosts.
    pub fn laplacian(&self, h: f64) -> Self {
        assert!(self.n <= DENSE_LIMIT);
        let n = self.n;
        let at = |i: isize, j: isize, k: isize| -> f64 {
            if i < 0 || j < 0 || k < 0 || i >= n as isize || j >= n as isize || k >= n as isize {
                0.0
            } else {
                self.get(i as usize, j as usize, k as usize)
            }
        };
        let inv = 1.0 / (h * h);
        Self::from_fn(n, |i, j, k| {
            let (i, j, k) = (i as isize, j as isize, k as isize);
            let c = at(i, j, k);
            (at(i + 1, j, k) + at(i - 1, j, k) + at(i, j + 1, k) + at(i, j - 1, k) + at(i, j, k + 1)
                + at(i, j, k - 1)
                - 6.0 * c)
                * inv
        })
    }

    /// Discrete convolution `w_i = sum_j f_j q_{i-j}` restricted to the `n^3`
    /// output block, evaluated by zero-padded 3D FFT.
    ///
    /// `q(d0, d1, d2)` is queried for offsets in `-(n-1)..=(n-1)`.
    pub fn convolve(&self, q: impl Fn(isize, isize, isize) -> f64) -> Self {
        assert!(self.n <= DENSE_LIMIT);
        let n = self.n;
        let p = 3 * n - 2;
        let mut fbuf = vec![Complex64::new(0.0, 0.0); p * p * p];
        let mut kbuf = vec![Complex64::new(0.0, 0.0); p * p * p];
        let idx = |a: usize, b: usize, c: usize| a + p * (b + p * c);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    fbuf[idx(i, j, k)].re = self.get(i, j, k);
                }
            }
        }
        let m = 2 * n - 1;
        let off = (n - 1) as isize;
        for c in 0..m {
            for b in 0..m {
                for a in 0..m {
                    kbuf[idx(a, b, c)].re = q(a as isize - off, b as isize - off, c as isize - off);
                }
            }
        }
        fft3(&mut fbuf, p, false);
        fft3(&mut kbuf, p, false);
        for (x, y) in fbuf.iter_mut().zip(&kbuf) {
            *x *= y;
        }
        fft3(&mut fbuf, p, true);
        let scale = 1.0 / (p * p * p) as f64;
        Self::from_fn(n, |i, j, k| fbuf[idx(i + n - 1, j + n - 1, k + n - 1)].re * scale)
    }

    /// Solves `(-Delta_h - mu) u = self` with zero Dirichlet ghosts by banded
    /// Cholesky on the natural ordering (bandwidth `n^2`).
    pub fn solve_shifted_poisson(&self, h: f64, mu: f64) -> Option<Self> {
        assert!(self.n <= DENSE_LIMIT);
        let n = self.n;
        let size = n * n * n;
        let bw = n * n;
        // band[d][row] holds A[row, row - d]
        let mut band = vec![vec![0.0; size]; bw + 1];
        let inv = 1.0 / (h * h);
        for row in 0..size {
            band[0][row] = 6.0 * inv - mu;
            let i = row % n;
            let j = (row / n) % n;
            if i > 0 {
                band[1][row] = -inv;
            }
            if j > 0 {
                band[n][row] = -inv;
            }
            if row >= bw {
                band[bw][row] = -inv;
            }
        }
        // in-place banded Cholesky: L stored in band with the same indexing
        for row in 0..size {
            let lo = row.saturating_sub(bw);
            for col in lo..row {
                let d = row - col;
                let mut s = band[d][row];
                let lo2 = row.saturating_sub(bw).max(col.saturating_sub(bw));
                for t in lo2..col {
                    s -= band[row - t][row] * band[col - t][col];
                }
                band[d][row] = s / band[0][col];
            }
            let mut s = band[0][row];
            for t in lo..row {
                let l = band[row - t][row];
                s -= l * l;
            }
            if s <= 0.0 {
                return None;
            }
            band[0][row] = s.sqrt();
        }
        let mut y = self.data.clone();
        for row in 0..size {
            let lo = row.saturating_sub(bw);
            let mut s = y[row];
            for t in lo..row {
                s -= band[row - t][row] * y[t];
            }
            y[row] = s / band[0][row];
        }
        for row in (0..size).rev() {
            let hi = (row + bw).min(size - 1);
            let mut s = y[row];
            for t in row + 1..=hi {
                s -= band[t - row][t] * y[t];
            }
            y[row] = s / band[0][row];
        }
        Some(Self { n, data: y })
    }
}

/// In-place 3D FFT of a `p^3` column-major complex array.
pub fn fft3(buf: &mut [Complex64], p: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(p) } else { planner.plan_fft_forward(p) };
    for line in buf.chunks_mut(p) {
        fft.process(line);
    }
    let mut tmp = vec![Complex64::new(0.0, 0.0); p];
    for c in 0..p {
        for a in 0..p {
            for b in 0..p {
                tmp[b] = buf[a + p * (b + p * c)];
            }
            fft.process(&mut tmp);
            for b in 0..p {
                buf[a + p * (b + p * c)] = tmp[b];
            }
        }
    }
    for b in 0..p {
        for a in 0..p {
            for c in 0..p {
                tmp[c] = buf[a + p * (b + p * c)];
            }
            fft.process(&mut tmp);
            for c in 0..p {
                buf[a + p * (b + p * c)] = tmp[c];
            }
        }
    }
}
