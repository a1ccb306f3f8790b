//! Screened Poisson solves `(-Delta_h - mu) u = b` with the 7-point
//! Laplacian and zero Dirichlet ghosts.
//!
//! The 1D second difference with Dirichlet ends is diagonalized by the type-I
//! sine transform, which acts on Tucker factors one mode at a time. The
//! division by `eta_i + eta_j + eta_k - mu` is the only non-separable step
//! and is done by cross approximation.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::cross::{cross_approximate, CrossError, CrossOptions, CrossReport, ElementOracle};
use crate::grid::Grid;
use crate::linalg::maxvol;
use crate::tucker::{Indices, TuckerTensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoissonError {
    #[error("indefinite operator: shift {mu} is not below the smallest eigenvalue {min_eigenvalue}")]
    Indefinite { mu: f64, min_eigenvalue: f64 },
    #[error("division step failed: {0}")]
    Cross(#[from] CrossError),
}

/// Eigenvalues `(2/h^2)(1 - cos(pi m / (n+1)))`, `m = 1..n`, of the 1D
/// Dirichlet second difference (negated).
pub fn dirichlet_eigenvalues(n: usize, h: f64) -> Vec<f64> {
    (1..=n).map(|m| 2.0 / (h * h) * (1.0 - (PI * m as f64 / (n + 1) as f64).cos())).collect()
}

/// Orthonormal type-I sine transform of every column,
/// `X_m = sqrt(2/(n+1)) sum_k x_k sin(pi k m / (n+1))`. It is its own inverse.
pub fn sine_transform(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, r) = a.shape();
    let len = 2 * (n + 1);
    let fft = FftPlanner::new().plan_fft_forward(len);
    let scale = (2.0 / (n + 1) as f64).sqrt();
    let mut out = DMatrix::zeros(n, r);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let mut c = 0;
    while c < r {
        // odd extension; a second column rides in the imaginary part
        let pair = c + 1 < r;
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for k in 0..n {
            let x = a[(k, c)];
            let y = if pair { a[(k, c + 1)] } else { 0.0 };
            buf[k + 1] = Complex64::new(x, y);
            buf[len - 1 - k] = Complex64::new(-x, -y);
        }
        fft.process(&mut buf);
        // FFT of an odd real sequence is -2i S, so the packed pair gives
        // -2i S1 + 2 S2
        for m in 0..n {
            let v = buf[m + 1];
            out[(m, c)] = -0.5 * v.im * scale;
            if pair {
                out[(m, c + 1)] = 0.5 * v.re * scale;
            }
        }
        c += if pair { 2 } else { 1 };
    }
    out
}

/// 1D second difference with zero ghosts, applied to every column.
pub fn second_difference(a: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let (n, r) = a.shape();
    let inv = 1.0 / (h * h);
    DMatrix::from_fn(n, r, |i, c| {
        let left = if i > 0 { a[(i - 1, c)] } else { 0.0 };
        let right = if i + 1 < n { a[(i + 1, c)] } else { 0.0 };
        (left - 2.0 * a[(i, c)] + right) * inv
    })
}

/// `Delta_h u`, exact in Tucker format (ranks triple; round afterwards).
pub fn apply_laplacian(grid: Grid, u: &TuckerTensor) -> TuckerTensor {
    assert_eq!(u.n(), grid.n(), "tensor and grid disagree");
    let h = grid.step();
    let parts: Vec<TuckerTensor> = (0..3).map(|m| u.map_factor(m, |f| second_difference(f, h))).collect();
    TuckerTensor::linear_combination(&[(1.0, &parts[0]), (1.0, &parts[1]), (1.0, &parts[2])])
}

#[derive(Clone, Debug)]
pub struct ShiftedLaplacian {
    grid: Grid,
    mu: f64,
    eta: Vec<f64>,
}

struct DividedOracle<'a> {
    rhs: &'a TuckerTensor,
    eta: &'a [f64],
    mu: f64,
}

impl ElementOracle for DividedOracle<'_> {
    fn size(&self) -> usize {
        self.rhs.n()
    }

    fn eval_block(&self, idx: [Indices<'_>; 3], out: &mut [f64]) {
        let n = self.rhs.n();
        let block = self.rhs.eval_block(idx);
        let l = [idx[0].len(n), idx[1].len(n), idx[2].len(n)];
        let e: Vec<Vec<f64>> = (0..3).map(|m| (0..l[m]).map(|p| self.eta[idx[m].get(p)]).collect()).collect();
        let mut p = 0;
        for c in 0..l[2] {
            for b in 0..l[1] {
                let base = e[1][b] + e[2][c] - self.mu;
                for a in 0..l[0] {
                    out[p] = block[p] / (e[0][a] + base);
                    p += 1;
                }
            }
        }
    }

    fn pivot_hints(&self, mode: usize) -> Option<Vec<usize>> {
        Some(maxvol(&self.rhs.factor(mode).clone().qr().q()))
    }
}

impl ShiftedLaplacian {
    /// `-Delta_h - mu`; fails unless the operator is positive definite.
    pub fn new(grid: Grid, mu: f64) -> Result<Self, PoissonError> {
        let eta = dirichlet_eigenvalues(grid.n(), grid.step());
        let min_eigenvalue = 3.0 * eta[0];
        if !(mu < min_eigenvalue) {
            return Err(PoissonError::Indefinite { mu, min_eigenvalue });
        }
        Ok(Self { grid, mu, eta })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn shift(&self) -> f64 {
        self.mu
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eta
    }

    /// Solves to relative accuracy `eps`; the division step gets `eps/3`.
    pub fn solve(&self, rhs: &TuckerTensor, eps: f64) -> Result<TuckerTensor, PoissonError> {
        self.solve_with_report(rhs, eps, 0x9e37).map(|(u, _)| u)
    }

    pub fn solve_with_report(
        &self,
        rhs: &TuckerTensor,
        eps: f64,
        seed: u64,
    ) -> Result<(TuckerTensor, CrossReport), PoissonError> {
        assert_eq!(rhs.n(), self.grid.n(), "right-hand side and operator grids disagree");
        if rhs.norm() == 0.0 {
            return Ok((TuckerTensor::zeros(rhs.n()), CrossReport { converged: true, ..Default::default() }));
        }
        let spectral = rhs.round(eps / 3.0).map_factors(sine_transform);
        let oracle = DividedOracle { rhs: &spectral, eta: &self.eta, mu: self.mu };
        let opts = CrossOptions::new(eps / 3.0).with_seed(seed);
        let (u_hat, report) = cross_approximate(&oracle, &opts)?;
        Ok((u_hat.map_factors(sine_transform), report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_transform_is_an_involution_and_matches_the_sum() {
        let n = 9;
        let a = DMatrix::from_fn(n, 3, |i, j| ((i * 3 + j * 7) % 5) as f64 - 1.5);
        let t = sine_transform(&a);
        for m in 0..n {
            let direct: f64 = (0..n)
                .map(|k| a[(k, 2)] * (PI * ((k + 1) * (m + 1)) as f64 / (n + 1) as f64).sin())
                .sum::<f64>()
                * (2.0 / (n + 1) as f64).sqrt();
            assert!((t[(m, 2)] - direct).abs() < 1e-13);
        }
        assert!((sine_transform(&t) - a).amax() < 1e-13);
    }

    #[test]
    fn sine_modes_are_eigenvectors_of_the_second_difference() {
        let n = 12;
        let h = 0.4;
        let eta = dirichlet_eigenvalues(n, h);
        for m in [1usize, 5, 12] {
            let v = DMatrix::from_fn(n, 1, |k, _| (PI * ((k + 1) * m) as f64 / (n + 1) as f64).sin());
            let d = second_difference(&v, h);
            assert!((d + &v * eta[m - 1]).amax() < 1e-11);
        }
    }

    #[test]
    fn laplacian_matches_dense_stencil() {
        let grid = Grid::new(2.0, 10);
        let g: Vec<f64> = grid.centers().iter().map(|x| (-x * x).exp() + 0.1 * x).collect();
        let s: Vec<f64> = grid.centers().iter().map(|x| x.sin()).collect();
        let u = TuckerTensor::rank_one(&g, &s, &g).add(&TuckerTensor::rank_one(&s, &g, &g));
        let lap = apply_laplacian(grid, &u).to_dense();
        let dense = u.to_dense().laplacian(grid.step());
        assert!(lap.rel_error(&dense) < 1e-13);
    }

    #[test]
    fn solve_inverts_the_stencil() {
        let grid = Grid::new(3.0, 14);
        let g: Vec<f64> = grid.centers().iter().map(|x| (-x * x).exp()).collect();
        let rhs = TuckerTensor::rank_one(&g, &g, &g);
        let op = ShiftedLaplacian::new(grid, -1.3).unwrap();
        let u = op.solve(&rhs, 1e-10).unwrap();
        let dense = rhs.to_dense().solve_shifted_poisson(grid.step(), -1.3).unwrap();
        assert!(u.to_dense().rel_error(&dense) < 1e-9);
    }

    #[test]
    fn indefinite_shift_is_rejected() {
        let grid = Grid::new(1.0, 8);
        let eta = dirichlet_eigenvalues(8, grid.step());
        assert!(matches!(ShiftedLaplacian::new(grid, 3.0 * eta[0] + 1e-9), Err(PoissonError::Indefinite { .. })));
        assert!(ShiftedLaplacian::new(grid, 3.0 * eta[0] - 1e-6).is_ok());
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let op = ShiftedLaplacian::new(Grid::new(1.0, 8), 0.0).unwrap();
        assert_eq!(op.solve(&TuckerTensor::zeros(8), 1e-8).unwrap().norm(), 0.0);
    }
}
