//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tuckerscf_core::convolution::NewtonKernel;
use tuckerscf_core::cross::{cross_approximate, CrossOptions, FnOracle};
use tuckerscf_core::dense::DenseTensor;
use tuckerscf_core::expsum::gauss_legendre;
use tuckerscf_core::poisson::ShiftedLaplacian;
use tuckerscf_core::{Grid, Method, Molecule, ScfOptions, ScfProblem, TuckerTensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Tucker tensor with uniform random core and factors in `[-1, 1]`.
pub fn random_tucker(n: usize, ranks: [usize; 3], rng: &mut ChaCha8Rng) -> TuckerTensor {
    let core: Vec<f64> = (0..ranks.iter().product::<usize>()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let factors = ranks.map(|r| DMatrix::from_fn(n, r, |_, _| rng.gen_range(-1.0..1.0)));
    TuckerTensor::new(core, factors)
}

/// Smooth, decaying function on the grid: a few shifted Gaussians with
/// polynomial modulation, built as a sum of rank-one terms.
pub fn smooth_function(grid: Grid, terms: usize, rng: &mut ChaCha8Rng) -> TuckerTensor {
    let l = grid.half_width();
    let x = grid.centers();
    let mut acc: Option<TuckerTensor> = None;
    for _ in 0..terms {
        let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-l / 4.0..l / 4.0)).collect();
        let a = rng.gen_range(0.6..2.0);
        let slope: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let weight = rng.gen_range(0.5..1.5);
        let f: Vec<Vec<f64>> = (0..3)
            .map(|m| x.iter().map(|&t| (1.0 + slope[m] * (t - c[m])) * (-a * (t - c[m]).powi(2)).exp()).collect())
            .collect();
        let term = TuckerTensor::rank_one(&f[0], &f[1], &f[2]).scale(weight);
        acc = Some(match acc {
            Some(s) => s.add(&term),
            None => term,
        });
    }
    acc.expect("at least one term").round(1e-14)
}

/// `h^3`-weighted Gram matrix from dense values.
pub fn dense_gram(grid: Grid, xs: &[DenseTensor]) -> DMatrix<f64> {
    let h3 = grid.cell_volume();
    DMatrix::from_fn(xs.len(), xs.len(), |i, j| h3 * xs[i].dot(&xs[j]))
}

/// `F_ij = h^3 <phi_i, (-Delta_h / 2) phi_j> + h^3 <phi_i, w_j>` with the
/// explicit 7-point Laplacian on dense arrays.
pub fn dense_fock(grid: Grid, phi: &[TuckerTensor], w: &[TuckerTensor]) -> DMatrix<f64> {
    let h3 = grid.cell_volume();
    let d: Vec<DenseTensor> = phi.iter().map(|p| p.to_dense()).collect();
    let lap: Vec<DenseTensor> = d.iter().map(|p| p.laplacian(grid.step())).collect();
    let wd: Vec<DenseTensor> = w.iter().map(|x| x.to_dense()).collect();
    DMatrix::from_fn(phi.len(), phi.len(), |i, j| h3 * (-0.5 * d[i].dot(&lap[j]) + d[i].dot(&wd[j])))
}

/// `int_{cell 0} int_{cell d} dr dr' / |r - r'|` for well-separated cells by
/// `m`-point Gauss-Legendre in each of the six coordinates.
pub fn gauss_pair_integral(d: [f64; 3], h: f64, m: usize) -> f64 {
    let (x, w) = gauss_legendre(m);
    let pts: Vec<(f64, f64)> = x.iter().zip(&w).map(|(x, w)| (0.5 * h * (x + 1.0), 0.5 * h * w)).collect();
    let mut total = 0.0;
    for &(x1, w1) in &pts {
        for &(y1, v1) in &pts {
            for &(z1, u1) in &pts {
                for &(x2, w2) in &pts {
                    for &(y2, v2) in &pts {
                        for &(z2, u2) in &pts {
                            let r = ((d[0] * h + x2 - x1).powi(2) + (d[1] * h + y2 - y1).powi(2) + (d[2] * h + z2 - z1).powi(2))
                                .sqrt();
                            total += w1 * v1 * u1 * w2 * v2 * u2 / r;
                        }
                    }
                }
            }
        }
    }
    total
}

/// Largest entry of `|a - b|` relative to `max |b|`.
pub fn max_rel(a: &DenseTensor, b: &DenseTensor) -> f64 {
    a.sub(b).max_abs() / b.max_abs()
}

/// Tucker tensor of `f` on the cell centres by cross approximation.
pub fn sample(grid: Grid, eps: f64, f: impl Fn(f64, f64, f64) -> f64) -> TuckerTensor {
    let x = grid.centers();
    let oracle = FnOracle::new(grid.n(), |i, j, k| f(x[i], x[j], x[k]));
    cross_approximate(&oracle, &CrossOptions::new(eps)).expect("finite samples").0
}

/// One random convolution case: `(n, eps, relative error)` of
/// `NewtonKernel::conv` against the dense zero-padded FFT of the same
/// kernel entries.
pub fn convolution_cases(count: usize, seed: u64) -> Vec<(usize, f64, f64)> {
    let mut rng = rng(seed);
    let mut kernels: Vec<((usize, u64), NewtonKernel)> = Vec::new();
    (0..count)
        .map(|_| {
            let n = [8usize, 12, 16, 24, 32][rng.gen_range(0..5)];
            let eps: f64 = [1e-6, 1e-8, 1e-10][rng.gen_range(0..3)];
            let ranks = [rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..5)];
            let f = random_tucker(n, ranks, &mut rng);
            let key = (n, eps.to_bits());
            let k = match kernels.iter().position(|(k, _)| *k == key) {
                Some(p) => &kernels[p].1,
                None => {
                    kernels.push((key, NewtonKernel::build(Grid::new(1.0 + rng.gen_range(0.0..4.0), n), eps)));
                    &kernels.last().expect("just pushed").1
                }
            };
            let w = k.conv(&f, eps).to_dense();
            let exact = f.to_dense().convolve(|a, b, c| k.entry([a, b, c]));
            (n, eps, w.rel_error(&exact))
        })
        .collect()
}

/// Worst relative error of the sine-transform Poisson solve on discrete
/// eigenfunctions `sin(pi p (i+1)/(n+1)) ...` against `rhs / (eta_p + eta_q + eta_s - mu)`.
pub fn poisson_eigenfunction_error(n: usize, half_width: f64, mu: f64, modes: &[[usize; 3]]) -> f64 {
    let grid = Grid::new(half_width, n);
    let op = ShiftedLaplacian::new(grid, mu).expect("definite");
    let eta = op.eigenvalues().to_vec();
    let s = |p: usize| -> Vec<f64> {
        (0..n).map(|i| (std::f64::consts::PI * (p * (i + 1)) as f64 / (n + 1) as f64).sin()).collect()
    };
    modes
        .iter()
        .map(|&[p, q, r]| {
            let rhs = TuckerTensor::rank_one(&s(p), &s(q), &s(r));
            let u = op.solve(&rhs, 1e-13).expect("solve");
            let exact = rhs.scale(1.0 / (eta[p - 1] + eta[q - 1] + eta[r - 1] - mu));
            u.sub(&exact).norm() / exact.norm()
        })
        .fold(0.0, f64::max)
}

/// Worst relative error of the Poisson solve on random low-rank inputs
/// against the dense banded Cholesky solve at size `n`.
pub fn poisson_dense_error(n: usize, cases: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let grid = Grid::new(rng.gen_range(1.0..5.0), n);
        let eta_min = 3.0 * ShiftedLaplacian::new(grid, 0.0).expect("definite").eigenvalues()[0];
        let mu = rng.gen_range(-2.0..0.5) * eta_min;
        let ranks = [rng.gen_range(1..4), rng.gen_range(1..4), rng.gen_range(1..4)];
        let rhs = random_tucker(n, ranks, &mut rng);
        let u = ShiftedLaplacian::new(grid, mu).expect("definite").solve(&rhs, 1e-13).expect("solve").to_dense();
        let exact = rhs.to_dense().solve_shifted_poisson(grid.step(), mu).expect("definite");
        worst = worst.max(u.rel_error(&exact));
    }
    worst
}

/// One random two-orbital Hartree-Fock step for a beryllium nucleus at
/// `n = 24`: returns the relative difference between the derivative-free
/// Fock matrix and the explicit-Laplacian one, and the recorded asymmetry.
pub fn fock_identity_case(seed: u64) -> (f64, f64) {
    let grid = Grid::new(4.0, 24);
    let mut rng = rng(seed);
    let problem = ScfProblem::new(Molecule::atom(4).expect("Be"), grid, ScfOptions::new(Method::HartreeFock, 1e-9))
        .expect("valid setup");
    let raw: Vec<TuckerTensor> = (0..2).map(|_| smooth_function(grid, 2, &mut rng)).collect();
    let (phi, _) = problem.orthogonalize(&raw).expect("independent orbitals");
    let lambdas = vec![rng.gen_range(-5.0..-2.0), rng.gen_range(-1.0..-0.2)];
    let v_phi = problem.apply_potential(&problem.density(&phi).expect("density"), &phi).expect("potential");
    let (phi_hat, used) = problem.green_step(&lambdas, &v_phi).expect("green step");
    let (phi_tilde, l) = problem.orthogonalize(&phi_hat).expect("independent candidates");
    let w = problem.apply_potential(&problem.density(&phi_tilde).expect("density"), &phi_tilde).expect("potential");
    let fock = problem.fock_matrix(&phi_tilde, &w, &v_phi, &l, &used);
    let dense = dense_fock(grid, &phi_tilde, &w);
    let dense = (&dense + dense.transpose()) * 0.5;
    ((&fock.matrix - &dense).norm() / dense.norm(), fock.asymmetry)
}

/// Squared singular values beyond `r` of each mode unfolding.
pub fn unfolding_tails(a: &DenseTensor, r: usize) -> [f64; 3] {
    let n = a.n();
    [0, 1, 2].map(|m| {
        let mat = DMatrix::from_fn(n, n * n, |row, col| {
            let (p, q) = (col % n, col / n);
            match m {
                0 => a.get(row, p, q),
                1 => a.get(p, row, q),
                _ => a.get(p, q, row),
            }
        });
        mat.singular_values().iter().skip(r).map(|s| s * s).sum()
    })
}
