//! Galerkin discretization of the Newton potential and its low-rank
//! convolution.
//!
//! With piecewise-constant basis functions on `h`-cells the potential
//! `w(r) = int f(r') / |r - r'| dr'` becomes the discrete convolution
//! `w_i = sum_j f_j kappa_{i-j}`, where `kappa_d = q_d / h^3` and
//! `q_d = int_{cell 0} int_{cell d} dr dr' / |r - r'|` is the cell-pair
//! integral. `w_i` is then the average potential over cell `i`, so double
//! integrals `int int f g / |r - r'|` are approximated by
//! `h^3 * inner(g, conv(f))`.
//!
//! Every `q_d` factors through a Gaussian sum for `1/rho` into products of
//! one-dimensional cell integrals, so the kernel is a canonical sum whose
//! factor vectors span a small subspace; the convolution is applied
//! factor-wise with 1D FFTs.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::expsum::{CellQuadrature, ExpSum};
use crate::grid::Grid;
use crate::linalg::{mode_product, truncated_range};
use crate::tucker::TuckerTensor;

/// Relative accuracy of the reference tables behind [`NewtonKernel::entry`].
pub const REFERENCE_ACCURACY: f64 = 1e-14;

/// One-dimensional cell integrals `G_k(d)`, `d = 0..n`, for every node of a
/// Gaussian sum.
#[derive(Clone, Debug, PartialEq)]
pub struct CellTable {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `values[k][d]`
    pub values: Vec<Vec<f64>>,
}

impl CellTable {
    pub fn build(sum: &ExpSum, h: f64, n: usize) -> Self {
        let quad = CellQuadrature::new();
        let values = sum.nodes().iter().map(|&t| (0..n).map(|d| quad.cell_pair_integral(d, h, t)).collect()).collect();
        Self { nodes: sum.nodes().to_vec(), weights: sum.weights().to_vec(), values }
    }

    /// `q_d` for the cell offset `d`.
    pub fn pair_integral(&self, d: [isize; 3]) -> f64 {
        let a = d.map(|x| x.unsigned_abs());
        self.values.iter().zip(&self.weights).map(|(v, w)| w * v[a[0]] * v[a[1]] * v[a[2]]).sum()
    }
}

#[derive(Clone, Debug)]
pub struct NewtonKernel {
    grid: Grid,
    eps: f64,
    reference: CellTable,
    /// canonical weights of `kappa` (already divided by `h^3`)
    weights: Vec<f64>,
    /// orthonormal basis of the factor vectors, `(2n - 1) x r`, row `d + n - 1`
    basis: DMatrix<f64>,
    /// factor vectors in that basis, `r x K`
    coeffs: DMatrix<f64>,
    fft_len: usize,
    spectra: Vec<Vec<Complex64>>,
}

/// Smallest 2^a 3^b 5^c that is at least `m`.
fn smooth_length(m: usize) -> usize {
    let mut best = usize::MAX;
    let mut p2 = 1;
    while p2 < 2 * m {
        let mut p3 = p2;
        while p3 < 2 * m {
            let mut p5 = p3;
            while p5 < 2 * m {
                if p5 >= m && p5 < best {
                    best = p5;
                }
                p5 *= 5;
            }
            p3 *= 3;
        }
        p2 *= 2;
    }
    best
}

impl NewtonKernel {
    /// Builds the kernel for convolutions at relative accuracy `eps`.
    pub fn build(grid: Grid, eps: f64) -> Self {
        let (reference, working) = Self::tables(grid, eps);
        Self::from_table(grid, eps, reference, working)
    }

    /// The reference and working cell tables behind [`NewtonKernel::build`].
    pub fn tables(grid: Grid, eps: f64) -> (CellTable, CellTable) {
        assert!(eps > 0.0 && eps < 1.0, "kernel accuracy must lie in (0, 1)");
        let n = grid.n();
        let h = grid.step();
        let diameter = 3f64.sqrt() * 2.0 * grid.half_width();
        let reference = CellTable::build(&ExpSum::for_cells(h, diameter, REFERENCE_ACCURACY), h, n);
        let working = CellTable::build(&ExpSum::for_cells(h, diameter, (0.1 * eps).min(1e-3)), h, n);
        (reference, working)
    }

    /// Reassembles a kernel from its two cell tables (used by on-disk caches).
    pub fn from_table(grid: Grid, eps: f64, reference: CellTable, working: CellTable) -> Self {
        let n = grid.n();
        let h3 = grid.cell_volume();
        let m = 2 * n - 1;
        let terms = working.nodes.len();
        for table in [&reference, &working] {
            assert!(table.values.iter().all(|v| v.len() == n), "cell table does not match the grid");
        }
        let weights: Vec<f64> = working.weights.iter().map(|w| w / h3).collect();
        let full = DMatrix::from_fn(m, terms, |row, k| working.values[k][(row as isize - (n as isize - 1)).unsigned_abs()]);
        let scaled = DMatrix::from_fn(m, terms, |row, k| full[(row, k)] * weights[k].abs().cbrt());
        let mut basis = truncated_range(&scaled, 1e-2 * eps * scaled.norm(), m);
        if basis.ncols() == 0 {
            basis = DMatrix::zeros(m, 1);
            basis[(n - 1, 0)] = 1.0;
        }
        let coeffs = basis.transpose() * &full;
        let fft_len = smooth_length(3 * n - 2);
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(fft_len);
        let spectra = basis
            .column_iter()
            .map(|col| {
                let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
                for (b, v) in buf.iter_mut().zip(col.iter()) {
                    b.re = *v;
                }
                fft.process(&mut buf);
                buf
            })
            .collect();
        Self { grid, eps, reference, weights, basis, coeffs, fft_len, spectra }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Rank of the factor subspace (the Tucker rank of `kappa` on the
    /// `(2n-1)^3` offset grid).
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn terms(&self) -> usize {
        self.weights.len()
    }

    pub fn reference_table(&self) -> &CellTable {
        &self.reference
    }

    /// Cell-pair integral `q_d` from the high-accuracy reference table.
    pub fn pair_integral(&self, d: [isize; 3]) -> f64 {
        let n = self.grid.n() as isize;
        assert!(d.iter().all(|x| x.abs() < n), "offset outside the kernel");
        self.reference.pair_integral(d)
    }

    /// Normalized kernel value `kappa_d = q_d / h^3`.
    pub fn entry(&self, d: [isize; 3]) -> f64 {
        self.pair_integral(d) / self.grid.cell_volume()
    }

    /// Tucker form of `kappa` on the `(2n-1)^3` offset grid as seen by
    /// [`NewtonKernel::conv`].
    pub fn to_tucker(&self) -> TuckerTensor {
        let a = &self.basis;
        let c = &self.coeffs;
        let factors: [&DMatrix<f64>; 3] = [c, c, c];
        let small = TuckerTensor::from_canonical(&self.weights, factors, 1e-15);
        let (core, f) = small.into_parts();
        TuckerTensor::new(core, [a * &f[0], a * &f[1], a * &f[2]])
    }

    /// `(A_p * u)` restricted to the output block for every basis column `p`
    /// and every column `u` of `factor`; column index `p + rank * alpha`.
    fn factor_convolutions(&self, factor: &DMatrix<f64>, planner: &mut FftPlanner<f64>) -> DMatrix<f64> {
        let n = self.grid.n();
        let len = self.fft_len;
        let rk = self.rank();
        let r = factor.ncols();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let mut out = DMatrix::zeros(n, rk * r);
        let scale = 1.0 / len as f64;
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        let mut prod = vec![Complex64::new(0.0, 0.0); len];
        // two real columns share one complex transform
        let mut alpha = 0;
        while alpha < r {
            let pair = alpha + 1 < r;
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            for i in 0..n {
                buf[i].re = factor[(i, alpha)];
                if pair {
                    buf[i].im = factor[(i, alpha + 1)];
                }
            }
            fwd.process(&mut buf);
            for (p, spec) in self.spectra.iter().enumerate() {
                for ((o, a), b) in prod.iter_mut().zip(spec).zip(&buf) {
                    *o = a * b;
                }
                inv.process(&mut prod);
                for i in 0..n {
                    let v = prod[i + n - 1] * scale;
                    out[(i, p + rk * alpha)] = v.re;
                    if pair {
                        out[(i, p + rk * (alpha + 1))] = v.im;
                    }
                }
            }
            alpha += if pair { 2 } else { 1 };
        }
        out
    }

    /// Discrete convolution `w_i = sum_j f_j kappa_{i-j}` on the same grid,
    /// to relative accuracy `eps`.
    pub fn conv(&self, f: &TuckerTensor, eps: f64) -> TuckerTensor {
        let n = self.grid.n();
        assert_eq!(f.n(), n, "tensor and kernel live on different grids");
        let f = f.orthogonalized();
        let fnorm = f.core().iter().map(|x| x * x).sum::<f64>().sqrt();
        if fnorm == 0.0 {
            return TuckerTensor::zeros(n);
        }
        let rk = self.rank();
        let ranks = f.ranks();
        // importance of each basis direction across the canonical terms
        let s: Vec<f64> = (0..rk)
            .map(|p| {
                (0..self.terms())
                    .map(|k| self.weights[k].abs().powf(2.0 / 3.0) * self.coeffs[(p, k)].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let mut planner = FftPlanner::new();
        let mut bases = Vec::with_capacity(3);
        let mut mats = Vec::with_capacity(3);
        for m in 0..3 {
            let sigma = slice_norms(f.core(), ranks, m);
            let t = self.factor_convolutions(f.factor(m), &mut planner);
            let weighted = DMatrix::from_fn(n, t.ncols(), |i, c| t[(i, c)] * s[c % rk] * sigma[c / rk]);
            let mut q = truncated_range(&weighted, 1e-2 * eps * weighted.norm(), n);
            if q.ncols() == 0 {
                q = DMatrix::zeros(n, 1);
                q[(0, 0)] = 1.0;
            }
            let e = q.transpose() * &t; // r_out x (rk * r_m)
            let ro = q.ncols();
            // rearrange to (r_out * r_m) x rk so one product yields every term
            let e2 = DMatrix::from_fn(ro * ranks[m], rk, |row, p| {
                let x = row % ro;
                let alpha = row / ro;
                e[(x, p + rk * alpha)]
            });
            mats.push(e2 * &self.coeffs);
            bases.push(q);
        }
        let out_ranks = [bases[0].ncols(), bases[1].ncols(), bases[2].ncols()];
        let mut core = vec![0.0; out_ranks.iter().product()];
        for k in 0..self.terms() {
            let mut data = f.core().to_vec();
            let mut dims = ranks;
            for m in 0..3 {
                let col = mats[m].column(k);
                let mk = DMatrix::from_column_slice(out_ranks[m], ranks[m], col.as_slice());
                let (next, nd) = mode_product(&data, dims, m, &mk);
                data = next;
                dims = nd;
            }
            let w = self.weights[k];
            for (c, d) in core.iter_mut().zip(&data) {
                *c += w * d;
            }
        }
        let [u, v, w]: [DMatrix<f64>; 3] = bases.try_into().expect("three modes");
        TuckerTensor::new(core, [u, v, w]).round(0.5 * eps)
    }
}

/// Norms of the mode-`m` slices of a core.
fn slice_norms(core: &[f64], dims: [usize; 3], mode: usize) -> Vec<f64> {
    let mut out = vec![0.0; dims[mode]];
    for c in 0..dims[2] {
        for b in 0..dims[1] {
            for a in 0..dims[0] {
                let v = core[a + dims[0] * (b + dims[1] * c)];
                let idx = [a, b, c][mode];
                out[idx] += v * v;
            }
        }
    }
    out.iter().map(|x| x.sqrt()).collect()
}

/// Hartree potential `int rho(r') / |r - r'| dr'` (cell averages).
pub fn coulomb_potential(rho: &TuckerTensor, kernel: &NewtonKernel, eps: f64) -> TuckerTensor {
    kernel.conv(rho, eps)
}

/// `-sum_a Z_a / |r - R_a|` sampled at the cell centres.
///
/// The Gaussian sum is accurate on `[h/10, sqrt(3) 2L]`; a nucleus closer
/// than that to a centre gets the (finite) sum value there.
pub fn external_potential(nuclei: &[(f64, [f64; 3])], grid: Grid, eps: f64) -> TuckerTensor {
    let n = grid.n();
    if nuclei.is_empty() {
        return TuckerTensor::zeros(n);
    }
    let h = grid.step();
    let sum = ExpSum::inverse_distance(0.1 * h, 3f64.sqrt() * 2.0 * grid.half_width(), (0.1 * eps).min(1e-3));
    let centers = grid.centers();
    let terms = sum.len();
    let parts: Vec<TuckerTensor> = nuclei
        .iter()
        .map(|&(z, pos)| {
            let f: Vec<DMatrix<f64>> = (0..3)
                .map(|m| DMatrix::from_fn(n, terms, |i, k| (-(sum.nodes()[k] * (centers[i] - pos[m])).powi(2)).exp()))
                .collect();
            let w: Vec<f64> = sum.weights().iter().map(|w| -z * w).collect();
            TuckerTensor::from_canonical(&w, [&f[0], &f[1], &f[2]], 0.1 * eps)
        })
        .collect();
    let refs: Vec<(f64, &TuckerTensor)> = parts.iter().map(|t| (1.0, t)).collect();
    TuckerTensor::linear_combination(&refs).round(eps)
}
