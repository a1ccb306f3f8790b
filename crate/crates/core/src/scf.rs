//! Block-Green self-consistent iteration for closed-shell Hartree-Fock and
//! Kohn-Sham (LDA) ground states on a uniform grid.
//!
//! One iteration, with orbitals `Phi`, energies `Lambda` and the products
//! `V Phi` of the current potential:
//!
//! 1. `phi_hat_i = -2 (-Delta_h - 2 lambda_i)^{-1} (V phi_i)` (screened
//!    Poisson solves),
//! 2. `Phi_tilde = Phi_hat L^{-T}` with `Phi_hat^T Phi_hat = L L^T`,
//! 3. new (mixed) density and potential, `W = V_new Phi_tilde`,
//! 4. `F = Phi_tilde^T W - Phi_tilde^T (V Phi) L^{-T} + L^T Lambda L^{-T}`,
//!    which equals `Phi_tilde^T (-Delta_h/2 + V_new) Phi_tilde` without
//!    applying the Laplacian,
//! 5. `F = S diag(lambda) S^T`, `Phi = Phi_tilde S`, `V Phi = W S`.
//!
//! All integrals are `h^3`-weighted sums over grid values; orbitals are
//! normalized so that `h^3 sum phi^2 = 1`.

use std::cell::Cell;
use std::time::Instant;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::convolution::{external_potential, NewtonKernel};
use crate::cross::{cross_approximate, CrossError, CrossOptions, CrossReport, TuckerMap};
use crate::grid::Grid;
use crate::mixing::{AndersonMixer, MixKind, RoundedTensor};
use crate::molecule::Molecule;
use crate::poisson::{PoissonError, ShiftedLaplacian};
use crate::tucker::TuckerTensor;
use crate::xc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    HartreeFock,
    Lda,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::HartreeFock => "hf",
            Method::Lda => "lda",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScfOptions {
    pub method: Method,
    /// Relative accuracy: stopping threshold for orbital energies and the
    /// scale for all tensor approximations (which run at `eps / 10`).
    pub eps: f64,
    pub max_iter: usize,
    pub mix_depth: usize,
    pub mix_beta: f64,
    pub seed: u64,
    /// Orbital energies at or above zero are replaced by this value in the
    /// screened solves.
    pub lambda_cap: f64,
    /// For one orbital, update `lambda` with the scalar formula instead of
    /// the Fock-matrix path (they agree algebraically).
    pub scalar_update: bool,
}

impl ScfOptions {
    pub fn new(method: Method, eps: f64) -> Self {
        Self {
            method,
            eps,
            max_iter: 60,
            mix_depth: 5,
            mix_beta: 0.7,
            seed: 0x5eed,
            lambda_cap: -0.05,
            scalar_update: false,
        }
    }

    /// Accuracy used for rounding, cross and convolution inside the loop.
    pub fn internal_eps(&self) -> f64 {
        self.eps / 10.0
    }
}

#[derive(Debug, Error)]
pub enum ScfError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("Gram matrix is not positive definite (orbital collapse): {gram}")]
    NotPositiveDefinite { gram: DMatrix<f64> },
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error(transparent)]
    Cross(#[from] CrossError),
}

/// One row of the per-iteration trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub orbital: usize,
    pub lambda: f64,
    pub rel_change: f64,
    pub ranks: [usize; 3],
}

#[derive(Clone, Debug)]
pub struct EnergyReport {
    pub total: f64,
    pub orbital_energies: Vec<f64>,
    pub homo: f64,
    pub nuclear_repulsion: f64,
    /// `1/2 int int rho rho' / |r - r'|`
    pub coulomb: f64,
    /// `(f/2) sum_ij (ij|ij)` (Hartree-Fock only)
    pub exchange: f64,
    /// `int rho eps_xc` (LDA only)
    pub xc_energy: f64,
    /// `int rho v_xc` (LDA only)
    pub xc_potential: f64,
    pub electron_count: f64,
}

#[derive(Clone, Debug)]
pub struct ScfOutcome {
    pub energy: EnergyReport,
    pub orbitals: Vec<TuckerTensor>,
    pub trace: Vec<TraceRecord>,
    pub iterations: usize,
    pub converged: bool,
    pub iteration_seconds: Vec<f64>,
    pub max_rank: usize,
    pub fock_asymmetry: f64,
    pub cross_evaluations: usize,
    pub clamped_density_samples: usize,
    pub mixing_fallbacks: usize,
    pub mixing_restarts: usize,
    pub lambda_caps: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct FockMatrix {
    /// Symmetrized matrix.
    pub matrix: DMatrix<f64>,
    /// `||F - F^T|| / ||F||` before symmetrization.
    pub asymmetry: f64,
}

/// Orbitals and energies to start from.
#[derive(Clone, Debug)]
pub struct InitialGuess {
    pub orbitals: Vec<TuckerTensor>,
    pub lambdas: Vec<f64>,
}

/// Everything that stays fixed during one SCF run on one grid.
pub struct ScfProblem {
    molecule: Molecule,
    grid: Grid,
    opts: ScfOptions,
    kernel: NewtonKernel,
    v_ext: TuckerTensor,
    evaluations: Cell<usize>,
    clamped: Cell<usize>,
    seed_counter: Cell<u64>,
}

fn relative_change(new: f64, old: f64) -> f64 {
    if new == 0.0 {
        (new - old).abs()
    } else {
        ((new - old) / new).abs()
    }
}

impl ScfProblem {
    pub fn new(molecule: Molecule, grid: Grid, opts: ScfOptions) -> Result<Self, ScfError> {
        let kernel = NewtonKernel::build(grid, opts.internal_eps());
        Self::with_kernel(molecule, grid, opts, kernel)
    }

    /// Same as [`ScfProblem::new`] with a prebuilt (e.g. cached) kernel.
    pub fn with_kernel(molecule: Molecule, grid: Grid, opts: ScfOptions, kernel: NewtonKernel) -> Result<Self, ScfError> {
        if !(opts.eps >= 1e-12 && opts.eps <= 1e-3) {
            return Err(ScfError::Config(format!("eps must lie in [1e-12, 1e-3], got {}", opts.eps)));
        }
        if opts.mix_depth == 0 || !(opts.mix_beta > 0.0 && opts.mix_beta <= 1.0) {
            return Err(ScfError::Config("mixing needs depth >= 1 and beta in (0, 1]".into()));
        }
        if !(opts.lambda_cap < 0.0) {
            return Err(ScfError::Config("the orbital energy cap must be negative".into()));
        }
        if molecule.electrons() == 1 && opts.method == Method::Lda {
            return Err(ScfError::Config("a single electron is only supported with Hartree-Fock".into()));
        }
        if kernel.grid() != grid {
            return Err(ScfError::Config("kernel was built for a different grid".into()));
        }
        let l = grid.half_width();
        if let Some(n) = molecule.nuclei().iter().find(|n| n.position.iter().any(|x| x.abs() >= l)) {
            return Err(ScfError::Config(format!("nucleus at {:?} lies outside the box [-{l}, {l}]^3", n.position)));
        }
        let v_ext = external_potential(&molecule.charges(), grid, opts.internal_eps());
        Ok(Self {
            molecule,
            grid,
            opts,
            kernel,
            v_ext,
            evaluations: Cell::new(0),
            clamped: Cell::new(0),
            seed_counter: Cell::new(0),
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn molecule(&self) -> &Molecule {
        &self.molecule
    }

    pub fn options(&self) -> &ScfOptions {
        &self.opts
    }

    pub fn kernel(&self) -> &NewtonKernel {
        &self.kernel
    }

    pub fn external_potential(&self) -> &TuckerTensor {
        &self.v_ext
    }

    fn eps(&self) -> f64 {
        self.opts.internal_eps()
    }

    fn next_seed(&self) -> u64 {
        let c = self.seed_counter.get();
        self.seed_counter.set(c + 1);
        self.opts.seed.wrapping_add(c.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    fn cross<F: Fn(&[f64]) -> f64>(&self, inputs: Vec<&TuckerTensor>, f: F) -> Result<TuckerTensor, ScfError> {
        let oracle = TuckerMap::new(inputs, f);
        let opts = CrossOptions::new(self.eps()).with_seed(self.next_seed());
        let (t, report) = cross_approximate(&oracle, &opts)?;
        self.note(&report);
        Ok(t)
    }

    fn note(&self, report: &CrossReport) {
        self.evaluations.set(self.evaluations.get() + report.evaluations);
        if !report.converged {
            log::debug!("cross approximation not converged: {report:?}");
        }
    }

    /// `h^3 <a, b>`
    pub fn integral(&self, a: &TuckerTensor, b: &TuckerTensor) -> f64 {
        self.grid.cell_volume() * a.inner(b)
    }

    /// Starting orbitals: per orbital `i`, a sum over nuclei of Gaussians
    /// `exp(-0.3 (Z/(i+1))^2 |r - R|^2)`, orthonormalized; energies
    /// `-Z_max^2 / (2 (i+1)^2)` capped below `lambda_cap`.
    pub fn initial_guess(&self) -> Result<InitialGuess, ScfError> {
        let centers = self.grid.centers();
        let mut raw = Vec::new();
        for i in 0..self.molecule.orbitals() {
            let parts: Vec<TuckerTensor> = self
                .molecule
                .nuclei()
                .iter()
                .map(|nuc| {
                    let a = 0.3 * (nuc.charge / (i + 1) as f64).powi(2);
                    let f: Vec<Vec<f64>> =
                        (0..3).map(|m| centers.iter().map(|x| (-a * (x - nuc.position[m]).powi(2)).exp()).collect()).collect();
                    TuckerTensor::rank_one(&f[0], &f[1], &f[2])
                })
                .collect();
            let refs: Vec<(f64, &TuckerTensor)> = parts.iter().map(|t| (1.0, t)).collect();
            raw.push(TuckerTensor::linear_combination(&refs).round(self.eps()));
        }
        let (orbitals, _) = self.orthogonalize(&raw)?;
        let zmax = self.molecule.max_charge();
        let lambdas =
            (0..orbitals.len()).map(|i| (-0.5 * zmax * zmax / ((i + 1) * (i + 1)) as f64).min(self.opts.lambda_cap)).collect();
        Ok(InitialGuess { orbitals, lambdas })
    }

    /// `rho = f sum phi_i^2` by one cross approximation.
    pub fn density(&self, orbitals: &[TuckerTensor]) -> Result<TuckerTensor, ScfError> {
        let occ = self.molecule.occupation();
        self.cross(orbitals.iter().collect(), move |v| occ * v.iter().map(|x| x * x).sum::<f64>())
    }

    fn single_electron(&self) -> bool {
        self.molecule.electrons() == 1
    }

    /// Local part `v_ext + v_coul(rho)`.
    pub fn local_potential(&self, density: &TuckerTensor) -> TuckerTensor {
        let v_coul = self.kernel.conv(density, self.eps());
        self.v_ext.add(&v_coul).round(self.eps())
    }

    /// `conv(phi_i phi_j)` for every pair `j <= i`, stored symmetrically.
    pub fn exchange_potentials(&self, orbitals: &[TuckerTensor]) -> Result<Vec<Vec<TuckerTensor>>, ScfError> {
        let n = orbitals.len();
        let mut k: Vec<Vec<Option<TuckerTensor>>> = vec![vec![None; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let pair = self.cross(vec![&orbitals[i], &orbitals[j]], |v| v[0] * v[1])?;
                let kij = self.kernel.conv(&pair, self.eps());
                k[j][i] = Some(kij.clone());
                k[i][j] = Some(kij);
            }
        }
        Ok(k.into_iter().map(|row| row.into_iter().map(|x| x.expect("filled")).collect()).collect())
    }

    /// Applies the potential defined by `density` (Coulomb, and
    /// exchange-correlation for LDA) and, for Hartree-Fock, the exchange
    /// operator of `orbitals`, to each of the `orbitals`.
    pub fn apply_potential(&self, density: &TuckerTensor, orbitals: &[TuckerTensor]) -> Result<Vec<TuckerTensor>, ScfError> {
        if self.single_electron() {
            // Coulomb and exchange cancel identically for one electron
            return orbitals.iter().map(|phi| self.cross(vec![&self.v_ext, phi], |v| v[0] * v[1])).collect();
        }
        let v_loc = self.local_potential(density);
        match self.opts.method {
            Method::HartreeFock => {
                let k = self.exchange_potentials(orbitals)?;
                let n = orbitals.len();
                (0..n)
                    .map(|i| {
                        let mut inputs = vec![&v_loc, &orbitals[i]];
                        inputs.extend(orbitals.iter());
                        inputs.extend(k[i].iter());
                        self.cross(inputs, move |v| {
                            let mut s = v[0] * v[1];
                            for j in 0..n {
                                s -= v[2 + j] * v[2 + n + j];
                            }
                            s
                        })
                    })
                    .collect()
            }
            Method::Lda => orbitals
                .iter()
                .map(|phi| {
                    let clamped = &self.clamped;
                    self.cross(vec![&v_loc, density, phi], move |v| {
                        if v[1] < 0.0 {
                            clamped.set(clamped.get() + 1);
                        }
                        (v[0] + xc::lda(v[1]).1) * v[2]
                    })
                })
                .collect(),
        }
    }

    /// `phi_hat_i = -2 (-Delta_h - 2 lambda_i)^{-1} (V phi)_i`. Returns the
    /// candidates and the (capped) energies used for the shifts.
    pub fn green_step(&self, lambdas: &[f64], v_phi: &[TuckerTensor]) -> Result<(Vec<TuckerTensor>, Vec<f64>), ScfError> {
        let mut used = Vec::with_capacity(lambdas.len());
        let mut out = Vec::with_capacity(lambdas.len());
        for (i, (&lambda, vp)) in lambdas.iter().zip(v_phi).enumerate() {
            let lam = if lambda >= 0.0 {
                log::warn!("orbital {i}: energy {lambda} is not negative, using {} for the shift", self.opts.lambda_cap);
                self.opts.lambda_cap
            } else {
                lambda
            };
            let op = ShiftedLaplacian::new(self.grid, 2.0 * lam)?;
            let (u, report) = op.solve_with_report(vp, self.eps(), self.next_seed())?;
            self.note(&report);
            out.push(u.scale(-2.0));
            used.push(lam);
        }
        Ok((out, used))
    }

    /// `Phi_tilde = Phi_hat L^{-T}` with `h^3 Phi_hat^T Phi_hat = L L^T`.
    pub fn orthogonalize(&self, phi_hat: &[TuckerTensor]) -> Result<(Vec<TuckerTensor>, DMatrix<f64>), ScfError> {
        let n = phi_hat.len();
        let gram = DMatrix::from_fn(n, n, |i, j| self.integral(&phi_hat[i], &phi_hat[j]));
        let l = match gram.clone().cholesky() {
            Some(c) => c.l(),
            None => return Err(ScfError::NotPositiveDefinite { gram }),
        };
        // a pivot at roundoff level means the candidates are linearly dependent
        if (0..n).any(|i| !(l[(i, i)] * l[(i, i)] > 1e-12 * gram[(i, i)])) {
            return Err(ScfError::NotPositiveDefinite { gram });
        }
        let linv_t = l.clone().try_inverse().ok_or_else(|| ScfError::NotPositiveDefinite { gram: gram.clone() })?.transpose();
        let out = (0..n).map(|j| combine(phi_hat, linv_t.column(j).as_slice(), self.eps())).collect();
        Ok((out, l))
    }

    /// Derivative-free Fock matrix
    /// `F = Phi_t^T W - (Phi_t^T V Phi) L^{-T} + L^T Lambda L^{-T}`.
    pub fn fock_matrix(
        &self,
        phi_tilde: &[TuckerTensor],
        w_new: &[TuckerTensor],
        v_phi_old: &[TuckerTensor],
        l: &DMatrix<f64>,
        lambdas: &[f64],
    ) -> FockMatrix {
        let n = phi_tilde.len();
        let a = DMatrix::from_fn(n, n, |i, j| self.integral(&phi_tilde[i], &w_new[j]));
        let b = DMatrix::from_fn(n, n, |i, j| self.integral(&phi_tilde[i], &v_phi_old[j]));
        let linv_t = l.clone().try_inverse().expect("Cholesky factor is invertible").transpose();
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(lambdas));
        let f = a - b * &linv_t + l.transpose() * lam * &linv_t;
        let fnorm = f.norm();
        let asymmetry = if fnorm > 0.0 { (&f - f.transpose()).norm() / fnorm } else { 0.0 };
        FockMatrix { matrix: (&f + f.transpose()) * 0.5, asymmetry }
    }

    /// Eigen-decomposition of `F`; rotates orbitals and their potential
    /// products. Energies are sorted ascending; eigenvector signs are fixed
    /// so that the largest component is positive.
    pub fn rotate(
        &self,
        phi_tilde: &[TuckerTensor],
        w_new: &[TuckerTensor],
        fock: &FockMatrix,
    ) -> (Vec<TuckerTensor>, Vec<TuckerTensor>, Vec<f64>) {
        let (values, s) = sorted_eigen(&fock.matrix);
        let n = phi_tilde.len();
        let orbitals = (0..n).map(|j| combine(phi_tilde, s.column(j).as_slice(), self.eps())).collect();
        let w = (0..n).map(|j| combine(w_new, s.column(j).as_slice(), self.eps())).collect();
        (orbitals, w, values)
    }

    /// Total energy and its parts for orthonormal orbitals with energies
    /// `lambdas`.
    pub fn total_energy(&self, orbitals: &[TuckerTensor], lambdas: &[f64]) -> Result<EnergyReport, ScfError> {
        let f = self.molecule.occupation();
        let h3 = self.grid.cell_volume();
        let rho = self.density(orbitals)?;
        let v_coul = self.kernel.conv(&rho, self.eps());
        let coulomb = 0.5 * h3 * rho.inner(&v_coul);
        let mut exchange = 0.0;
        let mut xc_energy = 0.0;
        let mut xc_potential = 0.0;
        let band: f64 = f * lambdas.iter().sum::<f64>();
        let nuclear_repulsion = self.molecule.nuclear_repulsion();
        let total = match self.opts.method {
            Method::HartreeFock => {
                if self.single_electron() {
                    exchange = coulomb;
                } else {
                    let k = self.exchange_potentials(orbitals)?;
                    let n = orbitals.len();
                    for i in 0..n {
                        for j in 0..n {
                            let pair = self.cross(vec![&orbitals[i], &orbitals[j]], |v| v[0] * v[1])?;
                            exchange += 0.5 * f * h3 * pair.inner(&k[i][j]);
                        }
                    }
                }
                band - coulomb + exchange + nuclear_repulsion
            }
            Method::Lda => {
                let clamped = &self.clamped;
                let e = self.cross(vec![&rho], |v| {
                    if v[0] < 0.0 {
                        clamped.set(clamped.get() + 1);
                    }
                    v[0].max(0.0) * xc::lda(v[0]).0
                })?;
                let p = self.cross(vec![&rho], |v| v[0].max(0.0) * xc::lda(v[0]).1)?;
                xc_energy = h3 * e.sum();
                xc_potential = h3 * p.sum();
                band - coulomb + xc_energy - xc_potential + nuclear_repulsion
            }
        };
        Ok(EnergyReport {
            total,
            orbital_energies: lambdas.to_vec(),
            homo: *lambdas.last().expect("at least one orbital"),
            nuclear_repulsion,
            coulomb,
            exchange,
            xc_energy,
            xc_potential,
            electron_count: h3 * rho.sum(),
        })
    }

    /// Runs the iteration from `guess` (or the built-in starting guess).
    pub fn solve(&self, guess: Option<InitialGuess>) -> Result<ScfOutcome, ScfError> {
        let start = Instant::now();
        self.evaluations.set(0);
        self.clamped.set(0);
        let guess = match guess {
            Some(g) => {
                let (orbitals, _) = self.orthogonalize(&g.orbitals)?;
                InitialGuess { orbitals, lambdas: g.lambdas }
            }
            None => self.initial_guess()?,
        };
        if guess.orbitals.len() != self.molecule.orbitals() || guess.lambdas.len() != guess.orbitals.len() {
            return Err(ScfError::Config(format!(
                "initial guess has {} orbitals, the molecule needs {}",
                guess.orbitals.len(),
                self.molecule.orbitals()
            )));
        }
        let mut orbitals = guess.orbitals;
        let mut lambdas = guess.lambdas;
        let mut density = self.density(&orbitals)?;
        let mut v_phi = self.apply_potential(&density, &orbitals)?;
        let mut mixer: AndersonMixer<RoundedTensor> = AndersonMixer::new(self.opts.mix_depth, self.opts.mix_beta);
        let scalar = self.opts.scalar_update && orbitals.len() == 1;

        let mut trace = Vec::new();
        let mut iteration_seconds = Vec::new();
        let mut converged = false;
        let mut asymmetry = 0.0;
        let mut caps = 0;
        let mut iterations = 0;
        for it in 1..=self.opts.max_iter {
            let t0 = Instant::now();
            let (phi_hat, used) = self.green_step(&lambdas, &v_phi)?;
            caps += used.iter().zip(&lambdas).filter(|(u, l)| u != l).count();
            let (phi_tilde, l) = self.orthogonalize(&phi_hat)?;
            let rho_out = self.density(&phi_tilde)?;
            if !self.single_electron() {
                let (mixed, kind) = mixer.mix(RoundedTensor::new(density, self.eps()), &RoundedTensor::new(rho_out, self.eps()));
                if kind == MixKind::Simple && it > 1 && self.opts.mix_depth > 1 {
                    log::debug!("iteration {it}: simple mixing step");
                }
                density = mixed.tensor;
            } else {
                density = rho_out;
            }
            let w = self.apply_potential(&density, &phi_tilde)?;
            let (new_orbitals, new_v_phi, new_lambdas) = if scalar {
                // V phi_hat = L V phi_tilde by linearity
                let w_hat = w[0].scale(l[(0, 0)]);
                let lam = scalar_update(used[0], &w_hat, &v_phi[0], &phi_hat[0]);
                (phi_tilde, w, vec![lam])
            } else {
                let fock = self.fock_matrix(&phi_tilde, &w, &v_phi, &l, &used);
                asymmetry = fock.asymmetry;
                self.rotate(&phi_tilde, &w, &fock)
            };
            let mut max_change: f64 = 0.0;
            for (i, (&new, &old)) in new_lambdas.iter().zip(&lambdas).enumerate() {
                let change = relative_change(new, old);
                max_change = max_change.max(change);
                trace.push(TraceRecord { iteration: it, orbital: i, lambda: new, rel_change: change, ranks: new_orbitals[i].ranks() });
            }
            orbitals = new_orbitals;
            v_phi = new_v_phi;
            lambdas = new_lambdas;
            iterations = it;
            iteration_seconds.push(t0.elapsed().as_secs_f64());
            log::info!(
                "n={} iteration {it}: lambda {:?}, max relative change {max_change:.3e}, ranks {:?}",
                self.grid.n(),
                lambdas,
                orbitals.iter().map(|o| o.ranks()).collect::<Vec<_>>()
            );
            if max_change < self.opts.eps {
                converged = true;
                break;
            }
        }
        let energy = self.total_energy(&orbitals, &lambdas)?;
        let max_rank = orbitals.iter().map(|o| o.max_rank()).max().unwrap_or(0);
        Ok(ScfOutcome {
            energy,
            orbitals,
            trace,
            iterations,
            converged,
            iteration_seconds,
            max_rank,
            fock_asymmetry: asymmetry,
            cross_evaluations: self.evaluations.get(),
            clamped_density_samples: self.clamped.get(),
            mixing_fallbacks: mixer.fallbacks(),
            mixing_restarts: mixer.restarts(),
            lambda_caps: caps,
            seconds: start.elapsed().as_secs_f64(),
        })
    }
}

/// `lambda + ((V_new phi_hat, phi_hat) - (V_old phi_old, phi_hat)) / (phi_hat, phi_hat)`,
/// the one-orbital form of the Fock update.
pub fn scalar_update(lambda: f64, v_new_phi_hat: &TuckerTensor, v_old_phi_old: &TuckerTensor, phi_hat: &TuckerTensor) -> f64 {
    lambda + (v_new_phi_hat.inner(phi_hat) - v_old_phi_old.inner(phi_hat)) / phi_hat.inner(phi_hat)
}

/// `sum_i c_i x_i`, rounded unless it is a single scaled input.
fn combine(xs: &[TuckerTensor], c: &[f64], eps: f64) -> TuckerTensor {
    let terms: Vec<(f64, &TuckerTensor)> = c.iter().copied().zip(xs.iter()).filter(|(a, _)| *a != 0.0).collect();
    match terms.len() {
        0 => TuckerTensor::zeros(xs[0].n()),
        1 => terms[0].1.scale(terms[0].0),
        _ => TuckerTensor::linear_combination(&terms).round(eps),
    }
}

/// Symmetric eigen-decomposition with ascending eigenvalues and
/// deterministic eigenvector signs.
pub fn sorted_eigen(f: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = f.nrows();
    let eig = f.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut s = DMatrix::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(k);
        let big = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let sign = if big < 0.0 { -1.0 } else { 1.0 };
        s.set_column(j, &(col * sign));
    }
    (values, s)
}

/// Box half-width at which the density of an orbital with energy `homo`
/// has decayed by `eps`: `L = C ln(1/eps) / sqrt(-2 homo)` with `C = 0.5`,
/// never below 4 bohr.
pub fn suggested_half_width(homo: f64, eps: f64) -> f64 {
    let decay = (-2.0 * homo.min(-1e-3)).sqrt();
    (0.5 * (1.0 / eps).ln() / decay).max(4.0)
}
