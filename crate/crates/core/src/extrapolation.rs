//! Grid ladders: repeated SCF solves on `n, 2n, 4n, ...` with warm starts,
//! followed by Aitken extrapolation of the level energies.

use nalgebra::DMatrix;

use crate::convolution::NewtonKernel;
use crate::grid::Grid;
use crate::molecule::Molecule;
use crate::scf::{suggested_half_width, InitialGuess, ScfError, ScfOptions, ScfOutcome, ScfProblem};
use crate::tucker::TuckerTensor;

/// Result of repeated Aitken passes over a sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Aitken {
    /// Extrapolated value: the last entry of the last pass.
    pub value: f64,
    /// Every pass, starting with the input sequence.
    pub table: Vec<Vec<f64>>,
    /// True if some step had a vanishing second difference and returned its
    /// last input unchanged.
    pub guarded: bool,
}

/// One Aitken step on `(a, b, c)`:
/// `c - (c - b)^2 / ((c - b) - (b - a))`. Returns `(c, true)` when the
/// denominator is below `1e-14 |c|`.
pub fn aitken_step(a: f64, b: f64, c: f64) -> (f64, bool) {
    let d1 = c - b;
    let den = d1 - (b - a);
    if den.abs() < 1e-14 * c.abs() || den == 0.0 {
        (c, true)
    } else {
        (c - d1 * d1 / den, false)
    }
}

/// Aitken extrapolation of depth `min(2, floor((len - 1) / 2))`; `None` for
/// fewer than three values.
pub fn aitken(seq: &[f64]) -> Option<Aitken> {
    if seq.len() < 3 {
        return None;
    }
    let depth = ((seq.len() - 1) / 2).min(2);
    let mut table = vec![seq.to_vec()];
    let mut guarded = false;
    for _ in 0..depth {
        let prev = table.last().expect("non-empty");
        let next: Vec<f64> = prev
            .windows(3)
            .map(|w| {
                let (v, g) = aitken_step(w[0], w[1], w[2]);
                guarded |= g;
                v
            })
            .collect();
        table.push(next);
    }
    let value = *table.last().and_then(|t| t.last()).expect("depth keeps at least one entry");
    Some(Aitken { value, table, guarded })
}

/// Linear interpolation from `n` cell centers to `2n` with zero ghost
/// values outside the box.
pub fn prolongation_matrix(n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(2 * n, n);
    for j in 0..n {
        // fine cells 2j and 2j+1 sit a quarter coarse step either side of j
        p[(2 * j, j)] = 0.75;
        p[(2 * j + 1, j)] = 0.75;
        if j > 0 {
            p[(2 * j, j - 1)] = 0.25;
        }
        if j + 1 < n {
            p[(2 * j + 1, j + 1)] = 0.25;
        }
    }
    p
}

/// Interpolates a tensor onto the grid with half the step.
pub fn prolongate(t: &TuckerTensor) -> TuckerTensor {
    let p = prolongation_matrix(t.n());
    let (core, factors) = t.clone().into_parts();
    let [a, b, c] = factors;
    TuckerTensor::new(core, [&p * a, &p * b, &p * c])
}

/// Half-width closest to `target` for which every nuclear coordinate lies
/// on a cell face of the `n`-point grid. Falls back to `target` when no
/// common step within 30% exists.
pub fn snap_half_width(molecule: &Molecule, n: usize, target: f64) -> f64 {
    let base = 2.0 * target / n as f64;
    let coords: Vec<f64> =
        molecule.nuclei().iter().flat_map(|nuc| nuc.position).map(f64::abs).filter(|c| *c > 1e-12).collect();
    if coords.is_empty() {
        return target;
    }
    let fits = |h: f64| coords.iter().all(|c| ((c / h) - (c / h).round()).abs() < 1e-9 * (c / h).max(1.0));
    let mut best: Option<f64> = None;
    for &c in &coords {
        let m0 = (c / base).round().max(1.0) as usize;
        for m in m0.saturating_sub(3).max(1)..=m0 + 3 {
            let h = c / m as f64;
            if fits(h) && (h - base).abs() <= 0.3 * base && best.is_none_or(|b| (h - base).abs() < (b - base).abs()) {
                best = Some(h);
            }
        }
    }
    match best {
        Some(h) => h * n as f64 / 2.0,
        None => {
            log::warn!("no grid step puts all nuclei on cell faces; using half-width {target}");
            target
        }
    }
}

/// Box half-width from a coarse (`n = 32`) solve:
/// `max |R| + C ln(1/eps) / sqrt(-2 lambda_HOMO)`.
pub fn auto_half_width(molecule: &Molecule, opts: &ScfOptions) -> Result<f64, ScfError> {
    let extent = molecule.nuclei().iter().flat_map(|n| n.position).fold(0.0f64, |m, x| m.max(x.abs()));
    let first = extent + suggested_half_width(-0.5, opts.eps);
    let mut coarse = opts.clone();
    coarse.eps = opts.eps.max(1e-4);
    coarse.max_iter = opts.max_iter.min(30);
    let grid = Grid::new(snap_half_width(molecule, 32, first), 32);
    let out = ScfProblem::new(molecule.clone(), grid, coarse)?.solve(None)?;
    Ok(extent + suggested_half_width(out.energy.homo, opts.eps))
}

#[derive(Clone, Debug)]
pub struct LadderOptions {
    /// Grid sizes, each twice the previous.
    pub levels: Vec<usize>,
    pub half_width: f64,
    pub scf: ScfOptions,
}

#[derive(Clone, Debug)]
pub struct LevelResult {
    pub grid: Grid,
    pub outcome: ScfOutcome,
}

#[derive(Clone, Debug)]
pub struct Ladder {
    pub levels: Vec<LevelResult>,
    /// Extrapolated total energy (three or more converged levels).
    pub energy: Option<Aitken>,
    pub homo: Option<Aitken>,
    /// All requested levels converged.
    pub converged: bool,
    pub seconds: f64,
}

impl Ladder {
    pub fn finest(&self) -> Option<&LevelResult> {
        self.levels.last()
    }
}

/// Checks that `levels` are increasing powers of two, each twice the last.
pub fn validate_levels(levels: &[usize]) -> Result<(), ScfError> {
    if levels.is_empty() {
        return Err(ScfError::Config("at least one grid level is needed".into()));
    }
    for &n in levels {
        if !n.is_power_of_two() || !(16..=1024).contains(&n) {
            return Err(ScfError::Config(format!("grid size {n} is not a power of two in [16, 1024]")));
        }
    }
    if levels.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(ScfError::Config("each grid level must double the previous one".into()));
    }
    Ok(())
}

/// Runs the ladder. `kernel` supplies the convolution kernel for each grid
/// (e.g. from a cache); `on_level` sees each finished level. Stops at the
/// first level that does not converge.
pub fn run_ladder(
    molecule: &Molecule,
    opts: &LadderOptions,
    mut kernel: impl FnMut(Grid, f64) -> NewtonKernel,
    mut on_level: impl FnMut(&LevelResult),
) -> Result<Ladder, ScfError> {
    validate_levels(&opts.levels)?;
    let start = std::time::Instant::now();
    let mut levels: Vec<LevelResult> = Vec::new();
    let mut guess: Option<InitialGuess> = None;
    let mut converged = true;
    for &n in &opts.levels {
        let grid = Grid::new(opts.half_width, n);
        let k = kernel(grid, opts.scf.internal_eps());
        let problem = ScfProblem::with_kernel(molecule.clone(), grid, opts.scf.clone(), k)?;
        let outcome = problem.solve(guess.take())?;
        guess = Some(InitialGuess {
            orbitals: outcome.orbitals.iter().map(prolongate).collect(),
            lambdas: outcome.energy.orbital_energies.clone(),
        });
        let level = LevelResult { grid, outcome };
        on_level(&level);
        let ok = level.outcome.converged;
        levels.push(level);
        if !ok {
            log::warn!("level n={n} did not converge; stopping the ladder");
            converged = false;
            break;
        }
    }
    let (energy, homo) = if converged {
        let e: Vec<f64> = levels.iter().map(|l| l.outcome.energy.total).collect();
        let h: Vec<f64> = levels.iter().map(|l| l.outcome.energy.homo).collect();
        (aitken(&e), aitken(&h))
    } else {
        (None, None)
    };
    Ok(Ladder { levels, energy, homo, converged, seconds: start.elapsed().as_secs_f64() })
}
