//! The `run` and `box-sweep` commands.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;
use tuckerscf_core::extrapolation::{auto_half_width, run_ladder, snap_half_width, LadderOptions};
use tuckerscf_core::scf::ScfError;
use tuckerscf_core::{Grid, Molecule, ScfProblem};

use crate::cache::KernelCache;
use crate::config::{BoxSize, RunArgs, SolverArgs, SweepArgs};
use crate::geometry::{parse_geometry, GeometryError};
use crate::output::{write_json, write_levels, write_sweep, write_trace, Extrapolated, LevelRow, Report, SweepRow};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Geometry { path: PathBuf, source: GeometryError },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Solver(ScfError),
    #[error("not converged")]
    NotConverged,
}

impl CliError {
    /// 1 not converged, 2 invalid input, 3 solver or file failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotConverged => 1,
            CliError::Geometry { .. } | CliError::Config(_) => 2,
            CliError::Solver(ScfError::Config(_)) => 2,
            CliError::Io { .. } | CliError::Solver(_) => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn load_molecule(args: &SolverArgs) -> Result<Molecule, CliError> {
    let text = fs::read_to_string(&args.geometry).map_err(io_err(&args.geometry))?;
    parse_geometry(&text).map_err(|source| CliError::Geometry { path: args.geometry.clone(), source })
}

/// Runs the grid ladder and writes `report.json`, `ladder.csv` and one
/// `trace_n{n}.csv` per level. Returns the report, with
/// [`CliError::NotConverged`] left to the caller via `report.converged`.
pub fn run(args: &RunArgs) -> Result<Report, CliError> {
    let opts = args.validate().map_err(CliError::Config)?;
    let molecule = load_molecule(&args.solver)?;
    let out = &args.solver.out;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let half_width = match args.box_size {
        BoxSize::Fixed(l) => l,
        BoxSize::Auto => {
            let target = auto_half_width(&molecule, &opts).map_err(CliError::Solver)?;
            let l = snap_half_width(&molecule, args.grids[0], target);
            log::info!("automatic box: half-width {target:.4} bohr, snapped to {l:.4}");
            l
        }
    };
    let mut cache = KernelCache::new(args.solver.kernel_cache.clone());
    let ladder_opts = LadderOptions { levels: args.grids.clone(), half_width, scf: opts.clone() };
    let mut trace_error = None;
    let ladder = run_ladder(
        &molecule,
        &ladder_opts,
        |grid, eps| cache.kernel(grid, eps),
        |level| {
            let path = out.join(format!("trace_n{}.csv", level.grid.n()));
            if let Err(e) = write_trace(&path, &level.outcome.trace) {
                trace_error.get_or_insert(CliError::Io { path, source: e });
            }
        },
    )
    .map_err(CliError::Solver)?;
    if let Some(e) = trace_error {
        return Err(e);
    }
    let levels: Vec<LevelRow> = ladder
        .levels
        .iter()
        .map(|l| LevelRow {
            n: l.grid.n(),
            energy: l.outcome.energy.total,
            homo: l.outcome.energy.homo,
            iters: l.outcome.iterations,
            max_rank: l.outcome.max_rank,
            seconds: l.outcome.seconds,
            converged: l.outcome.converged,
        })
        .collect();
    let extrapolated = match (&ladder.energy, &ladder.homo) {
        (Some(e), Some(h)) => Some(Extrapolated { energy: e.value, homo: h.value }),
        _ => None,
    };
    let report = Report {
        system: molecule.formula(),
        mode: opts.method.name().to_string(),
        eps: opts.eps,
        half_width,
        converged: ladder.converged && levels.len() == args.grids.len(),
        levels,
        extrapolated,
    };
    let path = out.join("ladder.csv");
    write_levels(&path, &report.levels).map_err(io_err(&path))?;
    let path = out.join("report.json");
    write_json(&path, &report).map_err(io_err(&path))?;
    Ok(report)
}

/// Solves at fixed step for each box and writes `box_sweep.csv`; the
/// relative error is taken against the largest box.
pub fn box_sweep(args: &SweepArgs) -> Result<Vec<SweepRow>, CliError> {
    let opts = args.validate().map_err(CliError::Config)?;
    let molecule = load_molecule(&args.solver)?;
    let out = &args.solver.out;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut cache = KernelCache::new(args.solver.kernel_cache.clone());
    let mut rows = Vec::with_capacity(args.boxes.len());
    for &target in &args.boxes {
        let n = ((2.0 * target / args.step).round() as usize).max(2);
        let grid = Grid::with_step(n as f64 * args.step / 2.0, args.step);
        let kernel = cache.kernel(grid, opts.internal_eps());
        let outcome =
            ScfProblem::with_kernel(molecule.clone(), grid, opts.clone(), kernel).and_then(|p| p.solve(None)).map_err(CliError::Solver)?;
        log::info!("box L={:.4} n={n}: E={:.8} after {} iterations", grid.half_width(), outcome.energy.total, outcome.iterations);
        rows.push(SweepRow {
            half_width: grid.half_width(),
            n,
            energy: outcome.energy.total,
            homo: outcome.energy.homo,
            rel_error: 0.0,
            iters: outcome.iterations,
            converged: outcome.converged,
        });
    }
    let reference = rows.last().expect("at least two boxes").energy;
    for r in &mut rows {
        r.rel_error = ((r.energy - reference) / reference).abs();
    }
    let path = out.join("box_sweep.csv");
    write_sweep(&path, &rows).map_err(io_err(&path))?;
    Ok(rows)
}
