//! Command-line arguments and their validation.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tuckerscf_core::extrapolation::validate_levels;
use tuckerscf_core::{Method, ScfOptions};

#[derive(Debug, Parser)]
#[command(name = "tuckerscf", version, about = "Grid Hartree-Fock and LDA solver in the Tucker format")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve on a ladder of grids and extrapolate the energies.
    Run(RunArgs),
    /// Solve at fixed grid step for several box sizes.
    BoxSweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Hf,
    Lda,
}

impl From<Mode> for Method {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Hf => Method::HartreeFock,
            Mode::Lda => Method::Lda,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoxSize {
    Fixed(f64),
    Auto,
}

impl FromStr for BoxSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(BoxSize::Auto);
        }
        match s.parse::<f64>() {
            Ok(l) if l.is_finite() && l > 0.0 => Ok(BoxSize::Fixed(l)),
            _ => Err(format!("box must be a positive half-width in bohr or `auto`, got {s:?}")),
        }
    }
}

/// Settings shared by every subcommand.
#[derive(Clone, Debug, Args)]
pub struct SolverArgs {
    /// Geometry file (count line, unit line, `symbol x y z` rows).
    #[arg(long)]
    pub geometry: PathBuf,
    #[arg(long, value_enum, default_value = "hf")]
    pub mode: Mode,
    /// Relative accuracy, in [1e-12, 1e-3].
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, default_value_t = 60)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 5)]
    pub mix_depth: usize,
    #[arg(long, default_value_t = 0.7)]
    pub mix_beta: f64,
    /// Seed for the cross-approximation pivots.
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Directory of cached convolution kernels.
    #[arg(long)]
    pub kernel_cache: Option<PathBuf>,
}

impl SolverArgs {
    pub fn scf_options(&self) -> Result<ScfOptions, String> {
        if !(self.eps >= 1e-12 && self.eps <= 1e-3) {
            return Err(format!("eps must lie in [1e-12, 1e-3], got {}", self.eps));
        }
        if self.mix_depth == 0 || !(self.mix_beta > 0.0 && self.mix_beta <= 1.0) {
            return Err("mixing needs --mix-depth >= 1 and --mix-beta in (0, 1]".into());
        }
        let mut opts = ScfOptions::new(self.mode.into(), self.eps);
        opts.max_iter = self.max_iter;
        opts.mix_depth = self.mix_depth;
        opts.mix_beta = self.mix_beta;
        opts.seed = self.seed;
        Ok(opts)
    }
}

#[derive(Clone, Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Grid sizes, each twice the previous (powers of two in [16, 1024]).
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    pub grids: Vec<usize>,
    /// Box half-width in bohr, or `auto`.
    #[arg(long = "box", default_value = "auto")]
    pub box_size: BoxSize,
}

impl RunArgs {
    pub fn validate(&self) -> Result<ScfOptions, String> {
        validate_levels(&self.grids).map_err(|e| e.to_string())?;
        self.solver.scf_options()
    }
}

#[derive(Clone, Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Box half-widths in bohr.
    #[arg(long, value_delimiter = ',', required = true)]
    pub boxes: Vec<f64>,
    /// Grid step in bohr, kept fixed across the sweep.
    #[arg(long, default_value_t = 0.2)]
    pub step: f64,
}

impl SweepArgs {
    pub fn validate(&self) -> Result<ScfOptions, String> {
        if self.boxes.len() < 2 {
            return Err("a box sweep needs at least two sizes".into());
        }
        if self.boxes.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err("box sizes must be positive".into());
        }
        if self.boxes.windows(2).any(|w| w[1] <= w[0]) {
            return Err("box sizes must increase".into());
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err("the grid step must be positive".into());
        }
        let largest = 2.0 * self.boxes.last().expect("at least two") / self.step;
        if largest > 1024.0 {
            return Err(format!("the largest box needs {largest:.0} points per mode, above 1024"));
        }
        self.solver.scf_options()
    }
}
