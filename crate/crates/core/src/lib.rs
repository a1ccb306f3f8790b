//! Tucker-format tensors on uniform 3D grids and a Green-function SCF solver
//! for closed-shell Hartree-Fock and Kohn-Sham (LDA) ground states.

// index loops follow the formulas; negated comparisons also reject NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod convolution;
pub mod cross;
pub mod dense;
pub mod extrapolation;
pub mod expsum;
pub mod grid;
pub mod linalg;
pub mod mixing;
pub mod molecule;
pub mod poisson;
pub mod scf;
pub mod tucker;
pub mod xc;

pub use grid::Grid;
pub use molecule::{Molecule, Nucleus};
pub use scf::{Method, ScfOptions, ScfProblem};
pub use tucker::{Indices, TuckerTensor};
