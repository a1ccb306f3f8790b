//! Nuclei, electron counts and the nuclear repulsion energy.

use thiserror::Error;

/// Bohr per angstrom.
pub const BOHR_PER_ANGSTROM: f64 = 1.8897259886;

const SYMBOLS: [&str; 36] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca", "Sc",
    "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
];

/// Nuclear charge for an element symbol (case-insensitive).
pub fn atomic_number(symbol: &str) -> Option<u32> {
    SYMBOLS.iter().position(|s| s.eq_ignore_ascii_case(symbol)).map(|p| p as u32 + 1)
}

pub fn element_symbol(z: u32) -> Option<&'static str> {
    SYMBOLS.get((z as usize).checked_sub(1)?).copied()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nucleus {
    pub charge: f64,
    /// Position in bohr.
    pub position: [f64; 3],
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MoleculeError {
    #[error("a molecule needs at least one nucleus")]
    NoNuclei,
    #[error("nuclear charge must be positive, got {0}")]
    BadCharge(f64),
    #[error("{electrons} electrons cannot fill closed shells; only a single unpaired electron is supported")]
    OpenShell { electrons: usize },
    #[error("electron count must be at least one")]
    NoElectrons,
}

/// Nuclei plus electron count. Closed shells hold two electrons per orbital;
/// the one-electron case (a single spin orbital) is the only open shell
/// accepted.
#[derive(Clone, Debug, PartialEq)]
pub struct Molecule {
    nuclei: Vec<Nucleus>,
    electrons: usize,
}

impl Molecule {
    /// Neutral molecule.
    pub fn neutral(nuclei: Vec<Nucleus>) -> Result<Self, MoleculeError> {
        let electrons = nuclei.iter().map(|n| n.charge).sum::<f64>().round() as usize;
        Self::with_electrons(nuclei, electrons)
    }

    pub fn with_electrons(nuclei: Vec<Nucleus>, electrons: usize) -> Result<Self, MoleculeError> {
        if nuclei.is_empty() {
            return Err(MoleculeError::NoNuclei);
        }
        if let Some(n) = nuclei.iter().find(|n| !(n.charge > 0.0 && n.charge.is_finite())) {
            return Err(MoleculeError::BadCharge(n.charge));
        }
        if electrons == 0 {
            return Err(MoleculeError::NoElectrons);
        }
        if electrons % 2 == 1 && electrons != 1 {
            return Err(MoleculeError::OpenShell { electrons });
        }
        Ok(Self { nuclei, electrons })
    }

    /// Neutral atom of charge `z` at the origin.
    pub fn atom(z: u32) -> Result<Self, MoleculeError> {
        Self::neutral(vec![Nucleus { charge: z as f64, position: [0.0; 3] }])
    }

    pub fn nuclei(&self) -> &[Nucleus] {
        &self.nuclei
    }

    pub fn electrons(&self) -> usize {
        self.electrons
    }

    /// Number of occupied spatial orbitals.
    pub fn orbitals(&self) -> usize {
        self.electrons.div_ceil(2)
    }

    /// Electrons per orbital: 2 for closed shells, 1 for a single electron.
    pub fn occupation(&self) -> f64 {
        if self.electrons == 1 {
            1.0
        } else {
            2.0
        }
    }

    pub fn max_charge(&self) -> f64 {
        self.nuclei.iter().map(|n| n.charge).fold(0.0, f64::max)
    }

    /// `sum_{a<b} Z_a Z_b / |R_a - R_b|`.
    pub fn nuclear_repulsion(&self) -> f64 {
        let mut e = 0.0;
        for (a, na) in self.nuclei.iter().enumerate() {
            for nb in &self.nuclei[a + 1..] {
                let d = (0..3).map(|m| (na.position[m] - nb.position[m]).powi(2)).sum::<f64>().sqrt();
                e += na.charge * nb.charge / d;
            }
        }
        e
    }

    /// `(charge, position)` pairs for the potential builders.
    pub fn charges(&self) -> Vec<(f64, [f64; 3])> {
        self.nuclei.iter().map(|n| (n.charge, n.position)).collect()
    }

    /// Short chemical formula such as `H2` or `Be`.
    pub fn formula(&self) -> String {
        let mut counts: Vec<(u32, usize)> = Vec::new();
        for n in &self.nuclei {
            let z = n.charge.round() as u32;
            match counts.iter_mut().find(|(c, _)| *c == z) {
                Some(entry) => entry.1 += 1,
                None => counts.push((z, 1)),
            }
        }
        counts
            .iter()
            .map(|&(z, k)| {
                let s = element_symbol(z).map(str::to_string).unwrap_or_else(|| format!("Z{z}"));
                if k > 1 {
                    format!("{s}{k}")
                } else {
                    s
                }
            })
            .collect()
    }
}
