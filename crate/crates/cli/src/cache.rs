//! On-disk cache of convolution kernels.
//!
//! One JSON file per `(n, L, eps)`, named
//! `newton_n{n}_L{bits}_eps{bits}.json` with the IEEE bit patterns of `L`
//! and `eps` in hex, holding `{n, half_width, eps, reference, working}`;
//! each table is `{nodes, weights, values}` with `values[k][d]`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tuckerscf_core::convolution::{CellTable, NewtonKernel};
use tuckerscf_core::Grid;

use crate::output::write_atomic;

#[derive(Serialize, Deserialize)]
struct Table {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl Table {
    fn valid(&self, n: usize) -> bool {
        let k = self.nodes.len();
        k > 0
            && self.weights.len() == k
            && self.values.len() == k
            && self.values.iter().all(|v| v.len() == n && v.iter().all(|x| x.is_finite()))
            && self.nodes.iter().chain(&self.weights).all(|x| x.is_finite())
    }
}

impl From<CellTable> for Table {
    fn from(t: CellTable) -> Self {
        Self { nodes: t.nodes, weights: t.weights, values: t.values }
    }
}

impl From<Table> for CellTable {
    fn from(t: Table) -> Self {
        CellTable { nodes: t.nodes, weights: t.weights, values: t.values }
    }
}

#[derive(Serialize, Deserialize)]
struct Entry {
    n: usize,
    half_width: f64,
    eps: f64,
    reference: Table,
    working: Table,
}

pub struct KernelCache {
    dir: Option<PathBuf>,
    hits: usize,
}

impl KernelCache {
    /// A cache in `dir`, or no caching for `None`.
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir, hits: 0 }
    }

    pub fn hits(&self) -> usize {
        self.hits
    }

    pub fn path(dir: &Path, grid: Grid, eps: f64) -> PathBuf {
        dir.join(format!("newton_n{}_L{:016x}_eps{:016x}.json", grid.n(), grid.half_width().to_bits(), eps.to_bits()))
    }

    fn load(path: &Path, grid: Grid, eps: f64) -> Option<(CellTable, CellTable)> {
        let text = fs::read_to_string(path).ok()?;
        let e: Entry = match serde_json::from_str(&text) {
            Ok(e) => e,
            Err(err) => {
                log::warn!("ignoring unreadable kernel cache {}: {err}", path.display());
                return None;
            }
        };
        let n = grid.n();
        if e.n != n || e.half_width != grid.half_width() || e.eps != eps || !e.reference.valid(n) || !e.working.valid(n) {
            log::warn!("ignoring inconsistent kernel cache {}", path.display());
            return None;
        }
        Some((e.reference.into(), e.working.into()))
    }

    /// Kernel for `grid` at accuracy `eps`, from the cache when present.
    pub fn kernel(&mut self, grid: Grid, eps: f64) -> NewtonKernel {
        let Some(dir) = &self.dir else {
            return NewtonKernel::build(grid, eps);
        };
        let path = Self::path(dir, grid, eps);
        if let Some((reference, working)) = Self::load(&path, grid, eps) {
            log::info!("kernel n={} loaded from {}", grid.n(), path.display());
            self.hits += 1;
            return NewtonKernel::from_table(grid, eps, reference, working);
        }
        let (reference, working) = NewtonKernel::tables(grid, eps);
        let entry = Entry {
            n: grid.n(),
            half_width: grid.half_width(),
            eps,
            reference: reference.clone().into(),
            working: working.clone().into(),
        };
        let stored = fs::create_dir_all(dir)
            .map_err(|e| e.to_string())
            .and_then(|_| serde_json::to_vec(&entry).map_err(|e| e.to_string()))
            .and_then(|bytes| write_atomic(&path, &bytes).map_err(|e| e.to_string()));
        if let Err(e) = stored {
            log::warn!("could not store kernel cache {}: {e}", path.display());
        }
        NewtonKernel::from_table(grid, eps, reference, working)
    }
}
