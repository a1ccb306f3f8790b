//! Report and table files. Every file is written to a temporary sibling
//! and renamed into place.

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tuckerscf_core::scf::TraceRecord;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LevelRow {
    pub n: usize,
    #[serde(rename = "E")]
    pub energy: f64,
    pub homo: f64,
    pub iters: usize,
    pub max_rank: usize,
    pub seconds: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Extrapolated {
    #[serde(rename = "E")]
    pub energy: f64,
    pub homo: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub system: String,
    pub mode: String,
    pub eps: f64,
    pub half_width: f64,
    pub levels: Vec<LevelRow>,
    pub extrapolated: Option<Extrapolated>,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n: usize,
    #[serde(rename = "E")]
    pub energy: f64,
    pub homo: f64,
    pub rel_error: f64,
    pub iters: usize,
    pub converged: bool,
}

fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> io::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Columns `iter,orbital,lambda,rel_change,rank1,rank2,rank3`.
pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> io::Result<()> {
    let rows: Vec<(usize, usize, f64, f64, usize, usize, usize)> =
        trace.iter().map(|t| (t.iteration, t.orbital, t.lambda, t.rel_change, t.ranks[0], t.ranks[1], t.ranks[2])).collect();
    write_atomic(path, &csv_bytes(&rows, &["iter", "orbital", "lambda", "rel_change", "rank1", "rank2", "rank3"])?)
}

/// Columns `n,E,homo,iters,max_rank,seconds,converged`.
pub fn write_levels(path: &Path, rows: &[LevelRow]) -> io::Result<()> {
    write_atomic(path, &csv_bytes(rows, &["n", "E", "homo", "iters", "max_rank", "seconds", "converged"])?)
}

/// Columns `L,n,E,homo,rel_error,iters,converged`.
pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> io::Result<()> {
    write_atomic(path, &csv_bytes(rows, &["L", "n", "E", "homo", "rel_error", "iters", "converged"])?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn trace_has_a_fixed_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rec = TraceRecord { iteration: 1, orbital: 0, lambda: -0.5, rel_change: 0.1, ranks: [3, 4, 5] };
        write_trace(&path, &[rec]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "iter,orbital,lambda,rel_change,rank1,rank2,rank3\n1,0,-0.5,0.1,3,4,5\n");
    }
}
