//! XYZ-style geometry files: a count line, a unit line (`angstrom` or
//! `bohr`, optionally followed by a comment), then `symbol x y z` rows.

use thiserror::Error;
use tuckerscf_core::molecule::atomic_number;
use tuckerscf_core::{Molecule, Nucleus};

pub const BOHR_PER_ANGSTROM: f64 = 1.8897259886;

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct GeometryError {
    /// 1-based line number (0 for problems with the file as a whole).
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> GeometryError {
    GeometryError { line, message: message.into() }
}

pub fn parse_geometry(text: &str) -> Result<Molecule, GeometryError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (count_line, count) = lines.next().filter(|(_, l)| !l.is_empty()).ok_or_else(|| err(1, "empty geometry file"))?;
    let count: usize = count.parse().map_err(|_| err(count_line, format!("expected the atom count, found {count:?}")))?;
    if count == 0 {
        return Err(err(count_line, "the atom count must be positive"));
    }
    let (unit_line, unit) = lines.next().ok_or_else(|| err(2, "missing unit line (angstrom or bohr)"))?;
    let scale = match unit.split_whitespace().next().map(str::to_ascii_lowercase).as_deref() {
        Some("angstrom") => BOHR_PER_ANGSTROM,
        Some("bohr") => 1.0,
        _ => return Err(err(unit_line, format!("expected a unit line starting with angstrom or bohr, found {unit:?}"))),
    };
    let mut nuclei = Vec::with_capacity(count);
    for (line, row) in lines {
        if row.is_empty() || row.starts_with('#') {
            continue;
        }
        if nuclei.len() == count {
            return Err(err(line, format!("more atoms than the declared {count}")));
        }
        let fields: Vec<&str> = row.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(err(line, format!("expected `symbol x y z`, found {row:?}")));
        }
        let z = atomic_number(fields[0]).ok_or_else(|| err(line, format!("unknown element {:?}", fields[0])))?;
        let mut position = [0.0; 3];
        for (p, f) in position.iter_mut().zip(&fields[1..]) {
            let v: f64 = f.parse().map_err(|_| err(line, format!("malformed coordinate {f:?}")))?;
            if !v.is_finite() {
                return Err(err(line, format!("coordinate {f:?} is not finite")));
            }
            *p = v * scale;
        }
        nuclei.push(Nucleus { charge: z as f64, position });
    }
    if nuclei.len() != count {
        return Err(err(0, format!("declared {count} atoms, found {}", nuclei.len())));
    }
    Molecule::neutral(nuclei).map_err(|e| err(0, e.to_string()))
}
