//! CSV and JSON artifacts.

use std::fs;
use std::path::Path;

use divband::barrier::{Band, BandStructure, CandidateValue};
use divband::{Grid, GridFn};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Rounds to 12 significant digits and prints the shortest decimal form.
pub fn sig12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    rounded.to_string()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io { path: path.display().to_string(), source },
        other => CliError::Config(format!("{}: {other:?}", path.display())),
    }
}

/// Writes a header row and numeric rows with LF line endings.
pub fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| sig12(*v))).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads numeric columns by header name.
pub fn read_csv(path: &Path, columns: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| CliError::Config(format!("{} has no column {c}", path.display())))
        })
        .collect::<Result<_, _>>()?;
    let mut out = vec![Vec::new(); columns.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        for (k, &i) in idx.iter().enumerate() {
            let v: f64 = rec
                .get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| CliError::Config(format!("{}: bad number in row {}", path.display(), line + 2)))?;
            out[k].push(v);
        }
    }
    Ok(out)
}

/// Candidate samples `(x, V, V', gamma)` on every grid node.
pub fn write_candidate(path: &Path, v: &CandidateValue) -> Result<(), CliError> {
    let core = v.core();
    let grid = *v.grid();
    write_csv(
        path,
        &["x", "V", "Vprime", "gamma"],
        (0..grid.len()).map(|i| vec![grid.x(i), core.values()[i], core.deriv()[i], v.gamma()[i]]),
    )
}

/// Rebuilds a candidate from [`write_candidate`] output and its band layout.
pub fn read_candidate(path: &Path, bands: BandStructure) -> Result<CandidateValue, CliError> {
    let cols = read_csv(path, &["x", "V", "Vprime", "gamma"])?;
    let xs = &cols[0];
    if xs.len() < 3 || xs[0] != 0.0 {
        return Err(CliError::Config(format!("{}: candidate must start at x = 0", path.display())));
    }
    let n = xs.len() - 1;
    let h = xs[n] / n as f64;
    if let Some(i) = (0..=n).find(|&i| (xs[i] - i as f64 * h).abs() > 1e-9 * (1.0 + xs[n])) {
        return Err(CliError::Config(format!("{}: row {} is off the uniform grid", path.display(), i + 2)));
    }
    let grid = Grid::with_intervals(h, n).map_err(CliError::invalid)?;
    let core = GridFn::new(grid, cols[1].clone(), cols[2].clone()).map_err(CliError::invalid)?;
    CandidateValue::new(core, cols[3].clone(), bands).map_err(CliError::invalid)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandsFile {
    pub v0: f64,
    pub bands: Vec<Band>,
    pub a_star: f64,
    pub certified: bool,
}

impl BandsFile {
    pub fn new(v: &CandidateValue, certified: bool) -> Self {
        Self { v0: v.v0(), bands: v.bands().bands().to_vec(), a_star: v.a_star(), certified }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn structure(&self) -> Result<BandStructure, CliError> {
        BandStructure::new(self.bands.clone()).map_err(CliError::invalid)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serialisable");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(0.375), "0.375");
        assert_eq!(sig12(1.0), "1");
        assert_eq!(sig12(-0.1375), "-0.1375");
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(std::f64::consts::PI), "3.14159265359");
        assert_eq!(sig12(1.0 / 3.0 * 1e-7), "0.0000000333333333333");
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&path, &["a", "b"], [vec![0.5, 2.0], vec![1.25, -3.0]].into_iter()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "a,b\n0.5,2\n1.25,-3\n");
        let cols = read_csv(&path, &["b", "a"]).unwrap();
        assert_eq!(cols, vec![vec![2.0, -3.0], vec![0.5, 1.25]]);
    }
}
