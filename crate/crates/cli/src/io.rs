//! Trajectory files: CSV with an integer `k` column followed by
//! `{prefix}0 .. {prefix}{d-1}`.

use std::io::{Read, Write};
use std::path::Path;

use descriptor_minimax::Vector;

use crate::error::CliError;

pub fn write_trajectory<W: Write>(out: W, prefix: &str, rows: &[Vector]) -> Result<(), CliError> {
    let dim = rows.first().map_or(0, |r| r.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string()];
    header.extend((0..dim).map(|i| format!("{prefix}{i}")));
    w.write_record(&header)?;
    for (k, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(CliError::Io(format!("row {k} has length {} instead of {dim}", row.len())));
        }
        let mut rec = vec![k.to_string()];
        rec.extend(row.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

/// Reads rows in file order; `k` must count up from zero.
pub fn read_trajectory<R: Read>(input: R, prefix: &str) -> Result<Vec<Vector>, CliError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers()?.clone();
    if header.get(0) != Some("k") {
        return Err(CliError::Io("first column must be 'k'".into()));
    }
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("{prefix}{i}") {
            return Err(CliError::Io(format!("expected column '{prefix}{i}', found '{name}'")));
        }
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let k: usize = rec[0].parse().map_err(|_| CliError::Io(format!("row {line}: bad index '{}'", &rec[0])))?;
        if k != rows.len() {
            return Err(CliError::Io(format!("row {line}: expected k = {}, found {k}", rows.len())));
        }
        let vals = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|_| CliError::Io(format!("row {line}: bad number '{s}'"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(Vector::from_vec(vals));
    }
    Ok(rows)
}

pub fn read_trajectory_file(path: &Path, prefix: &str) -> Result<Vec<Vector>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    read_trajectory(file, prefix)
}

pub fn write_trajectory_file(path: &Path, prefix: &str, rows: &[Vector]) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    write_trajectory(std::io::BufWriter::new(file), prefix, rows)
}
