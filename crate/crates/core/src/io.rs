//! CSV and JSON serialization of fields, tables and reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field;

/// Reads the last column of a CSV file as reals, skipping a non-numeric header row.
pub fn read_column_csv(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let Some(last) = rec.iter().next_back() else { continue };
        match last.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if row == 0 => continue,
            Err(_) => {
                return Err(Error::Config(format!(
                    "{}: row {} is not numeric: {last:?}",
                    path.display(),
                    row + 1
                )))
            }
        }
    }
    Ok(out)
}

/// Writes `x,value` (1D) or `x,y,value` (2D), one row per node in grid order.
pub fn write_field_csv(path: &Path, u: &Field) -> Result<()> {
    write_fields_csv(path, &[("value", u)])
}

/// Several fields on one grid side by side, one named column each.
pub fn write_fields_csv(path: &Path, cols: &[(&str, &Field)]) -> Result<()> {
    let Some((_, first)) = cols.first() else {
        return Err(Error::Domain("no field to write".into()));
    };
    let grid = first.grid();
    for (_, f) in cols {
        f.same_grid(first)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = if grid.dim() == 1 { vec!["x"] } else { vec!["x", "y"] };
    header.extend(cols.iter().map(|(n, _)| *n));
    w.write_record(&header)?;
    for i in 0..grid.len() {
        let c = grid.coords(i);
        let mut row: Vec<String> = (0..grid.dim()).map(|d| fmt(c[d])).collect();
        row.extend(cols.iter().map(|(_, f)| fmt(f.values()[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// A rectangular table with named columns.
pub fn write_table_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|&v| fmt(v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip representation, so equal runs give byte-identical files.
fn fmt(v: f64) -> String {
    format!("{v:e}")
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, BoundaryCondition};

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = build_grid(2, &[1.0, 2.0], &[3, 4], BoundaryCondition::Neumann).unwrap();
        let u = Field::from_fn(g, |x| x[0] * 0.1 + x[1] / 3.0);
        let path = dir.path().join("u.csv");
        write_field_csv(&path, &u).unwrap();
        let back = read_column_csv(&path).unwrap();
        assert_eq!(back, u.values());
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,y,value\n"));
    }

    #[test]
    fn bad_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        std::fs::write(&path, "a\n1\nfoo\n").unwrap();
        assert!(read_column_csv(&path).is_err());
        std::fs::write(&path, "1\n-2\n").unwrap();
        assert_eq!(read_column_csv(&path).unwrap(), vec![1.0, -2.0]);
    }
}
