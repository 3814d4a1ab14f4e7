//! Tabular output and input. Floats are written in the shortest decimal form
//! that reads back to the same bits.

use std::path::Path;

use serde_json::{Map, Number, Value};

use crate::config::Format;
use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Str(&'static str),
    Int(u64),
    Float(f64),
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Str(s) => s.to_string(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(f) => fmt_f64(*f),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Str(s) => Value::String(s.to_string()),
            Cell::Int(i) => Value::Number((*i).into()),
            Cell::Float(f) => Number::from_f64(*f).map(Value::Number).unwrap_or(Value::Null),
        }
    }
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_table(path: &Path, table: &Table, format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
            w.write_record(&table.header).map_err(|e| csv_io(path, e))?;
            for row in &table.rows {
                w.write_record(row.iter().map(Cell::text)).map_err(|e| csv_io(path, e))?;
            }
            w.flush().map_err(|e| CliError::io(path, e))
        }
        Format::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> =
                        table.header.iter().zip(row).map(|(k, c)| (k.to_string(), c.json())).collect();
                    Value::Object(obj)
                })
                .collect();
            let text = serde_json::to_string(&rows)?;
            std::fs::write(path, text).map_err(|e| CliError::io(path, e))
        }
    }
}

fn csv_io(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Parse { path: path.into(), row: 0, message: format!("{other:?}") },
    }
}

/// Rows of a CSV file whose header must equal `header`. Row numbers in
/// errors count the header as row 1.
pub fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(|e| csv_io(path, e))?;
    let found = r.headers().map_err(|e| parse_error(path, 1, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(CliError::Parse {
            path: path.into(),
            row: 1,
            message: format!("expected header {}, found {}", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse_error(path, i + 2, e))?;
        rows.push(rec);
    }
    if rows.is_empty() {
        return Err(CliError::NoData(path.into()));
    }
    Ok(rows)
}

fn parse_error(path: &Path, row: usize, e: csv::Error) -> CliError {
    CliError::Parse { path: path.into(), row, message: e.to_string() }
}

/// Parse field `col` of a row read by [`read_csv`]; `row` is its index there.
pub fn field<T: std::str::FromStr>(path: &Path, row: usize, rec: &csv::StringRecord, col: usize, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(col).ok_or_else(|| CliError::Parse {
        path: path.into(),
        row: row + 2,
        message: format!("missing column {name}"),
    })?;
    raw.parse().map_err(|e: T::Err| CliError::Parse {
        path: path.into(),
        row: row + 2,
        message: format!("{name} = {raw:?}: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 2.5e17, -0.0, 7.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(fmt_f64(0.25), "0.25");
        assert_eq!(fmt_f64(3.0), "3");
    }

    #[test]
    fn csv_errors_name_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "a,b\n1,2\n3,x\n").unwrap();
        let rows = read_csv(&p, &["a", "b"]).unwrap();
        assert_eq!(field::<u32>(&p, 0, &rows[0], 1, "b").unwrap(), 2);
        let err = field::<f64>(&p, 1, &rows[1], 1, "b").unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
        assert!(matches!(read_csv(&p, &["a", "c"]), Err(CliError::Parse { row: 1, .. })));
        std::fs::write(&p, "a,b\n").unwrap();
        assert!(matches!(read_csv(&p, &["a", "b"]), Err(CliError::NoData(_))));
        std::fs::write(&p, "a,b\n1,2,3\n").unwrap();
        assert!(matches!(read_csv(&p, &["a", "b"]), Err(CliError::Parse { row: 2, .. })));
    }
}
