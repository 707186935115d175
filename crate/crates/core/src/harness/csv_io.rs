//! Comma-separated returns/loss tables.
//!
//! One optional header row is detected automatically: if any cell of the first
//! row fails to parse as a finite float, the row is treated as a header.

use std::path::Path;

use crate::error::{Error, Result};
use crate::sample::SampleMatrix;

pub fn load_returns_csv(path: &Path) -> Result<SampleMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_returns_csv(&bytes)
}

/// Parses an in-memory table. Line numbers in errors are 1-based.
pub fn parse_returns_csv(input: &[u8]) -> Result<SampleMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let mut width: Option<usize> = None;
    let mut data = Vec::new();
    let mut rows = 0usize;
    let mut first = true;
    let mut saw_any = false;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        saw_any = true;
        let parsed: Vec<Option<f64>> = record.iter().map(parse_cell).collect();
        if first {
            first = false;
            if parsed.iter().any(Option::is_none) {
                width = Some(record.len());
                continue;
            }
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow {
                line,
                expected,
                found: record.len(),
            });
        }
        for (column, (cell, value)) in record.iter().zip(parsed).enumerate() {
            match value {
                Some(v) => data.push(v),
                None => {
                    return Err(Error::NonNumeric {
                        line,
                        column: column + 1,
                        value: cell.to_string(),
                    })
                }
            }
        }
        rows += 1;
    }
    if !saw_any {
        return Err(Error::EmptyFile);
    }
    if rows == 0 {
        return Err(Error::EmptySample);
    }
    SampleMatrix::from_row_major(rows, width.unwrap_or(0), data)
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_and_headed_tables() {
        let m = parse_returns_csv(b"1.0,2.0\n3.0,4.0").unwrap();
        assert_eq!((m.nrows(), m.ncols()), (2, 2));
        assert_eq!(m.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        let h = parse_returns_csv(b"a,b\n1,2").unwrap();
        assert_eq!((h.nrows(), h.ncols()), (1, 2));
        assert_eq!(h.row(0), &[1.0, 2.0]);
        let neg = parse_returns_csv(b"-0.01, 0.02\n0.5e-2,-3\n").unwrap();
        assert_eq!(neg.row(1), &[0.005, -3.0]);
        assert!(!neg.is_positive());
    }

    #[test]
    fn distinct_errors() {
        match parse_returns_csv(b"1,2\n3") {
            Err(Error::RaggedRow { line, expected, found }) => {
                assert_eq!((line, expected, found), (2, 2, 1));
            }
            other => panic!("expected ragged row, got {other:?}"),
        }
        match parse_returns_csv(b"1,2\n3,x\n") {
            Err(Error::NonNumeric { line, column, value }) => {
                assert_eq!((line, column, value.as_str()), (2, 2, "x"));
            }
            other => panic!("expected non-numeric, got {other:?}"),
        }
        assert!(matches!(parse_returns_csv(b""), Err(Error::EmptyFile)));
        assert!(matches!(parse_returns_csv(b"a,b\n"), Err(Error::EmptySample)));
        assert!(matches!(
            parse_returns_csv(b"a,b\n1,2,3\n"),
            Err(Error::RaggedRow { line: 2, .. })
        ));
        assert!(matches!(
            parse_returns_csv(b"1,2\nnan,1\n"),
            Err(Error::NonNumeric { .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let e = load_returns_csv(Path::new("/definitely/not/here.csv")).unwrap_err();
        assert_eq!(e.category(), "io");
        assert!(e.to_string().contains("/definitely/not/here.csv"));
    }
}
