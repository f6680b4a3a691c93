use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::Measure;
use crate::error::{Error, Result};

/// Loads weighted atoms from a CSV file.
///
/// Each row holds `d` coordinates, optionally followed by a weight. A first
/// row containing any non-numeric field is treated as a header. The weight
/// column is recognised either from `dim` (rows of `dim + 1` fields) or from
/// a header whose last name is `w`/`weight`/`weights`.
pub fn empirical_from_csv(path: impl AsRef<Path>, dim: Option<usize>) -> Result<Measure> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    empirical_from_reader(file, dim)
}

pub fn empirical_from_reader<R: Read>(reader: R, dim: Option<usize>) -> Result<Measure> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;

    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = idx + 1;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = rec.iter().map(str::parse::<f64>).collect();
        if rows.is_empty() && header.is_none() && parsed.iter().any(|p| p.is_err()) {
            header = Some(rec.iter().map(|s| s.to_ascii_lowercase()).collect());
            width = Some(rec.len());
            continue;
        }
        match width {
            Some(w) if w != rec.len() => {
                return Err(Error::Parse {
                    row,
                    column: rec.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", rec.len()),
                })
            }
            None => width = Some(rec.len()),
            _ => {}
        }
        let mut values = Vec::with_capacity(rec.len());
        for (col, (p, raw)) in parsed.into_iter().zip(rec.iter()).enumerate() {
            match p {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(Error::Parse {
                        row,
                        column: col + 1,
                        message: format!("'{raw}' is not a finite number"),
                    })
                }
            }
        }
        rows.push(values);
    }

    let width = width.unwrap_or(0);
    if rows.is_empty() {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            message: "no data rows".into(),
        });
    }
    let has_weights = match dim {
        Some(d) if width == d => false,
        Some(d) if width == d + 1 => true,
        Some(d) => {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: width,
            })
        }
        None => header
            .as_ref()
            .and_then(|h| h.last())
            .is_some_and(|n| matches!(n.as_str(), "w" | "weight" | "weights")),
    };
    let d = if has_weights { width - 1 } else { width };
    if d == 0 {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            message: "no coordinate columns".into(),
        });
    }
    let (atoms, weights) = if has_weights {
        let w = rows.iter().map(|r| r[d]).collect();
        let a = rows.into_iter().map(|mut r| {
            r.truncate(d);
            r
        });
        (a.collect(), Some(w))
    } else {
        (rows, None)
    };
    Measure::empirical(atoms, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_rows_uniform() {
        let m = empirical_from_reader("1,0\n-1,0\n".as_bytes(), None).unwrap();
        let e = m.as_empirical().unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e.atom(0), &[1.0, 0.0]);
        assert_eq!(e.atom(1), &[-1.0, 0.0]);
        assert_eq!(e.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn header_skipped_and_crlf() {
        let m = empirical_from_reader("x,y\r\n1,2\r\n3,4\r\n".as_bytes(), None).unwrap();
        assert_eq!(m.as_empirical().unwrap().len(), 2);
    }

    #[test]
    fn weight_column_from_header_or_dim() {
        let src = "x,y,weight\n0,0,0.25\n1,1,0.75\n";
        let m = empirical_from_reader(src.as_bytes(), None).unwrap();
        assert_eq!(m.as_empirical().unwrap().weights(), &[0.25, 0.75]);
        let m = empirical_from_reader("0,0,0.25\n1,1,0.75\n".as_bytes(), Some(2)).unwrap();
        assert_eq!(m.dim().get(), 2);
        assert!(empirical_from_reader("0,0,0.25\n".as_bytes(), Some(4)).is_err());
    }

    #[test]
    fn ragged_rows_name_the_row() {
        match empirical_from_reader("1,2\n3,4\n5\n".as_bytes(), None) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_number_names_row_and_column() {
        match empirical_from_reader("1,2\n3,abc\n".as_bytes(), None) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
