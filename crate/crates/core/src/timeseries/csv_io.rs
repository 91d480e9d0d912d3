// SPDX-License-Identifier: MIT OR Apache-2.0

//! Series CSV: one header row of column names, then one row per time step.
//! Values are written in shortest round-trip form, so save/load is exact.
//! Row numbers in errors are 1-based file lines (the header is line 1).

use std::io::Write;
use std::path::Path;

use super::{SeriesMeta, SeriesSource, TimeSeriesMatrix};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub fn load_csv(path: &Path) -> Result<TimeSeriesMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<TimeSeriesMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        None => {
            return Err(Error::Parse {
                row: 1,
                column: None,
                message: "file is empty".into(),
            })
        }
        Some(r) => r.map_err(|e| csv_error(e, 1))?,
    };
    let columns: Vec<String> = header.iter().map(str::to_owned).collect();
    let p = columns.len();
    if p == 0 || columns.iter().all(String::is_empty) {
        return Err(Error::Parse {
            row: 1,
            column: None,
            message: "header has no column names".into(),
        });
    }
    let mut data = Vec::new();
    let mut n = 0usize;
    for (k, rec) in records.enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| csv_error(e, row))?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            // blank line
            continue;
        }
        if rec.len() != p {
            return Err(Error::Parse {
                row,
                column: None,
                message: format!("expected {p} fields, found {}", rec.len()),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: Some(c + 1),
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: Some(c + 1),
                    message: format!("'{cell}' is not finite"),
                });
            }
            data.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Parse {
            row: 2,
            column: None,
            message: "no data rows".into(),
        });
    }
    TimeSeriesMatrix::with_columns(
        Matrix::from_vec(n, p, data)?,
        columns,
        SeriesMeta {
            seed: None,
            burn_in_dropped: 0,
            source: SeriesSource::Csv,
        },
    )
}

fn csv_error(e: csv::Error, row: usize) -> Error {
    Error::Parse {
        row,
        column: None,
        message: e.to_string(),
    }
}

pub fn write_csv<W: Write>(series: &TimeSeriesMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(series.columns()).map_err(into_io)?;
    let mut cells: Vec<String> = Vec::with_capacity(series.dim());
    for t in 0..series.len() {
        cells.clear();
        cells.extend(series.row(t).iter().map(|v| format!("{v:?}")));
        w.write_record(&cells).map_err(into_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(series: &TimeSeriesMatrix, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(series, std::io::BufWriter::new(file))
}

fn into_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_file() {
        let s = parse_csv("a,b\n1,2\n3,4\n").unwrap();
        assert_eq!(s.data().to_rows(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(s.columns(), ["a", "b"]);
    }

    #[test]
    fn nan_cell_names_row_two() {
        match parse_csv("a,b\n1,NaN\n3,4\n") {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, Some(2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejections() {
        assert!(matches!(parse_csv(""), Err(Error::Parse { row: 1, .. })));
        assert!(matches!(parse_csv("a,b\n"), Err(Error::Parse { row: 2, .. })));
        assert!(matches!(parse_csv("a,b\n1,2\n3\n"), Err(Error::Parse { row: 3, .. })));
        assert!(matches!(
            parse_csv("a,b\n1,2\n3,x\n"),
            Err(Error::Parse {
                row: 3,
                column: Some(2),
                ..
            })
        ));
        assert!(parse_csv("a\ninf\n").is_err());
    }

    #[test]
    fn awkward_values_round_trip() {
        let vals = vec![
            0.1,
            -0.0,
            1e-308,
            f64::MIN_POSITIVE / 3.0,
            1.0 / 3.0,
            -12345.678901234567,
            f64::MAX,
        ];
        let m = Matrix::from_vec(vals.len(), 1, vals.clone()).unwrap();
        let s = TimeSeriesMatrix::new(
            m,
            SeriesMeta {
                seed: None,
                burn_in_dropped: 0,
                source: SeriesSource::Generated,
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&s, &mut buf).unwrap();
        let back = parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        for (a, b) in back.data().as_slice().iter().zip(&vals) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
