//! Comma-separated point files: one point per line, an optional single
//! header line, decimal floating point values.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::domain::{BoundarySample, Polygon2D};
use crate::error::{Result, TksdError};

/// Parse rows of numbers. A first line that does not parse as numbers is
/// treated as a header.
pub fn read_points<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| TksdError::Parse {
            line: e.position().map_or(idx as u64 + 1, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if idx == 0 => continue,
            Err(e) => {
                return Err(TksdError::Parse {
                    line,
                    msg: format!("not a number: {e}"),
                })
            }
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TksdError::Parse {
                line,
                msg: "NaN and infinite values are not allowed".into(),
            });
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(TksdError::Parse {
                    line,
                    msg: format!("expected {w} columns, found {}", values.len()),
                })
            }
            _ => {}
        }
        rows.push(values);
    }
    let d = width.unwrap_or(0);
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

pub fn parse_polygon_csv<R: Read>(reader: R) -> Result<Polygon2D> {
    let pts = read_points(reader)?;
    if pts.nrows() > 0 && pts.ncols() != 2 {
        return Err(TksdError::Parse {
            line: 1,
            msg: format!("polygon files need 2 columns, found {}", pts.ncols()),
        });
    }
    let vertices = (0..pts.nrows())
        .map(|i| [pts[(i, 0)], pts[(i, 1)]])
        .collect();
    Polygon2D::new(vertices)
}

pub fn load_polygon_csv(path: impl AsRef<Path>) -> Result<Polygon2D> {
    parse_polygon_csv(File::open(path)?)
}

pub fn write_points<W: Write>(points: &DMatrix<f64>, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let header: Vec<String> = if points.ncols() == 2 {
        vec!["x".into(), "y".into()]
    } else {
        (0..points.ncols()).map(|l| format!("x{l}")).collect()
    };
    writeln!(w, "{}", header.join(","))?;
    for i in 0..points.nrows() {
        let row: Vec<String> = points.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_boundary_csv(sample: &BoundarySample, path: impl AsRef<Path>) -> Result<()> {
    write_points(sample.points(), File::create(path)?)
}

/// Boundary points without an attached source domain.
pub fn load_boundary_csv(path: impl AsRef<Path>) -> Result<BoundarySample> {
    BoundarySample::new(read_points(File::open(path)?)?, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_file() {
        let p = parse_polygon_csv("0,0\n1,0\n1,1\n0,1".as_bytes()).unwrap();
        assert_eq!(p.num_edges(), 4);
        assert!(p.contains([0.5, 0.5]));
        let with_header = parse_polygon_csv("x,y\n0,0\n1,0\n1,1\n0,1\n".as_bytes()).unwrap();
        assert_eq!(with_header, p);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(parse_polygon_csv("0,0\n1,0\n".as_bytes()).is_err());
        let err = parse_polygon_csv("0,0\n1,0\nfoo,1\n0,1".as_bytes()).unwrap_err();
        assert!(matches!(err, TksdError::Parse { line: 3, .. }), "{err}");
        let err = parse_polygon_csv("0,0\n1,NaN\n1,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TksdError::Parse { line: 2, .. }), "{err}");
        assert!(parse_polygon_csv("0,0\n1,1\n1,0\n0,1\n".as_bytes()).is_err());
        assert!(parse_polygon_csv("0,0,0\n1,0,0\n1,1,0\n".as_bytes()).is_err());
    }

    #[test]
    fn boundary_round_trip_is_bit_exact() {
        let pts = DMatrix::from_row_slice(
            3,
            3,
            &[
                0.1,
                1.0 / 3.0,
                -2.5e-17,
                1e300,
                -7.0,
                0.2 + 0.1,
                f64::MIN_POSITIVE,
                5.0,
                9.99,
            ],
        );
        let sample = BoundarySample::new(pts.clone(), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        save_boundary_csv(&sample, &path).unwrap();
        let back = load_boundary_csv(&path).unwrap();
        assert_eq!(back.points(), &pts);
    }
}
