//! File formats: measures, grids, and numeric tables.
//!
//! Everything is whitespace-separated text with `#` comment headers and
//! 17 significant digits, so f64 values round-trip bitwise.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use motsink_core::DiscreteMeasure;
use ndarray::{Array1, Array2};

use crate::{CliError, Result};

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn write_file(path: &Path, content: String) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: path_str(dir),
                source,
            })?;
        }
    }
    let mut f = fs::File::create(path).map_err(|source| CliError::Io {
        path: path_str(path),
        source,
    })?;
    f.write_all(content.as_bytes()).map_err(|source| CliError::Io {
        path: path_str(path),
        source,
    })
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path_str(path),
        source,
    })
}

fn parse_field(path: &Path, line_no: usize, field: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| CliError::Parse {
        path: path_str(path),
        line: line_no,
        msg: format!("cannot parse '{field}' as a number"),
    })
}

/// One atom per line: `d` coordinate columns then the weight, preceded by
/// a `# d=<d> n=<n>` header.
pub fn write_measure_file(path: &Path, measure: &DiscreteMeasure<f64>) -> Result<()> {
    let d = measure.dim();
    let n = measure.len();
    let mut out = String::with_capacity(32 * n);
    out.push_str(&format!("# d={d} n={n}\n"));
    for i in 0..n {
        for ax in 0..d {
            out.push_str(&format!("{:.16e} ", measure.points()[(i, ax)]));
        }
        out.push_str(&format!("{:.16e}\n", measure.weights()[i]));
    }
    write_file(path, out)
}

pub fn read_measure_file(path: &Path) -> Result<DiscreteMeasure<f64>> {
    let content = read_to_string(path)?;
    let mut header: Option<(usize, usize)> = None;
    let mut coords: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for (line_no, raw) in content.lines().enumerate() {
        let line_no = line_no + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if header.is_none() {
                let mut d = None;
                let mut n = None;
                for tok in rest.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("d=") {
                        d = v.parse::<usize>().ok();
                    }
                    if let Some(v) = tok.strip_prefix("n=") {
                        n = v.parse::<usize>().ok();
                    }
                }
                if let (Some(d), Some(n)) = (d, n) {
                    header = Some((d, n));
                }
            }
            continue;
        }
        let (d, _) = header.ok_or_else(|| CliError::Parse {
            path: path_str(path),
            line: line_no,
            msg: "data before the '# d=<d> n=<n>' header".into(),
        })?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != d + 1 {
            return Err(CliError::Parse {
                path: path_str(path),
                line: line_no,
                msg: format!("expected {} columns, found {}", d + 1, fields.len()),
            });
        }
        for f in &fields[..d] {
            coords.push(parse_field(path, line_no, f)?);
        }
        let w = parse_field(path, line_no, fields[d])?;
        if w < 0.0 {
            return Err(CliError::Parse {
                path: path_str(path),
                line: line_no,
                msg: format!("negative weight {w}"),
            });
        }
        weights.push(w);
    }
    let (d, n) = header.ok_or_else(|| CliError::Parse {
        path: path_str(path),
        line: 1,
        msg: "missing '# d=<d> n=<n>' header".into(),
    })?;
    if weights.len() != n {
        return Err(CliError::Parse {
            path: path_str(path),
            line: content.lines().count(),
            msg: format!("header says n={n} but found {} atoms", weights.len()),
        });
    }
    let points = Array2::from_shape_vec((n, d), coords).map_err(|e| CliError::Parse {
        path: path_str(path),
        line: 1,
        msg: e.to_string(),
    })?;
    DiscreteMeasure::new(points, Array1::from(weights)).map_err(CliError::Core)
}

/// Dense matrix with a `# rows=<r> cols=<c>` header, row-major.
pub fn write_grid_file(path: &Path, grid: &Array2<f64>) -> Result<()> {
    let (r, c) = grid.dim();
    let mut out = String::with_capacity(24 * r * c);
    out.push_str(&format!("# rows={r} cols={c}\n"));
    for row in grid.outer_iter() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    write_file(path, out)
}

pub fn read_grid_file(path: &Path) -> Result<Array2<f64>> {
    let content = read_to_string(path)?;
    let mut dims: Option<(usize, usize)> = None;
    let mut data: Vec<f64> = Vec::new();
    for (line_no, raw) in content.lines().enumerate() {
        let line_no = line_no + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if dims.is_none() {
                let mut r = None;
                let mut c = None;
                for tok in rest.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("rows=") {
                        r = v.parse::<usize>().ok();
                    }
                    if let Some(v) = tok.strip_prefix("cols=") {
                        c = v.parse::<usize>().ok();
                    }
                }
                if let (Some(r), Some(c)) = (r, c) {
                    dims = Some((r, c));
                }
            }
            continue;
        }
        let (_, c) = dims.ok_or_else(|| CliError::Parse {
            path: path_str(path),
            line: line_no,
            msg: "data before the '# rows=<r> cols=<c>' header".into(),
        })?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != c {
            return Err(CliError::Parse {
                path: path_str(path),
                line: line_no,
                msg: format!("expected {c} columns, found {}", fields.len()),
            });
        }
        for f in fields {
            data.push(parse_field(path, line_no, f)?);
        }
    }
    let (r, c) = dims.ok_or_else(|| CliError::Parse {
        path: path_str(path),
        line: 1,
        msg: "missing '# rows=<r> cols=<c>' header".into(),
    })?;
    Array2::from_shape_vec((r, c), data).map_err(|e| CliError::Parse {
        path: path_str(path),
        line: 1,
        msg: e.to_string(),
    })
}

/// Plot-ready numeric table: comment lines, a `# columns:` line, then one
/// row per record.
pub fn write_series_file(
    path: &Path,
    comments: &[String],
    columns: &[&str],
    rows: &[Vec<f64>],
) -> Result<()> {
    let mut out = String::new();
    for c in comments {
        out.push_str(&format!("# {c}\n"));
    }
    out.push_str(&format!("# columns: {}\n", columns.join(" ")));
    for row in rows {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    write_file(path, out)
}

pub fn read_series_file(path: &Path) -> Result<Vec<Vec<f64>>> {
    let content = read_to_string(path)?;
    let mut rows = Vec::new();
    for (line_no, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for f in line.split_whitespace() {
            row.push(parse_field(path, line_no + 1, f)?);
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    #[test]
    fn measure_round_trip_is_bitwise() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.dat");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = Array2::from_shape_fn((7, 2), |_| rng.gen::<f64>() - 0.5);
        let mut w = Array1::from_shape_fn(7, |_| rng.gen::<f64>() + 0.01);
        let s = w.sum();
        w.mapv_inplace(|v| v / s);
        let m = DiscreteMeasure::new(pts, w).unwrap();
        write_measure_file(&path, &m).unwrap();
        let back = read_measure_file(&path).unwrap();
        assert_eq!(m.points(), back.points());
        assert_eq!(m.weights(), back.weights());
    }

    #[test]
    fn slightly_off_weight_sum_is_renormalized() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.dat");
        fs::write(&path, "# d=1 n=2\n0.0 0.5\n1.0 0.499999999\n").unwrap();
        let m = read_measure_file(&path).unwrap();
        assert!((m.weights().sum() - 1.0f64).abs() < 1e-12);
    }

    #[test]
    fn ragged_row_errors_with_line_number() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.dat");
        fs::write(&path, "# d=2 n=2\n0.0 0.0 0.5\n1.0 0.5\n").unwrap();
        match read_measure_file(&path) {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn negative_weight_is_a_parse_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.dat");
        fs::write(&path, "# d=1 n=2\n0.0 1.5\n1.0 -0.5\n").unwrap();
        match read_measure_file(&path) {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn grid_and_series_round_trip() {
        let dir = tempdir().unwrap();
        let gpath = dir.path().join("g.dat");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = Array2::from_shape_fn((3, 4), |_| rng.gen::<f64>());
        write_grid_file(&gpath, &g).unwrap();
        assert_eq!(read_grid_file(&gpath).unwrap(), g);

        let spath = dir.path().join("s.dat");
        let rows = vec![vec![1.0, 2.5e-3], vec![2.0, 7.25e4]];
        write_series_file(&spath, &["a demo table".into()], &["x", "y"], &rows).unwrap();
        assert_eq!(read_series_file(&spath).unwrap(), rows);
    }
}
