//! CSV output.
//!
//! Trajectories: first column `t`, then one column per coefficient named
//! `z{stream}_{i}_x{j}` (output `i`, initial variable `j`, both 1-based).
//! Observer matrices: long format with columns `matrix,row,col,value`.
//! Every number is written with 17 significant digits, so reading a file
//! back reproduces the values exactly.

use std::path::Path;

use qobserver_core::Mat;

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Content { line: u64, message: String },
}

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_value(s: &str, line: u64) -> Result<f64, CsvError> {
    s.trim().parse().map_err(|_| CsvError::Content {
        line,
        message: format!("not a number: {s:?}"),
    })
}

pub fn trajectory_header(stream: &str, outputs: usize, vars: usize) -> Vec<String> {
    let mut header = vec!["t".to_string()];
    for i in 1..=outputs {
        for j in 1..=vars {
            header.push(format!("z{stream}_{i}_x{j}"));
        }
    }
    header
}

/// One row per time; `coeffs[k]` is the `outputs × vars` coefficient matrix at `times[k]`.
pub fn write_trajectory(
    path: &Path,
    stream: &str,
    times: &[f64],
    coeffs: &[Mat],
) -> Result<(), CsvError> {
    let (rows, cols) = coeffs.first().map_or((0, 0), |c| c.shape());
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trajectory_header(stream, rows, cols))?;
    let mut record = Vec::with_capacity(1 + rows * cols);
    for (t, c) in times.iter().zip(coeffs) {
        record.clear();
        record.push(format_value(*t));
        for i in 0..rows {
            for j in 0..cols {
                record.push(format_value(c[(i, j)]));
            }
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Header and numeric rows of a trajectory file.
pub fn read_trajectory(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CsvError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(
            rec.iter()
                .map(|s| parse_value(s, line))
                .collect::<Result<_, _>>()?,
        );
    }
    Ok((header, rows))
}

pub fn write_matrices(path: &Path, matrices: &[(&str, &Mat)]) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["matrix", "row", "col", "value"])?;
    for (name, m) in matrices {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                w.write_record([
                    name.to_string(),
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    format_value(m[(i, j)]),
                ])?;
            }
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Matrices in file order. Dimensions are the largest row and column seen.
pub fn read_matrices(path: &Path) -> Result<Vec<(String, Mat)>, CsvError> {
    let mut r = csv::Reader::from_path(path)?;
    type Entries = Vec<(usize, usize, f64)>;
    let mut entries: Vec<(String, Entries)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| CsvError::Content { line, message };
        if rec.len() != 4 {
            return Err(bad(format!("expected 4 fields, got {}", rec.len())));
        }
        let index = |s: &str| -> Result<usize, CsvError> {
            match s.trim().parse::<usize>() {
                Ok(i) if i > 0 => Ok(i - 1),
                _ => Err(bad(format!("bad index {s:?}"))),
            }
        };
        let (i, j) = (index(&rec[1])?, index(&rec[2])?);
        let v = parse_value(&rec[3], line)?;
        match entries.iter_mut().find(|(n, _)| n == &rec[0]) {
            Some((_, e)) => e.push((i, j, v)),
            None => entries.push((rec[0].to_string(), vec![(i, j, v)])),
        }
    }
    Ok(entries
        .into_iter()
        .map(|(name, e)| {
            let rows = e.iter().map(|x| x.0 + 1).max().unwrap_or(0);
            let cols = e.iter().map(|x| x.1 + 1).max().unwrap_or(0);
            let mut m = Mat::zeros(rows, cols);
            for (i, j, v) in e {
                m[(i, j)] = v;
            }
            (name, m)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [
            0.1,
            1.0 / 3.0,
            -2.0f64.sqrt(),
            1e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(format_value(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_value(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn matrices_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let a = Mat::from_fn(3, 2, |i, j| (i as f64 + 1.0) / (j as f64 + 7.0));
        let b = Mat::from_row_slice(1, 1, &[-0.0]);
        write_matrices(&path, &[("A", &a), ("B", &b)]).unwrap();
        let back = read_matrices(&path).unwrap();
        assert_eq!(back[0], ("A".to_string(), a));
        assert_eq!(back[1].1, b);
    }

    #[test]
    fn trajectory_columns() {
        assert_eq!(
            trajectory_header("p", 2, 2),
            ["t", "zp_1_x1", "zp_1_x2", "zp_2_x1", "zp_2_x2"]
        );
    }
}
