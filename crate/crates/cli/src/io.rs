//! Headerless numeric CSV in, JSON and CSV artifacts out.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

/// Reads a rectangular, headerless numeric CSV. Errors name the 1-based
/// row and column of the first problem.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, String> {
    let file = std::fs::File::open(path).map_err(|e| format!("cannot open {}: {e}", path.display()))?;
    parse_matrix(file, &path.display().to_string())
}

pub fn parse_matrix<R: std::io::Read>(input: R, label: &str) -> Result<DMatrix<f64>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format!("{label}: row {}: {e}", i + 1))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, f)| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format!("{label}: row {}, column {}: '{f}' is not a finite number", i + 1, j + 1))
            })
            .collect::<Result<Vec<f64>, String>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(format!(
                    "{label}: row {} has {} columns, expected {} (ragged CSV)",
                    i + 1,
                    row.len(),
                    first.len()
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(format!("{label}: no data rows"));
    }
    let (n, m) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// A single column or a single row.
pub fn read_vector(path: &Path) -> Result<DVector<f64>, String> {
    let m = read_matrix(path)?;
    if m.ncols() == 1 {
        Ok(m.column(0).into_owned())
    } else if m.nrows() == 1 {
        Ok(m.row(0).transpose())
    } else {
        Err(format!(
            "{}: expected a single row or column, got {}×{}",
            path.display(),
            m.nrows(),
            m.ncols()
        ))
    }
}

pub fn write(path: &Path, contents: &str) -> Result<(), String> {
    std::fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rectangular_input() {
        let m = parse_matrix("1, 0\n1,1\n\n# note\n1,2\n".as_bytes(), "t").unwrap();
        assert_eq!(m.shape(), (3, 2));
        assert_eq!(m[(2, 1)], 2.0);
    }

    #[test]
    fn ragged_rows_report_location() {
        let err = parse_matrix("1,0\n1,1,5\n".as_bytes(), "Z.csv").unwrap_err();
        assert!(err.contains("row 2 has 3 columns, expected 2"), "{err}");
    }

    #[test]
    fn bad_cells_report_row_and_column() {
        let err = parse_matrix("1,0\n1,x\n".as_bytes(), "Z.csv").unwrap_err();
        assert!(err.contains("row 2, column 2"), "{err}");
        assert!(parse_matrix("1,NaN\n".as_bytes(), "Z.csv").is_err());
    }
}
