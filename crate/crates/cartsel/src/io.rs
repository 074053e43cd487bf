//! CSV ingestion and emission. RFC-4180-style files with a header row,
//! '.' decimal separator, UTF-8.

use std::path::Path;

use cartsel_core::{Dataset, Framework};

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Malformed(#[from] csv::Error),
    #[error("header has no column named {0:?}")]
    MissingTarget(String),
    #[error("file has no data rows")]
    Empty,
    #[error("missing value at row {row}, column {col} ({name})")]
    MissingValue { row: usize, col: usize, name: String },
    #[error("cannot parse {value:?} at row {row}, column {col} ({name})")]
    Parse {
        row: usize,
        col: usize,
        name: String,
        value: String,
    },
    #[error("non-finite value at row {row}, column {col} ({name})")]
    NonFinite { row: usize, col: usize, name: String },
    #[error("response not in {{0,1}} at row {row}: {value}")]
    ResponseNotBinary { row: usize, value: f64 },
    #[error(transparent)]
    Data(#[from] cartsel_core::data::DataError),
}

/// Loads a dataset from a CSV file. The `target` column becomes the
/// response; the remaining columns become the variables, in header order.
/// Rows and columns in errors are 1-based (the header is row 0).
pub fn load_csv(path: &Path, target: &str, framework: Framework) -> Result<Dataset, CsvError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => CsvError::Read {
                path: path.display().to_string(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => CsvError::Malformed(e),
        })?;
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let target_col = headers
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| CsvError::MissingTarget(target.to_string()))?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(c, _)| *c != target_col)
        .map(|(_, h)| h.clone())
        .collect();

    let parse_cell = |row: usize, col: usize, raw: &str| -> Result<f64, CsvError> {
        let name = headers[col].clone();
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Err(CsvError::MissingValue {
                row,
                col: col + 1,
                name,
            });
        }
        let value: f64 = trimmed.parse().map_err(|_| CsvError::Parse {
            row,
            col: col + 1,
            name: name.clone(),
            value: raw.to_string(),
        })?;
        if !value.is_finite() {
            return Err(CsvError::NonFinite {
                row,
                col: col + 1,
                name,
            });
        }
        Ok(value)
    };

    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        for (col, raw) in record.iter().enumerate() {
            let value = parse_cell(row, col, raw)?;
            if col == target_col {
                if framework == Framework::Classification && value != 0.0 && value != 1.0 {
                    return Err(CsvError::ResponseNotBinary { row, value });
                }
                y.push(value);
            } else {
                x.push(value);
            }
        }
    }
    if y.is_empty() {
        return Err(CsvError::Empty);
    }
    let n = y.len();
    let p = names.len();
    Ok(Dataset::new(x, n, p, y, names, framework)?)
}

/// Writes a dataset back out with the response in a trailing column.
/// Floats use the shortest decimal form that parses back exactly.
pub fn write_csv(ds: &Dataset, path: &Path, target: &str) -> Result<(), CsvError> {
    let mut out = String::new();
    for name in ds.names() {
        out.push_str(name);
        out.push(',');
    }
    out.push_str(target);
    out.push('\n');
    for i in 0..ds.n() {
        for j in 0..ds.p() {
            out.push_str(&format!("{},", ds.x(i, j)));
        }
        out.push_str(&format!("{}\n", ds.y(i)));
    }
    std::fs::write(path, out).map_err(|source| CsvError::Write {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_simple_file() {
        let f = write_tmp("a,b,y\n1,2,3\n4,5,6\n0.5,-1,2.25\n");
        let ds = load_csv(f.path(), "y", Framework::Regression).unwrap();
        assert_eq!((ds.n(), ds.p()), (3, 2));
        assert_eq!(ds.names(), ["a", "b"]);
        assert_eq!(ds.x(2, 0), 0.5);
        assert_eq!(ds.y(2), 2.25);
    }

    #[test]
    fn target_position_does_not_matter() {
        let f = write_tmp("y,a\n1,2\n3,4\n");
        let ds = load_csv(f.path(), "y", Framework::Regression).unwrap();
        assert_eq!(ds.names(), ["a"]);
        assert_eq!(ds.y(1), 3.0);
        assert_eq!(ds.x(1, 0), 4.0);
    }

    #[test]
    fn missing_value_reports_coordinates() {
        let f = write_tmp("a,y\n1,2\n,3\n");
        let err = load_csv(f.path(), "y", Framework::Regression).unwrap_err();
        assert_eq!(
            err.to_string(),
            "missing value at row 2, column 1 (a)"
        );
    }

    #[test]
    fn parse_failure_reports_coordinates() {
        let f = write_tmp("a,y\n1,2\nx,3\n");
        let err = load_csv(f.path(), "y", Framework::Regression).unwrap_err();
        assert!(err.to_string().contains("row 2, column 1"), "{err}");
    }

    #[test]
    fn classification_domain_checked() {
        let f = write_tmp("a,y\n1,0\n2,1\n3,2\n");
        let err = load_csv(f.path(), "y", Framework::Classification).unwrap_err();
        assert_eq!(err.to_string(), "response not in {0,1} at row 3: 2");
    }

    #[test]
    fn missing_target_column() {
        let f = write_tmp("a,b\n1,2\n");
        let err = load_csv(f.path(), "y", Framework::Regression).unwrap_err();
        assert!(matches!(err, CsvError::MissingTarget(_)));
    }

    #[test]
    fn round_trip_preserves_values() {
        let ds = cartsel_core::data::gen_breiman(50, 4, cartsel_core::data::BREIMAN_NOISE_SD)
            .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, f.path(), "y").unwrap();
        let back = load_csv(f.path(), "y", Framework::Regression).unwrap();
        assert_eq!(&ds, &back);
    }
}
