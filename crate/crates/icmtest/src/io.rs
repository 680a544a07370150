//! Numeric CSV input.
//!
//! Accepts comma or whitespace delimiters with an optional single header
//! row; rejects ragged rows and unparsable fields with their position.

use std::fs;
use std::path::Path;

use icmtest_core::Mat;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {col}: {detail}")]
    Parse {
        line: usize,
        col: usize,
        detail: String,
    },
    #[error("ragged row at line {line}: expected {expected} fields, got {got}")]
    RaggedRow {
        line: usize,
        expected: usize,
        got: usize,
    },
}

fn split_line(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Parses CSV text into an observation matrix.
pub fn parse_matrix(text: &str) -> Result<Mat, IoError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    let mut saw_data = false;
    let mut first_content_line = true;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_line(line);
        let parsed: Result<Vec<f64>, usize> = fields
            .iter()
            .enumerate()
            .map(|(c, f)| f.parse::<f64>().map_err(|_| c + 1))
            .collect();
        match parsed {
            Ok(values) => {
                if !saw_data {
                    width = values.len();
                    saw_data = true;
                } else if values.len() != width {
                    return Err(IoError::RaggedRow {
                        line: idx + 1,
                        expected: width,
                        got: values.len(),
                    });
                }
                rows.push(values);
            }
            Err(col) => {
                // A single leading header row is allowed.
                if first_content_line {
                    first_content_line = false;
                    continue;
                }
                return Err(IoError::Parse {
                    line: idx + 1,
                    col,
                    detail: format!("not a number: {:?}", fields[col - 1]),
                });
            }
        }
        first_content_line = false;
    }
    if rows.is_empty() {
        return Err(IoError::Parse {
            line: 0,
            col: 0,
            detail: "no numeric rows found".into(),
        });
    }
    let n = rows.len();
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Mat::from_vec(n, width, data))
}

pub fn read_matrix(path: &Path) -> Result<Mat, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_matrix(&text)
}
