use std::path::Path;

use super::{Direction, HrirSet, PreprocessFlags};
use crate::error::{Error, Result};

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let csv_err = |message: String| Error::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_err(e.to_string()))?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(e.to_string()))?;
        let row = record
            .iter()
            .filter(|f| !f.is_empty())
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| csv_err(format!("row {}: {f:?}: {e}", line + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if !row.is_empty() {
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Reads an `N x M` matrix CSV (one HRIR per row) and an `N x 2` directions
/// CSV of `az_deg, el_deg`. Neither file has a header row.
pub fn load_csv(matrix: impl AsRef<Path>, directions: impl AsRef<Path>, sample_rate_hz: u32) -> Result<HrirSet> {
    let rows = read_rows(matrix.as_ref())?;
    let dir_rows = read_rows(directions.as_ref())?;
    let dirs = dir_rows
        .iter()
        .enumerate()
        .map(|(i, r)| match r.as_slice() {
            [az, el] => Ok(Direction::new(*az, *el)),
            _ => Err(Error::Csv {
                path: directions.as_ref().to_path_buf(),
                message: format!("row {} has {} fields, expected 2", i + 1, r.len()),
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    HrirSet::from_columns(&rows, sample_rate_hz, dirs, PreprocessFlags::default())
}
