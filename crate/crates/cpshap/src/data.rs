//! CSV ingestion with one-hot categoricals.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Read;
use std::path::Path;

use cpshap_core::Matrix;
use sha2::{Digest, Sha256};

/// A numeric design matrix and target read from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Feature column names; one-hot columns are named `column=value`.
    pub names: Vec<String>,
    pub features: Matrix,
    pub target: Vec<f64>,
    /// 0-based data-row number (header excluded) of each kept row.
    pub row_ids: Vec<usize>,
    /// Rows dropped because a cell was missing.
    pub rejected: usize,
    /// SHA-256 of the raw file contents, hex encoded.
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataError(pub String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

fn err<T>(msg: impl Into<String>) -> Result<T, DataError> {
    Err(DataError(msg.into()))
}

const MISSING: [&str; 5] = ["", "NA", "NaN", "nan", "null"];

fn is_missing(cell: &str) -> bool {
    MISSING.contains(&cell.trim())
}

pub fn load_csv(path: &Path, target: &str, categoricals: &[String]) -> Result<Table, DataError> {
    let file = std::fs::File::open(path)
        .map_err(|e| DataError(format!("cannot open {}: {e}", path.display())))?;
    read_csv(file, target, categoricals)
}

/// Reads a headered, comma-separated table. Rows with a missing cell are
/// dropped and counted; any other unparsable cell is an error.
pub fn read_csv<R: Read>(
    mut reader: R,
    target: &str,
    categoricals: &[String],
) -> Result<Table, DataError> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| DataError(format!("read failed: {e}")))?;
    let fingerprint = hex(&Sha256::digest(&bytes));

    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let header: Vec<String> = csv
        .headers()
        .map_err(|e| DataError(format!("bad header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    let position = |name: &str| header.iter().position(|h| h == name);
    let Some(target_col) = position(target) else {
        return err(format!("target column `{target}` not found"));
    };
    let mut is_cat = vec![false; header.len()];
    for c in categoricals {
        match position(c) {
            Some(i) if i == target_col => return err("the target cannot be categorical"),
            Some(i) => is_cat[i] = true,
            None => return err(format!("categorical column `{c}` not found")),
        }
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut row_ids = Vec::new();
    let mut rejected = 0;
    for (line, rec) in csv.records().enumerate() {
        let rec = rec.map_err(|e| DataError(format!("row {}: {e}", line + 2)))?;
        if rec.len() != header.len() {
            return err(format!(
                "row {} has {} cells, header has {}",
                line + 2,
                rec.len(),
                header.len()
            ));
        }
        if rec.iter().any(is_missing) {
            rejected += 1;
            continue;
        }
        rows.push(rec.iter().map(str::to_owned).collect());
        row_ids.push(line);
    }
    if rows.is_empty() {
        return err("no complete rows");
    }

    // Output column layout: file order, categoricals expanded in place.
    enum Col {
        Numeric(usize),
        OneHot(usize, String),
    }
    let mut layout = Vec::new();
    let mut names = Vec::new();
    for (i, name) in header.iter().enumerate() {
        if i == target_col {
            continue;
        }
        if is_cat[i] {
            let levels: BTreeSet<&str> = rows.iter().map(|r| r[i].as_str()).collect();
            for level in levels {
                names.push(format!("{name}={level}"));
                layout.push(Col::OneHot(i, level.to_owned()));
            }
        } else {
            names.push(name.clone());
            layout.push(Col::Numeric(i));
        }
    }
    if layout.is_empty() {
        return err("no feature columns besides the target");
    }

    let parse = |row: usize, col: usize, cell: &str| -> Result<f64, DataError> {
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => err(format!(
                "row {}: column `{}` holds non-numeric value `{cell}`",
                row + 2,
                header[col]
            )),
        }
    };
    let mut data = Vec::with_capacity(rows.len() * layout.len());
    let mut y = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        for col in &layout {
            data.push(match col {
                Col::Numeric(i) => parse(r, *i, &row[*i])?,
                Col::OneHot(i, level) => f64::from(u8::from(row[*i] == *level)),
            });
        }
        y.push(parse(r, target_col, &row[target_col])?);
    }
    let features = Matrix::new(rows.len(), layout.len(), data)
        .map_err(|e| DataError(e.to_string()))?;
    Ok(Table {
        names,
        features,
        target: y,
        row_ids,
        rejected,
        fingerprint,
    })
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes a header plus rows, for generated data sets.
pub fn write_csv(
    path: &Path,
    names: &[String],
    target_name: &str,
    features: &Matrix,
    target: &[f64],
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    header.push(target_name);
    w.write_record(&header)?;
    for (row, y) in features.iter_rows().zip(target) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_and_missing_rows() {
        let text = "a,color,y\n1,red,2\n2,blue,3\n,red,4\n3,green,NA\n4,red,5\n";
        let t = read_csv(text.as_bytes(), "y", &["color".into()]).unwrap();
        assert_eq!(t.names, ["a", "color=blue", "color=red"]);
        assert_eq!(t.rejected, 2);
        assert_eq!(t.target, [2.0, 3.0, 5.0]);
        assert_eq!(t.row_ids, [0, 1, 4]);
        assert_eq!(t.features.row(0), [1.0, 0.0, 1.0]);
        assert_eq!(t.features.row(1), [2.0, 1.0, 0.0]);
        assert_eq!(t.fingerprint.len(), 64);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_csv("a,y\n1,2\n".as_bytes(), "z", &[]).is_err());
        assert!(read_csv("a,y\nx,2\n".as_bytes(), "y", &[]).is_err());
        assert!(read_csv("a,y\n,2\n".as_bytes(), "y", &[]).is_err());
        assert!(read_csv("y\n2\n".as_bytes(), "y", &[]).is_err());
        assert!(read_csv("a,y\n1,2\n".as_bytes(), "y", &["y".into()]).is_err());
    }
}
