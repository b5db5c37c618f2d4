use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::Dataset;
use crate::error::{Error, Result};
use crate::nd::{Label, Tensor2};

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

fn label_matches(cell: &str, positive: &str) -> bool {
    let (c, p) = (cell.trim(), positive.trim());
    if c == p {
        return true;
    }
    match (c.parse::<f64>(), p.parse::<f64>()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

/// Reads a headered CSV (optionally `.gz`) into a [`Dataset`].
///
/// Every column except `label_column` must be numeric. Rows whose label equals
/// `positive_value` (string match, or numeric match when both parse) become
/// [`Label::Positive`]; all others are negative. Row order is preserved. Error positions are
/// 1-based file lines and columns, so the first data row is line 2.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, positive_value: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let reader: Box<dyn Read> = if is_gzip(path) {
        Box::new(GzDecoder::new(BufReader::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let parse_err = |row: usize, col: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        col,
        msg,
    };

    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, 0, e.to_string()))?
        .clone();
    if headers.is_empty() {
        return Err(Error::EmptyData("CSV has no header"));
    }
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: label_column.to_string(),
        })?;
    let d = headers.len() - 1;

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| parse_err(line, 0, e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(parse_err(
                line,
                rec.len().min(headers.len()) + 1,
                format!("expected {} fields, found {}", headers.len(), rec.len()),
            ));
        }
        for (j, cell) in rec.iter().enumerate() {
            if j == label_idx {
                labels.push(if label_matches(cell, positive_value) {
                    Label::Positive
                } else {
                    Label::Negative
                });
                continue;
            }
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| parse_err(line, j + 1, format!("non-numeric value `{cell}`")))?;
            if !v.is_finite() {
                return Err(parse_err(line, j + 1, format!("non-finite value `{cell}`")));
            }
            data.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyData("CSV has a header but no data rows"));
    }
    Dataset::new(Tensor2::from_vec(labels.len(), d, data)?, labels)
}

/// Writes features as `x1..xd` plus a label column. Floats use the shortest representation
/// that parses back to the same value, so a write/read round trip is bit-exact.
pub fn write_csv(
    ds: &Dataset,
    path: impl AsRef<Path>,
    label_column: &str,
    positive_value: &str,
    negative_value: &str,
) -> Result<()> {
    let path = path.as_ref();
    let file = BufWriter::new(File::create(path)?);
    let sink: Box<dyn Write> = if is_gzip(path) {
        Box::new(GzEncoder::new(file, Compression::default()))
    } else {
        Box::new(file)
    };
    let mut w = csv::Writer::from_writer(sink);
    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut header: Vec<String> = (1..=ds.dim()).map(|j| format!("x{j}")).collect();
    header.push(label_column.to_string());
    w.write_record(&header).map_err(to_io)?;
    for (row, label) in ds.features.iter_rows().zip(&ds.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        rec.push(if label.is_positive() { positive_value } else { negative_value }.to_string());
        w.write_record(&rec).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}
