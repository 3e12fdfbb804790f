use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;
use crate::toydata::LabeledDataset;

use super::{fmt_real, write_text};

/// Labeled rows first, then unlabeled rows with label `-1`.
pub fn format_dataset<T: Scalar>(ds: &LabeledDataset<T>) -> String {
    let d = ds.dim();
    let mut out = header(d, &["label"]);
    for (row, &c) in ds.features.row_iter().zip(&ds.class_ids) {
        push_row(&mut out, row, &c.to_string());
    }
    for row in ds.unlabeled.row_iter() {
        push_row(&mut out, row, "-1");
    }
    out
}

fn header(d: usize, extra: &[&str]) -> String {
    let mut cols: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    cols.extend(extra.iter().map(|s| s.to_string()));
    let mut h = cols.join(",");
    h.push('\n');
    h
}

fn push_row<T: Scalar>(out: &mut String, row: &[T], tail: &str) {
    for &v in row {
        out.push_str(&fmt_real(v));
        out.push(',');
    }
    out.push_str(tail);
    out.push('\n');
}

pub fn write_dataset<T: Scalar>(path: &Path, ds: &LabeledDataset<T>) -> Result<()> {
    write_text(path, &format_dataset(ds))
}

pub fn read_dataset<T: Scalar>(path: &Path, num_classes: Option<usize>) -> Result<LabeledDataset<T>> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text, path, num_classes)
}

/// Parses dataset text; `source` only labels errors.
///
/// Without `num_classes` the class count is one more than the largest label.
pub fn parse_dataset<T: Scalar>(
    text: &str,
    source: &Path,
    num_classes: Option<usize>,
) -> Result<LabeledDataset<T>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, head) = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))?;
    let cols: Vec<&str> = head.split(',').collect();
    let d = cols.len().saturating_sub(1);
    let valid_header = d >= 1
        && cols[d] == "label"
        && cols[..d].iter().enumerate().all(|(j, c)| *c == format!("x{j}"));
    if !valid_header {
        return Err(parse_err(1, format!("expected header x0,...,x{{d-1}},label, got `{head}`")));
    }

    let mut labeled = Vec::new();
    let mut ids = Vec::new();
    let mut unlabeled = Vec::new();
    for (line, raw) in lines {
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != d + 1 {
            return Err(parse_err(line, format!("expected {} fields, found {}", d + 1, fields.len())));
        }
        let mut row = Vec::with_capacity(d);
        for f in &fields[..d] {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("`{f}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value `{f}`")));
            }
            row.push(T::lit(v));
        }
        let label: i64 = fields[d]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("`{}` is not an integer label", fields[d])))?;
        let invalid = Error::InvalidLabel {
            path: source.to_path_buf(),
            line,
            label,
            classes: num_classes,
        };
        match label {
            -1 => unlabeled.extend(row),
            l if l >= 0 => {
                let l = l as usize;
                if num_classes.is_some_and(|c| l >= c) {
                    return Err(invalid);
                }
                labeled.extend(row);
                ids.push(l);
            }
            _ => return Err(invalid),
        }
    }
    let classes = num_classes.unwrap_or_else(|| ids.iter().max().map_or(0, |m| m + 1));
    let n = ids.len();
    let m = unlabeled.len() / d;
    LabeledDataset::new(
        DenseMatrix::from_vec(n, d, labeled)?,
        ids,
        DenseMatrix::from_vec(m, d, unlabeled)?,
        classes,
    )
}

/// One row of refinement output.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinedRow<T> {
    pub features: Vec<T>,
    /// `None` when the row fails the threshold.
    pub pred_class: Option<usize>,
    /// Argmax of the pseudo-label, regardless of the threshold. Not written.
    pub top_class: usize,
    pub conf: T,
    /// `conf > τ`; written to the `masked` column as 1/0.
    pub mask: bool,
}

/// Columns `x0..x{d-1},pred_class,conf,masked`; rows below the threshold
/// carry `pred_class = -1` and `masked = 0`.
pub fn write_refined<T: Scalar>(path: &Path, rows: &[RefinedRow<T>]) -> Result<()> {
    let d = rows.first().map_or(0, |r| r.features.len());
    let mut out = header(d, &["pred_class", "conf", "masked"]);
    for r in rows {
        let pred = r.pred_class.map_or("-1".to_string(), |c| c.to_string());
        let tail = format!("{pred},{},{}", fmt_real(r.conf), u8::from(r.mask));
        push_row(&mut out, &r.features, &tail);
    }
    write_text(path, &out)
}
