//! Dataset CSV.
//!
//! ```text
//! # npe-dataset v1 classes=<C> dim=<d>
//! label,f0,f1,...,f{d-1}
//! ```
//!
//! Floats are written with 17 significant digits so that a save/load round
//! trip reproduces every bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::LabeledDataset;

const MAGIC: &str = "# npe-dataset v1";

pub fn write_dataset<W: Write>(ds: &LabeledDataset, mut out: W) -> Result<()> {
    writeln!(out, "{MAGIC} classes={} dim={}", ds.num_classes(), ds.dim())?;
    let mut line = String::new();
    for (row, &y) in ds.features().iter_rows().zip(ds.labels()) {
        line.clear();
        line.push_str(&y.to_string());
        for &x in row {
            line.push(',');
            line.push_str(&format!("{x:.16e}"));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_dataset(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    write_dataset(ds, BufWriter::new(file))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_dataset(BufReader::new(file), path)
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let rest = line.strip_prefix(MAGIC)?;
    let mut classes = None;
    let mut dim = None;
    for field in rest.split_whitespace() {
        let (key, value) = field.split_once('=')?;
        match key {
            "classes" => classes = value.parse().ok(),
            "dim" => dim = value.parse().ok(),
            _ => return None,
        }
    }
    Some((classes?, dim?))
}

pub fn read_dataset<R: Read>(input: R, path: impl Into<PathBuf>) -> Result<LabeledDataset> {
    let path = path.into();
    let err = |line: usize, msg: String| Error::Format {
        path: path.clone(),
        line,
        msg,
    };
    let mut lines = BufReader::new(input).lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(err(1, "empty file".into())),
    };
    let (num_classes, dim) = parse_header(header.trim_end())
        .ok_or_else(|| err(1, format!("expected `{MAGIC} classes=<C> dim=<d>`")))?;

    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label: usize = fields
            .next()
            .unwrap_or_default()
            .trim()
            .parse()
            .map_err(|e| err(lineno, format!("bad label: {e}")))?;
        if label >= num_classes {
            return Err(err(lineno, format!("label {label} >= classes {num_classes}")));
        }
        let start = values.len();
        for field in fields {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| err(lineno, format!("bad value `{field}`: {e}")))?;
            values.push(v);
        }
        if values.len() - start != dim {
            return Err(err(
                lineno,
                format!("expected {dim} features, found {}", values.len() - start),
            ));
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(err(2, "no data rows".into()));
    }
    let features = Matrix::from_vec(labels.len(), dim, values)?;
    LabeledDataset::new(features, labels, num_classes)
}
