//! CSV files: observation tables, per-row score files and study output.
//!
//! Observation tables have a header with `y`, `t`, an optional `pi` and the
//! covariates `x1..xp`; any further columns are ignored. Floats are written
//! in their shortest round-trip form.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use imave::RawTable;
use serde::Serialize;

use crate::error::CliError;

fn reader(path: &Path) -> Result<csv::Reader<File>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn parse_f64(s: &str, column: &str, row: usize) -> Result<f64, CliError> {
    s.parse::<f64>().map_err(|_| CliError::Parse(format!("row {row}, column `{column}`: `{s}` is not a number")))
}

/// Positions of the named columns in `header`.
fn locate(header: &csv::StringRecord) -> BTreeMap<String, usize> {
    header.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect()
}

/// Reads an observation table.
pub fn read_observations(path: &Path) -> Result<RawTable, CliError> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(CliError::csv)?.clone();
    let cols = locate(&header);
    let need = |name: &str| cols.get(name).copied().ok_or_else(|| CliError::Parse(format!("missing column `{name}`")));
    let (iy, it) = (need("y")?, need("t")?);
    let ipi = cols.get("pi").copied();
    let mut ix = Vec::new();
    while let Some(&c) = cols.get(&format!("x{}", ix.len() + 1)) {
        ix.push(c);
    }
    if ix.is_empty() {
        return Err(CliError::Parse("no covariate columns `x1..xp`".into()));
    }
    let mut raw = RawTable { y: Vec::new(), t: Vec::new(), pi: ipi.map(|_| Vec::new()), x: Vec::new(), levels: None };
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(CliError::csv)?;
        let row = r + 1;
        raw.y.push(parse_f64(&rec[iy], "y", row)?);
        raw.t.push(rec[it].to_string());
        if let (Some(i), Some(pi)) = (ipi, raw.pi.as_mut()) {
            pi.push(parse_f64(&rec[i], "pi", row)?);
        }
        raw.x.push(
            ix.iter()
                .enumerate()
                .map(|(k, &c)| parse_f64(&rec[c], &format!("x{}", k + 1), row))
                .collect::<Result<_, _>>()?,
        );
    }
    Ok(raw)
}

/// Covariates `x1..xp` of any table, row-major.
pub fn read_covariates(path: &Path, p: usize) -> Result<Vec<f64>, CliError> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(CliError::csv)?.clone();
    let cols = locate(&header);
    let ix: Vec<usize> = (1..=p)
        .map(|j| cols.get(&format!("x{j}")).copied().ok_or_else(|| CliError::Parse(format!("missing column `x{j}`"))))
        .collect::<Result<_, _>>()?;
    let mut x = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(CliError::csv)?;
        for (k, &c) in ix.iter().enumerate() {
            x.push(parse_f64(&rec[c], &format!("x{}", k + 1), r + 1)?);
        }
    }
    Ok(x)
}

/// Writes an observation table with columns `y, t, pi, x1..xp`.
pub fn write_observations(path: &Path, raw: &RawTable) -> Result<(), CliError> {
    let p = raw.x.first().map_or(0, Vec::len);
    let mut header = vec!["y".to_string(), "t".to_string()];
    if raw.pi.is_some() {
        header.push("pi".into());
    }
    header.extend((1..=p).map(|j| format!("x{j}")));
    let mut rows = Vec::with_capacity(raw.y.len());
    for i in 0..raw.y.len() {
        let mut row = vec![raw.y[i].to_string(), raw.t[i].clone()];
        if let Some(pi) = &raw.pi {
            row.push(pi[i].to_string());
        }
        row.extend(raw.x[i].iter().map(f64::to_string));
        rows.push(row);
    }
    write_rows(path, &header, &rows)
}

/// A numeric column of any CSV file.
pub fn read_column(path: &Path, name: &str) -> Result<Vec<f64>, CliError> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(CliError::csv)?.clone();
    let c = *locate(&header).get(name).ok_or_else(|| CliError::Parse(format!("missing column `{name}`")))?;
    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(CliError::csv)?;
        out.push(parse_f64(&rec[c], name, r + 1)?);
    }
    Ok(out)
}

/// Writes string rows under `header`.
pub fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(CliError::csv)?;
    w.write_record(header).map_err(CliError::csv)?;
    for row in rows {
        w.write_record(row).map_err(CliError::csv)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes one row per record, with the header taken from the field names.
pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(CliError::csv)?;
    for r in records {
        w.serialize(r).map_err(CliError::csv)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes `text` to `path`, or to standard output when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}
