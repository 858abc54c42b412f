//! Cluster CSV files: header `id,y1..yd,d1..dd`, one cluster per row.
//!
//! A record written as `{1,(67,67,119,67),(1,1,1,1)}` becomes the row
//! `1,67,67,119,67,1,1,1,1`. Missing values are not allowed; censoring is
//! expressed through the indicators only.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use censvine::ObservedCluster;

use crate::error::{CliError, CliResult};

fn data_err(line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("line {line}: {msg}"))
}

/// Dimension implied by a header, or an error naming what is wrong.
fn header_dim(header: &csv::StringRecord) -> CliResult<usize> {
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols.len() < 3 || cols.len().is_multiple_of(2) || !cols[0].eq_ignore_ascii_case("id") {
        return Err(data_err(1, "header must be id,y1..yd,d1..dd"));
    }
    let d = (cols.len() - 1) / 2;
    for j in 0..d {
        let (y, dl) = (format!("y{}", j + 1), format!("d{}", j + 1));
        if !cols[1 + j].eq_ignore_ascii_case(&y) || !cols[1 + d + j].eq_ignore_ascii_case(&dl) {
            return Err(data_err(1, format!("header must be id,y1..y{d},d1..d{d}")));
        }
    }
    Ok(d)
}

pub fn read_clusters<R: Read>(reader: R) -> CliResult<Vec<ObservedCluster>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| CliError::Data(e.to_string()))?.clone();
    if header.is_empty() {
        return Err(CliError::Data("no clusters".into()));
    }
    let d = header_dim(&header)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Data(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 * d + 1 {
            return Err(data_err(line, format!("expected {} fields, found {}", 2 * d + 1, rec.len())));
        }
        let mut y = Vec::with_capacity(d);
        for (j, field) in rec.iter().skip(1).take(d).enumerate() {
            let t: f64 = field
                .parse()
                .map_err(|_| data_err(line, format!("y{} = '{field}' is not a number", j + 1)))?;
            y.push(t);
        }
        let mut delta = Vec::with_capacity(d);
        for (j, field) in rec.iter().skip(1 + d).enumerate() {
            match field {
                "0" => delta.push(0),
                "1" => delta.push(1),
                _ => return Err(data_err(line, format!("d{} = '{field}' must be 0 or 1", j + 1))),
            }
        }
        let c = ObservedCluster::new(&rec[0], y, delta).map_err(|e| data_err(line, e))?;
        out.push(c);
    }
    if out.is_empty() {
        return Err(CliError::Data("no clusters".into()));
    }
    Ok(out)
}

pub fn load_clusters(path: &Path) -> CliResult<Vec<ObservedCluster>> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    read_clusters(file).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_clusters<W: Write>(writer: W, data: &[ObservedCluster]) -> CliResult<()> {
    let d = data.first().map_or(0, |c| c.dim());
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend((1..=d).map(|j| format!("y{j}")));
    header.extend((1..=d).map(|j| format!("d{j}")));
    let io = |e: csv::Error| CliError::Data(e.to_string());
    wtr.write_record(&header).map_err(io)?;
    for c in data {
        let mut row = vec![c.id.clone()];
        row.extend(c.y.iter().map(|t| t.to_string()));
        row.extend(c.delta.iter().map(|v| v.to_string()));
        wtr.write_record(&row).map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}
