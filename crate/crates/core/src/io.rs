//! File formats read and written by the solver.
//!
//! Site indices in files are 1-based. Floating point values are written with
//! 17 significant digits so every value round-trips exactly.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cost::{plan_pair_marginal, CostMatrix, PairDensity};
use crate::error::{Error, Result};
use crate::gencol::{GenColResult, IterationRecord};
use crate::state_space::{Column, Grid};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Per-run summary, written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub final_cost: f64,
    pub reference_cost: Option<f64>,
    pub matched: Option<bool>,
    pub accepted_columns: usize,
    pub sampled_columns: usize,
    pub termination: String,
    pub wall_seconds: f64,
}

impl SummaryRecord {
    pub fn new(result: &GenColResult, reference: Option<f64>, tol: f64, wall_seconds: f64) -> Self {
        Self {
            final_cost: result.cost,
            reference_cost: reference,
            matched: reference.map(|r| (result.cost - r).abs() <= tol),
            accepted_columns: result.trace.accepted_columns,
            sampled_columns: result.trace.sampled_columns,
            termination: result.trace.termination.as_str().to_string(),
            wall_seconds,
        }
    }
}

pub const TRACE_HEADER: &str = "iteration,value,samples,pool_size,gain";

pub fn trace_line(r: &IterationRecord) -> String {
    let gain = r.gain.map(fmt_f64).unwrap_or_default();
    format!("{},{},{},{},{}", r.iteration, fmt_f64(r.value), r.samples, r.pool_size, gain)
}

/// Streams trace rows to a CSV file, flushing after each row.
pub struct TraceWriter {
    out: BufWriter<File>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{TRACE_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, record: &IterationRecord) -> Result<()> {
        writeln!(self.out, "{}", trace_line(record))?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_trace(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut w = TraceWriter::create(path)?;
    for r in records {
        writeln!(w.out, "{}", trace_line(r))?;
    }
    w.out.flush()?;
    Ok(())
}

/// `i,j,value` for the nonzero entries.
pub fn write_pair_density(path: &Path, density: &PairDensity) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "i,j,value")?;
    for (i, j, v) in density.nonzeros(0.0) {
        writeln!(out, "{},{},{}", i + 1, j + 1, fmt_f64(v))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_potential(path: &Path, grid: &Grid, dual: &[f64]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    if grid.dim() == 1 {
        writeln!(out, "site,coordinate,potential")?;
    } else {
        let xs: Vec<String> = (1..=grid.dim()).map(|d| format!("x{d}")).collect();
        writeln!(out, "site,{},potential", xs.join(","))?;
    }
    for (i, (site, y)) in grid.sites().zip(dual).enumerate() {
        let coords: Vec<String> = site.iter().map(|&x| fmt_f64(x)).collect();
        writeln!(out, "{},{},{}", i + 1, coords.join(","), fmt_f64(*y))?;
    }
    out.flush()?;
    Ok(())
}

/// `weight,n1,…,nℓ`, one configuration per row.
pub fn write_columns(path: &Path, plan: &[(Column, f64)]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let len = plan.first().map_or(0, |(c, _)| c.len());
    let names: Vec<String> = (1..=len).map(|i| format!("n{i}")).collect();
    writeln!(out, "weight,{}", names.join(","))?;
    for (col, w) in plan {
        let occ: Vec<String> = col.occupancy().iter().map(|k| k.to_string()).collect();
        writeln!(out, "{},{}", fmt_f64(*w), occ.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_columns(path: &Path) -> Result<Vec<(Column, f64)>> {
    let rows = read_numeric_rows(path)?;
    rows.into_iter()
        .map(|row| {
            let (w, occ) = row.split_first().ok_or_else(|| parse_err(path, "empty row"))?;
            let occ = occ
                .iter()
                .map(|&v| {
                    if v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
                        Ok(v as u32)
                    } else {
                        Err(parse_err(path, &format!("occupancy {v} is not a nonnegative integer")))
                    }
                })
                .collect::<Result<Vec<u32>>>()?;
            Ok((Column::new(occ)?, *w))
        })
        .collect()
}

/// Writes every output of a finished run into `dir`.
pub fn emit_results(result: &GenColResult, grid: &Grid, dir: &Path, summary: &SummaryRecord) -> Result<()> {
    fs::create_dir_all(dir)?;
    let density = plan_pair_marginal(&result.plan)?;
    write_pair_density(&dir.join("pair_density.csv"), &density)?;
    write_potential(&dir.join("potential.csv"), grid, &result.dual)?;
    write_columns(&dir.join("columns.csv"), &result.plan)?;
    write_trace(&dir.join("trace.csv"), &result.trace.records)?;
    write_json(&dir.join("summary.json"), summary)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn parse_err(path: &Path, msg: &str) -> Error {
    Error::Parse { path: path.to_path_buf(), msg: msg.to_string() }
}

/// Reads a headerless or single-header CSV of numbers; rows may differ in length.
fn read_numeric_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().filter(|f| !f.is_empty()).map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) if !row.is_empty() => rows.push(row),
            Ok(_) => {}
            Err(_) if n == 0 => {} // header
            Err(e) => return Err(parse_err(path, &format!("row {}: {e}", n + 1))),
        }
    }
    Ok(rows)
}

/// Sites and weights from a CSV with rows `coord_1, …, coord_d, weight`.
pub fn read_sites_csv(path: &Path) -> Result<(usize, Vec<f64>, Vec<f64>)> {
    let rows = read_numeric_rows(path)?;
    let width = rows.first().map(Vec::len).ok_or_else(|| parse_err(path, "no rows"))?;
    if width < 2 {
        return Err(parse_err(path, "each row needs at least one coordinate and a weight"));
    }
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for row in rows {
        if row.len() != width {
            return Err(parse_err(path, "rows differ in length"));
        }
        coords.extend_from_slice(&row[..width - 1]);
        weights.push(row[width - 1]);
    }
    Ok((width - 1, coords, weights))
}

/// Neighbour lists from a CSV with rows `site, neighbour, neighbour, …` (1-based).
pub fn read_neighbors_csv(path: &Path, len: usize) -> Result<Vec<Vec<usize>>> {
    let mut lists = vec![Vec::new(); len];
    for row in read_numeric_rows(path)? {
        let idx: Vec<usize> = row
            .iter()
            .map(|&v| {
                if v >= 1.0 && v.fract() == 0.0 && (v as usize) <= len {
                    Ok(v as usize - 1)
                } else {
                    Err(parse_err(path, &format!("{v} is not a site index in 1..={len}")))
                }
            })
            .collect::<Result<_>>()?;
        let (site, nbrs) = idx.split_first().expect("nonempty row");
        lists[*site].extend_from_slice(nbrs);
    }
    Ok(lists)
}

/// ℓ×ℓ cost matrix, one row per line.
pub fn read_cost_matrix_csv(path: &Path) -> Result<CostMatrix> {
    CostMatrix::from_rows(read_numeric_rows(path)?)
}
