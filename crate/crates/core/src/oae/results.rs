use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const RESULTS_HEADER: [&str; 7] = [
    "participant_id",
    "task_id",
    "f_s_hz",
    "magnitude",
    "noise_floor",
    "sed",
    "window_count",
];

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub participant_id: String,
    pub task_id: u8,
    pub f_s_hz: f64,
    pub magnitude: f64,
    pub noise_floor: f64,
    /// Empty for the baseline task.
    pub sed: Option<f64>,
    pub window_count: usize,
}

fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn write_results<W: Write>(writer: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::invalid(format!("CSV write failed: {e}"));
    w.write_record(RESULTS_HEADER).map_err(to_err)?;
    for r in rows {
        w.write_record([
            r.participant_id.clone(),
            r.task_id.to_string(),
            sig9(r.f_s_hz),
            sig9(r.magnitude),
            sig9(r.noise_floor),
            r.sed.map(sig9).unwrap_or_default(),
            r.window_count.to_string(),
        ])
        .map_err(to_err)?;
    }
    w.flush()
        .map_err(|e| Error::invalid(format!("CSV write failed: {e}")))?;
    Ok(())
}

pub fn write_results_csv(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_results(std::io::BufWriter::new(file), rows)
}

pub fn read_results<R: Read>(reader: R, source_name: &str) -> Result<Vec<ResultRow>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = r
        .headers()
        .map_err(|e| Error::schema(source_name, "row 1", e.to_string()))?
        .clone();
    let idx = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::schema(source_name, "row 1", format!("missing column {name}")))
    };
    let cols: Vec<usize> = RESULTS_HEADER
        .iter()
        .map(|c| idx(c))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let loc = format!("row {}", i + 2);
        let rec = rec.map_err(|e| Error::schema(source_name, &loc, e.to_string()))?;
        let field = |c: usize| rec.get(cols[c]).unwrap_or("").trim();
        let num = |c: usize| -> Result<f64> {
            field(c)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::schema(
                        source_name,
                        &loc,
                        format!("{} is not a finite number", RESULTS_HEADER[c]),
                    )
                })
        };
        let participant_id = field(0).to_string();
        if participant_id.is_empty() {
            return Err(Error::schema(source_name, &loc, "participant_id is empty"));
        }
        let task_id = field(1)
            .parse::<u8>()
            .ok()
            .filter(|t| (1..=4).contains(t))
            .ok_or_else(|| Error::schema(source_name, &loc, "task_id must be 1-4"))?;
        let f_s_hz = num(2)?;
        let magnitude = num(3)?;
        let noise_floor = num(4)?;
        if f_s_hz <= 0.0 || magnitude < 0.0 || noise_floor < 0.0 {
            return Err(Error::schema(
                source_name,
                &loc,
                "f_s_hz must be positive and magnitudes non-negative",
            ));
        }
        let sed = if field(5).is_empty() {
            None
        } else {
            Some(num(5)?)
                .filter(|s| *s >= 0.0)
                .map(Some)
                .ok_or_else(|| Error::schema(source_name, &loc, "sed must be non-negative"))?
        };
        if task_id == 1 && sed.is_some() {
            return Err(Error::schema(
                source_name,
                &loc,
                "sed must be empty for task 1",
            ));
        }
        if task_id != 1 && sed.is_none() {
            return Err(Error::schema(
                source_name,
                &loc,
                "sed is required for tasks 2-4",
            ));
        }
        let window_count = field(6)
            .parse::<usize>()
            .ok()
            .filter(|&w| w >= 1)
            .ok_or_else(|| {
                Error::schema(source_name, &loc, "window_count must be a positive integer")
            })?;
        rows.push(ResultRow {
            participant_id,
            task_id,
            f_s_hz,
            magnitude,
            noise_floor,
            sed,
            window_count,
        });
    }
    Ok(rows)
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_results(file, &path.display().to_string())
}
