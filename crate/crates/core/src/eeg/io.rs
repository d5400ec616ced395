use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EegRecording, Marker};
use crate::error::{Error, Result};

pub const MARKERS_FILE: &str = "markers.json";

/// Sidecar of an EEG CSV: sample rate and segment markers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerFile {
    pub schema_version: u32,
    pub sample_rate: f64,
    pub markers: Vec<Marker>,
}

pub fn read_markers(path: impl AsRef<Path>) -> Result<MarkerFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: MarkerFile = serde_json::from_str(&text).map_err(|e| {
        Error::schema(
            path.display().to_string(),
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    for (i, w) in m.markers.windows(2).enumerate() {
        if w[1].start_sample < w[0].start_sample {
            return Err(Error::schema(
                path.display().to_string(),
                format!("$.markers[{}].start_sample", i + 1),
                "markers must be sorted",
            ));
        }
    }
    Ok(m)
}

pub fn write_markers(path: impl AsRef<Path>, markers: &MarkerFile) -> Result<()> {
    let path = path.as_ref();
    let mut s = serde_json::to_string_pretty(markers).expect("markers serialize");
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Read `sample_index,<channel>...` CSV plus its markers sidecar.
pub fn read_eeg_csv(
    csv_path: impl AsRef<Path>,
    markers_path: impl AsRef<Path>,
) -> Result<EegRecording> {
    let path = csv_path.as_ref();
    let markers = read_markers(markers_path)?;
    let source = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r
        .headers()
        .map_err(|e| Error::schema(&source, "row 1", e.to_string()))?
        .clone();
    if header.get(0).map(str::trim) != Some("sample_index") {
        return Err(Error::schema(
            &source,
            "row 1",
            "first column must be sample_index",
        ));
    }
    let names: Vec<String> = header
        .iter()
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    if names.is_empty() {
        return Err(Error::schema(&source, "row 1", "no channel columns"));
    }
    let mut channels = vec![Vec::new(); names.len()];
    let mut expected_index: Option<u64> = None;
    for (i, rec) in r.records().enumerate() {
        let loc = format!("row {}", i + 2);
        let rec = rec.map_err(|e| Error::schema(&source, &loc, e.to_string()))?;
        let idx: u64 = rec
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| {
                Error::schema(&source, &loc, "sample_index must be a non-negative integer")
            })?;
        if let Some(e) = expected_index {
            if idx != e {
                return Err(Error::schema(
                    &source,
                    &loc,
                    format!("sample_index {idx}, expected {e}"),
                ));
            }
        }
        expected_index = Some(idx + 1);
        for (c, ch) in channels.iter_mut().enumerate() {
            let v: f64 = rec
                .get(c + 1)
                .and_then(|s| s.trim().parse().ok())
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| {
                    Error::schema(
                        &source,
                        &loc,
                        format!("{} is not a finite number", names[c]),
                    )
                })?;
            ch.push(v);
        }
    }
    if channels[0].is_empty() {
        return Err(Error::schema(&source, "row 2", "no samples"));
    }
    EegRecording::new(channels, markers.sample_rate, names, markers.markers)
}

/// Write the recording as CSV plus `markers.json` next to it.
pub fn write_eeg_csv(
    rec: &EegRecording,
    csv_path: impl AsRef<Path>,
    markers_path: impl AsRef<Path>,
) -> Result<()> {
    let path = csv_path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let err = |e: csv::Error| Error::invalid(format!("CSV write failed: {e}"));
    let mut header = vec!["sample_index".to_string()];
    header.extend(rec.channel_names.iter().cloned());
    w.write_record(&header).map_err(err)?;
    for t in 0..rec.n_samples() {
        let mut row = vec![t.to_string()];
        row.extend(rec.channels.iter().map(|c| c[t].to_string()));
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    write_markers(
        markers_path,
        &MarkerFile {
            schema_version: 1,
            sample_rate: rec.sample_rate,
            markers: rec.markers.clone(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rec = EegRecording::new(
            vec![vec![1.5, -2.25, 3.0], vec![0.1, 0.2, 0.3]],
            250.0,
            vec!["Fp1".into(), "Cz".into()],
            vec![Marker {
                label: "t1".into(),
                task_id: 1,
                start_sample: 0,
                end_sample: 3,
            }],
        )
        .unwrap();
        let (c, m) = (dir.path().join("eeg.csv"), dir.path().join(MARKERS_FILE));
        write_eeg_csv(&rec, &c, &m).unwrap();
        assert_eq!(read_eeg_csv(&c, &m).unwrap(), rec);
        std::fs::write(&c, "sample_index,A,B\n0,1,2\n1,x,2\n").unwrap();
        match read_eeg_csv(&c, &m) {
            Err(Error::Schema { location, .. }) => assert_eq!(location, "row 3"),
            other => panic!("{other:?}"),
        }
    }
}
