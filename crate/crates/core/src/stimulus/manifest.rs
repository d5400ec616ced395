use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Session bundle index: one entry per (task, probe frequency) segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub schema_version: u32,
    pub participant_id: String,
    pub sample_rate: u32,
    pub probe_amplitude: f64,
    pub notch_width_hz: f64,
    pub segments: Vec<ManifestSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSegment {
    pub task_id: u8,
    pub f_s_hz: f64,
    pub file: String,
    /// Offset of the segment on the continuous session timeline.
    pub start_sample: u64,
    /// Exclusive end on the session timeline.
    pub end_sample: u64,
    pub norm_gain_db: f64,
}

impl ManifestSegment {
    pub fn len(&self) -> usize {
        (self.end_sample - self.start_sample) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.end_sample == self.start_sample
    }

    pub fn norm_gain(&self) -> f64 {
        10f64.powf(self.norm_gain_db / 20.0)
    }
}

impl SessionManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// Parse and validate, reporting the JSON path of the first violation.
    pub fn from_json(text: &str, source_name: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| {
            Error::schema(
                source_name,
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        validate(&value, source_name)?;
        let manifest: SessionManifest = serde_json::from_value(value)
            .map_err(|e| Error::schema(source_name, "$", e.to_string()))?;
        manifest.check_invariants(source_name)?;
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Probe frequencies in first-appearance order.
    pub fn frequencies(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for s in &self.segments {
            if !out.contains(&s.f_s_hz) {
                out.push(s.f_s_hz);
            }
        }
        out
    }

    fn check_invariants(&self, source_name: &str) -> Result<()> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::schema(
                source_name,
                "$.schema_version",
                format!("unsupported version {}", self.schema_version),
            ));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        let mut prev_end = 0u64;
        for (i, s) in self.segments.iter().enumerate() {
            let at = |field: &str| format!("$.segments[{i}].{field}");
            if !(1..=4).contains(&s.task_id) {
                return Err(Error::schema(
                    source_name,
                    at("task_id"),
                    "task_id must be 1..=4",
                ));
            }
            if !(s.f_s_hz > 0.0 && s.f_s_hz < nyquist) {
                return Err(Error::schema(
                    source_name,
                    at("f_s_hz"),
                    "frequency outside (0, Nyquist)",
                ));
            }
            if s.end_sample <= s.start_sample {
                return Err(Error::schema(
                    source_name,
                    at("end_sample"),
                    "segment must be non-empty",
                ));
            }
            if s.start_sample < prev_end {
                return Err(Error::schema(
                    source_name,
                    at("start_sample"),
                    "segments overlap or are unordered",
                ));
            }
            prev_end = s.end_sample;
        }
        Ok(())
    }
}

fn validate(v: &Value, source_name: &str) -> Result<()> {
    let fail = |path: String, msg: &str| Err(Error::schema(source_name, path, msg.to_string()));
    let Some(obj) = v.as_object() else {
        return fail("$".into(), "expected an object");
    };
    let top: [(&str, fn(&Value) -> bool, &str); 5] = [
        (
            "schema_version",
            Value::is_u64,
            "expected an unsigned integer",
        ),
        ("participant_id", Value::is_string, "expected a string"),
        ("sample_rate", Value::is_u64, "expected an unsigned integer"),
        ("probe_amplitude", Value::is_number, "expected a number"),
        ("notch_width_hz", Value::is_number, "expected a number"),
    ];
    for (key, check, msg) in top {
        match obj.get(key) {
            None => return fail(format!("$.{key}"), "missing field"),
            Some(x) if !check(x) => return fail(format!("$.{key}"), msg),
            _ => {}
        }
    }
    let Some(segments) = obj.get("segments") else {
        return fail("$.segments".into(), "missing field");
    };
    let Some(segments) = segments.as_array() else {
        return fail("$.segments".into(), "expected an array");
    };
    let fields: [(&str, fn(&Value) -> bool, &str); 6] = [
        ("task_id", Value::is_u64, "expected an unsigned integer"),
        ("f_s_hz", Value::is_number, "expected a number"),
        ("file", Value::is_string, "expected a string"),
        (
            "start_sample",
            Value::is_u64,
            "expected an unsigned integer",
        ),
        ("end_sample", Value::is_u64, "expected an unsigned integer"),
        ("norm_gain_db", Value::is_number, "expected a number"),
    ];
    for (i, seg) in segments.iter().enumerate() {
        let Some(seg) = seg.as_object() else {
            return fail(format!("$.segments[{i}]"), "expected an object");
        };
        for (key, check, msg) in fields {
            match seg.get(key) {
                None => return fail(format!("$.segments[{i}].{key}"), "missing field"),
                Some(x) if !check(x) => return fail(format!("$.segments[{i}].{key}"), msg),
                _ => {}
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SessionManifest {
        SessionManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            participant_id: "P01".into(),
            sample_rate: 48_000,
            probe_amplitude: 0.1,
            notch_width_hz: 200.0,
            segments: vec![
                ManifestSegment {
                    task_id: 1,
                    f_s_hz: 1000.0,
                    file: "t1_f1000.wav".into(),
                    start_sample: 0,
                    end_sample: 48_000,
                    norm_gain_db: 0.0,
                },
                ManifestSegment {
                    task_id: 2,
                    f_s_hz: 1000.0,
                    file: "t2_f1000.wav".into(),
                    start_sample: 96_000,
                    end_sample: 144_000,
                    norm_gain_db: -1.234_567_891_234_5,
                },
            ],
        }
    }

    #[test]
    fn reparse_regenerates_identical_bytes() {
        let m = sample();
        let text = m.to_json();
        let back = SessionManifest::from_json(&text, "mem").unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn violations_carry_json_paths() {
        let mut v: Value = serde_json::from_str(&sample().to_json()).unwrap();
        v["segments"][1]["f_s_hz"] = Value::String("fast".into());
        let err = SessionManifest::from_json(&v.to_string(), "mem").unwrap_err();
        match err {
            Error::Schema { location, .. } => assert_eq!(location, "$.segments[1].f_s_hz"),
            e => panic!("{e}"),
        }
        let mut v: Value = serde_json::from_str(&sample().to_json()).unwrap();
        v.as_object_mut().unwrap().remove("schema_version");
        let err = SessionManifest::from_json(&v.to_string(), "mem").unwrap_err();
        assert!(matches!(err, Error::Schema { location, .. } if location == "$.schema_version"));
        assert!(SessionManifest::from_json("{not json", "mem").is_err());
    }

    #[test]
    fn overlapping_segments_are_rejected() {
        let mut m = sample();
        m.segments[1].start_sample = 10;
        assert!(SessionManifest::from_json(&m.to_json(), "mem").is_err());
    }
}
