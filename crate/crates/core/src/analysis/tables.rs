use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
    Other,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "female" | "f" => Some(Gender::Female),
            "male" | "m" => Some(Gender::Male),
            "other" | "unspecified" | "" => Some(Gender::Other),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantMeta {
    pub participant_id: String,
    pub gender: Gender,
    pub age: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehavioralRecord {
    pub participant_id: String,
    pub task_id: u8,
    pub response_time_min: f64,
    pub correct: bool,
}

fn csv_err(source: &str, loc: &str, e: impl std::fmt::Display) -> Error {
    Error::schema(source, loc, e.to_string())
}

fn columns(header: &csv::StringRecord, names: &[&str], source: &str) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h.trim() == *n)
                .ok_or_else(|| Error::schema(source, "row 1", format!("missing column {n}")))
        })
        .collect()
}

pub fn read_participants<R: Read>(reader: R, source: &str) -> Result<Vec<ParticipantMeta>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r
        .headers()
        .map_err(|e| csv_err(source, "row 1", e))?
        .clone();
    let cols = columns(&header, &["participant_id", "gender", "age"], source)?;
    let mut out: Vec<ParticipantMeta> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let loc = format!("row {}", i + 2);
        let rec = rec.map_err(|e| csv_err(source, &loc, e))?;
        let get = |c: usize| rec.get(cols[c]).unwrap_or("").trim();
        let participant_id = get(0).to_string();
        if participant_id.is_empty() {
            return Err(Error::schema(source, &loc, "participant_id is empty"));
        }
        if out.iter().any(|m| m.participant_id == participant_id) {
            return Err(Error::schema(
                source,
                &loc,
                format!("duplicate participant {participant_id}"),
            ));
        }
        let gender = Gender::parse(get(1))
            .ok_or_else(|| Error::schema(source, &loc, format!("unknown gender {:?}", get(1))))?;
        let age = get(2)
            .parse::<f64>()
            .ok()
            .filter(|a| a.is_finite() && *a > 0.0)
            .ok_or_else(|| Error::schema(source, &loc, "age must be a positive number"))?;
        out.push(ParticipantMeta {
            participant_id,
            gender,
            age,
        });
    }
    if out.is_empty() {
        return Err(Error::schema(source, "row 2", "no participants"));
    }
    Ok(out)
}

pub fn read_behavior<R: Read>(reader: R, source: &str) -> Result<Vec<BehavioralRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r
        .headers()
        .map_err(|e| csv_err(source, "row 1", e))?
        .clone();
    let cols = columns(
        &header,
        &["participant_id", "task_id", "response_time_min", "correct"],
        source,
    )?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let loc = format!("row {}", i + 2);
        let rec = rec.map_err(|e| csv_err(source, &loc, e))?;
        let get = |c: usize| rec.get(cols[c]).unwrap_or("").trim();
        let participant_id = get(0).to_string();
        if participant_id.is_empty() {
            return Err(Error::schema(source, &loc, "participant_id is empty"));
        }
        let task_id = get(1)
            .parse::<u8>()
            .ok()
            .filter(|t| (2..=4).contains(t))
            .ok_or_else(|| {
                Error::schema(
                    source,
                    &loc,
                    "task_id must be 2-4 (task 1 has no questions)",
                )
            })?;
        let response_time_min = get(2)
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite() && *t > 0.0)
            .ok_or_else(|| Error::schema(source, &loc, "response_time_min must be positive"))?;
        let correct = match get(3).to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" => true,
            "0" | "false" | "no" => false,
            other => {
                return Err(Error::schema(
                    source,
                    &loc,
                    format!("correct must be a boolean, got {other:?}"),
                ))
            }
        };
        out.push(BehavioralRecord {
            participant_id,
            task_id,
            response_time_min,
            correct,
        });
    }
    Ok(out)
}

pub fn read_participants_csv(path: impl AsRef<Path>) -> Result<Vec<ParticipantMeta>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_participants(f, &path.display().to_string())
}

pub fn read_behavior_csv(path: impl AsRef<Path>) -> Result<Vec<BehavioralRecord>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_behavior(f, &path.display().to_string())
}

pub fn write_participants<W: Write>(writer: W, meta: &[ParticipantMeta]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::invalid(format!("CSV write failed: {e}"));
    w.write_record(["participant_id", "gender", "age"])
        .map_err(err)?;
    for m in meta {
        w.write_record([
            m.participant_id.as_str(),
            m.gender.as_str(),
            &m.age.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush()
        .map_err(|e| Error::invalid(format!("CSV write failed: {e}")))
}

pub fn write_behavior<W: Write>(writer: W, records: &[BehavioralRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::invalid(format!("CSV write failed: {e}"));
    w.write_record(["participant_id", "task_id", "response_time_min", "correct"])
        .map_err(err)?;
    for r in records {
        w.write_record([
            r.participant_id.as_str(),
            &r.task_id.to_string(),
            &r.response_time_min.to_string(),
            if r.correct { "1" } else { "0" },
        ])
        .map_err(err)?;
    }
    w.flush()
        .map_err(|e| Error::invalid(format!("CSV write failed: {e}")))
}
