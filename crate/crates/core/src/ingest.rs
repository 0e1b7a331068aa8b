//! Execution-log ingestion: CSV parsing, validation, persistence, and the
//! derivation of duration error samples.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::distributions::SampleSet;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u64 = 1;

pub const CSV_HEADER: [&str; 8] = [
    "record_id",
    "sequence_id",
    "operator_id",
    "season",
    "skill",
    "predicted_s",
    "observed_s",
    "timestamp",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Winter,
    Spring,
    Summer,
    Autumn,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Winter, Season::Spring, Season::Summer, Season::Autumn];

    /// Meteorological season, northern hemisphere (Dec-Feb is winter).
    pub fn from_month(month: u32) -> Season {
        match month {
            12 | 1 | 2 => Season::Winter,
            3..=5 => Season::Spring,
            6..=8 => Season::Summer,
            _ => Season::Autumn,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Season::Winter => "winter",
            Season::Spring => "spring",
            Season::Summer => "summer",
            Season::Autumn => "autumn",
        }
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Season {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "winter" => Ok(Season::Winter),
            "spring" => Ok(Season::Spring),
            "summer" => Ok(Season::Summer),
            "autumn" | "fall" => Ok(Season::Autumn),
            other => Err(Error::domain(format!("unknown season '{other}'"))),
        }
    }
}

/// One validated execution-log row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub record_id: String,
    pub sequence_id: String,
    pub operator_id: String,
    pub season: Season,
    /// Carried through from the log; not used by any computation.
    pub skill: Option<u8>,
    pub predicted_s: f64,
    pub observed_s: f64,
    pub timestamp: DateTime<Utc>,
}

impl TaskRecord {
    pub fn group_key(&self) -> GroupKey {
        GroupKey {
            sequence_id: self.sequence_id.clone(),
            operator_id: self.operator_id.clone(),
            season: self.season,
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.record_id.is_empty() || self.sequence_id.is_empty() || self.operator_id.is_empty() {
            return Err("empty identifier".into());
        }
        if !(self.predicted_s.is_finite() && self.observed_s.is_finite()) {
            return Err("bad number".into());
        }
        if self.predicted_s <= 0.0 || self.observed_s <= 0.0 {
            return Err("non-positive duration".into());
        }
        if matches!(self.skill, Some(s) if s > 10) {
            return Err("skill out of range".into());
        }
        Ok(())
    }
}

/// Analysis unit: one operator on one sequence in one season.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub sequence_id: String,
    pub operator_id: String,
    pub season: Season,
}

impl GroupKey {
    pub fn new(sequence_id: impl Into<String>, operator_id: impl Into<String>, season: Season) -> Self {
        GroupKey {
            sequence_id: sequence_id.into(),
            operator_id: operator_id.into(),
            season,
        }
    }

    pub fn sequence_key(&self) -> SequenceKey {
        SequenceKey::new(self.sequence_id.clone(), self.season)
    }
}

/// A task sequence within one season; the unit operators are ranked in.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SequenceKey {
    pub sequence_id: String,
    pub season: Season,
}

impl SequenceKey {
    pub fn new(sequence_id: impl Into<String>, season: Season) -> Self {
        SequenceKey {
            sequence_id: sequence_id.into(),
            season,
        }
    }
}

impl fmt::Display for SequenceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.sequence_id, self.season)
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.sequence_id, self.operator_id, self.season)
    }
}

/// Signed duration error of one record; positive means the task ran late.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub group: GroupKey,
    pub error_s: f64,
    pub nominal_s: f64,
    pub timestamp: DateTime<Utc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: u64,
    pub reason: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

/// An immutable, versioned set of validated records plus the rejects report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub schema_version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<DateTime<Utc>>,
    pub records: Vec<TaskRecord>,
    pub rejects: Vec<Reject>,
}

impl Snapshot {
    pub fn new(records: Vec<TaskRecord>) -> Result<Self> {
        let snap = Snapshot {
            schema_version: SCHEMA_VERSION,
            created_at: None,
            records,
            rejects: Vec::new(),
        };
        snap.validate()?;
        Ok(snap)
    }

    pub fn with_created_at(mut self, at: DateTime<Utc>) -> Self {
        self.created_at = Some(at);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            r.check()
                .map_err(|why| Error::format(format!("record {}: {why}", r.record_id)))?;
            if !seen.insert(r.record_id.as_str()) {
                return Err(Error::format(format!("duplicate record_id {}", r.record_id)));
            }
        }
        Ok(())
    }

    /// Sequence ids present, sorted.
    pub fn sequences(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.records.iter().map(|r| r.sequence_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

/// Per-sequence overview across seasons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceListing {
    pub sequence_id: String,
    pub seasons: Vec<Season>,
    pub operators: Vec<String>,
    pub record_count: usize,
}

pub fn list_sequences(snapshot: &Snapshot) -> Vec<SequenceListing> {
    let mut by_id: BTreeMap<&str, (BTreeSet<Season>, BTreeSet<&str>, usize)> = BTreeMap::new();
    for r in &snapshot.records {
        let e = by_id.entry(&r.sequence_id).or_default();
        e.0.insert(r.season);
        e.1.insert(&r.operator_id);
        e.2 += 1;
    }
    by_id
        .into_iter()
        .map(|(id, (seasons, operators, count))| SequenceListing {
            sequence_id: id.to_string(),
            seasons: seasons.into_iter().collect(),
            operators: operators.into_iter().map(str::to_string).collect(),
            record_count: count,
        })
        .collect()
}

pub fn compute_error(record: &TaskRecord) -> ErrorSample {
    ErrorSample {
        group: record.group_key(),
        error_s: record.observed_s - record.predicted_s,
        nominal_s: record.predicted_s,
        timestamp: record.timestamp,
    }
}

/// Error samples per group, each group in chronological order (stable for
/// equal timestamps).
pub fn group_error_samples(snapshot: &Snapshot) -> BTreeMap<GroupKey, Vec<ErrorSample>> {
    let mut groups: BTreeMap<GroupKey, Vec<ErrorSample>> = BTreeMap::new();
    for r in &snapshot.records {
        groups.entry(r.group_key()).or_default().push(compute_error(r));
    }
    for samples in groups.values_mut() {
        samples.sort_by_key(|s| s.timestamp);
    }
    groups
}

pub fn group_errors(snapshot: &Snapshot) -> BTreeMap<GroupKey, SampleSet> {
    group_error_samples(snapshot)
        .into_iter()
        .map(|(k, v)| {
            let values = v.into_iter().map(|s| s.error_s).collect();
            // Records are validated finite, so this cannot fail.
            (k, SampleSet::new(values).expect("finite errors"))
        })
        .collect()
}

struct RowError {
    reason: &'static str,
    detail: String,
}

impl RowError {
    fn new(reason: &'static str, detail: impl Into<String>) -> Self {
        RowError {
            reason,
            detail: detail.into(),
        }
    }
}

fn parse_duration(name: &str, raw: &str) -> std::result::Result<f64, RowError> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| RowError::new("bad number", format!("{name} = {raw:?}")))?;
    if !v.is_finite() {
        return Err(RowError::new("bad number", format!("{name} = {raw:?}")));
    }
    if v <= 0.0 {
        return Err(RowError::new("non-positive duration", format!("{name} = {raw}")));
    }
    Ok(v)
}

fn parse_row(fields: &[&str]) -> std::result::Result<TaskRecord, RowError> {
    if fields.len() != CSV_HEADER.len() {
        return Err(RowError::new(
            "wrong field count",
            format!("expected {}, found {}", CSV_HEADER.len(), fields.len()),
        ));
    }
    let id = |i: usize| -> std::result::Result<String, RowError> {
        let v = fields[i].trim();
        if v.is_empty() {
            Err(RowError::new("empty identifier", CSV_HEADER[i]))
        } else {
            Ok(v.to_string())
        }
    };
    let record_id = id(0)?;
    let sequence_id = id(1)?;
    let operator_id = id(2)?;
    let timestamp = DateTime::parse_from_rfc3339(fields[7].trim())
        .map_err(|e| RowError::new("bad timestamp", format!("{:?}: {e}", fields[7])))?
        .with_timezone(&Utc);
    let season = match fields[3].trim() {
        "" => Season::from_month(timestamp.month()),
        s => s
            .parse()
            .map_err(|_| RowError::new("unknown season", format!("{s:?}")))?,
    };
    let skill = match fields[4].trim() {
        "" => None,
        s => match s.parse::<u8>() {
            Ok(v) if v <= 10 => Some(v),
            _ => return Err(RowError::new("skill out of range", format!("{s:?}"))),
        },
    };
    let predicted_s = parse_duration("predicted_s", fields[5])?;
    let observed_s = parse_duration("observed_s", fields[6])?;
    Ok(TaskRecord {
        record_id,
        sequence_id,
        operator_id,
        season,
        skill,
        predicted_s,
        observed_s,
        timestamp,
    })
}

/// Parses an execution log. Bad rows are rejected with their line number;
/// only a missing or wrong header is fatal.
pub fn parse_csv<R: Read>(input: R) -> Result<Snapshot> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut row = csv::ByteRecord::new();
    let read = |reader: &mut csv::Reader<R>, row: &mut csv::ByteRecord| -> Result<bool> {
        reader.read_byte_record(row).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::format(format!("{other:?}")),
        })
    };

    if !read(&mut reader, &mut row)? {
        return Err(Error::format("missing header row"));
    }
    let header: Vec<&[u8]> = row.iter().collect();
    let expected: Vec<&[u8]> = CSV_HEADER.iter().map(|h| h.as_bytes()).collect();
    if header != expected {
        return Err(Error::format(format!(
            "header must be exactly `{}`",
            CSV_HEADER.join(",")
        )));
    }

    let mut records: Vec<TaskRecord> = Vec::new();
    let mut rejects = Vec::new();
    let mut seen = HashSet::new();
    while read(&mut reader, &mut row)? {
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let fields: std::result::Result<Vec<&str>, _> = row.iter().map(std::str::from_utf8).collect();
        let parsed = match fields {
            Ok(fields) => parse_row(&fields),
            Err(e) => Err(RowError::new("invalid utf-8", e.to_string())),
        };
        match parsed {
            Ok(rec) if !seen.insert(rec.record_id.clone()) => rejects.push(Reject {
                line,
                reason: "duplicate record_id".into(),
                detail: rec.record_id,
            }),
            Ok(rec) => records.push(rec),
            Err(e) => rejects.push(Reject {
                line,
                reason: e.reason.into(),
                detail: e.detail,
            }),
        }
    }
    Ok(Snapshot {
        schema_version: SCHEMA_VERSION,
        created_at: None,
        records,
        rejects,
    })
}

pub fn parse_csv_file(path: impl AsRef<Path>) -> Result<Snapshot> {
    parse_csv(std::fs::File::open(path)?)
}

/// Writes records back out in the ingest CSV schema.
pub fn to_csv(records: &[TaskRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in records {
        let skill = r.skill.map(|s| s.to_string()).unwrap_or_default();
        w.write_record([
            r.record_id.as_str(),
            &r.sequence_id,
            &r.operator_id,
            r.season.as_str(),
            &skill,
            &r.predicted_s.to_string(),
            &r.observed_s.to_string(),
            &r.timestamp.to_rfc3339_opts(SecondsFormat::AutoSi, true),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn save_snapshot(snapshot: &Snapshot, path: impl AsRef<Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(snapshot).map_err(|e| Error::format(e.to_string()))?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

pub fn snapshot_from_json(text: &str) -> Result<Snapshot> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::format(format!("snapshot: {e}")))?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::format("snapshot: missing schema_version"))?;
    if version != SCHEMA_VERSION {
        return Err(Error::Schema {
            found: version,
            expected: SCHEMA_VERSION,
        });
    }
    let snap: Snapshot =
        serde_json::from_value(value).map_err(|e| Error::format(format!("snapshot: {e}")))?;
    snap.validate()?;
    Ok(snap)
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Snapshot> {
    snapshot_from_json(&std::fs::read_to_string(path)?)
}
