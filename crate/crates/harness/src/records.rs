//! Per-trial records and their CSV / JSON-lines encodings.
//!
//! CSV files start with one `#` comment line naming the schema version,
//! followed by a header row. List-valued columns are `;`-separated
//! integers; snapshots are `t:c0;c1;...` groups joined by `|`.

use std::io::{BufRead, Write};

use dla_core::TrialResult;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;
pub const SCHEMA_LINE: &str = "# dla-trials schema 1";

pub const CSV_COLUMNS: [&str; 12] = [
    "trial",
    "seed",
    "finished",
    "t_f",
    "steps",
    "final_counts",
    "path_indegrees",
    "path_is_blue",
    "arborescence_size",
    "red_counts",
    "saturation_events",
    "snapshots",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub finished: bool,
    /// Steps executed; the finish time when `finished`.
    pub steps: u64,
    pub final_counts: Vec<u64>,
    pub path_indegrees: Vec<u32>,
    pub path_is_blue: Option<bool>,
    pub arborescence_size: Option<u64>,
    pub red_counts: Option<Vec<u64>>,
    pub saturation_events: u64,
    pub snapshots: Vec<(u64, Vec<u64>)>,
}

impl TrialRecord {
    pub fn from_result(trial: u64, seed: u64, r: &TrialResult) -> Self {
        TrialRecord {
            trial,
            seed,
            finished: r.is_finished(),
            steps: r.steps,
            final_counts: r.final_counts.clone(),
            path_indegrees: r.path_indegrees.clone(),
            path_is_blue: r.path_is_blue,
            arborescence_size: r.arborescence_size,
            red_counts: r.red_counts.clone(),
            saturation_events: r.saturation_events.len() as u64,
            snapshots: r.snapshots.clone(),
        }
    }

    pub fn t_f(&self) -> Option<u64> {
        self.finished.then_some(self.steps)
    }

    /// Occupancy vector at snapshot time `t`, if recorded.
    pub fn snapshot(&self, t: u64) -> Option<&[u64]> {
        self.snapshots
            .iter()
            .find(|(s, _)| *s == t)
            .map(|(_, c)| c.as_slice())
    }

    fn csv_fields(&self) -> [String; 12] {
        let opt = |v: Option<String>| v.unwrap_or_default();
        [
            self.trial.to_string(),
            self.seed.to_string(),
            self.finished.to_string(),
            opt(self.t_f().map(|t| t.to_string())),
            self.steps.to_string(),
            join(&self.final_counts),
            join(&self.path_indegrees),
            opt(self.path_is_blue.map(|b| b.to_string())),
            opt(self.arborescence_size.map(|a| a.to_string())),
            opt(self.red_counts.as_deref().map(join)),
            self.saturation_events.to_string(),
            self.snapshots
                .iter()
                .map(|(t, c)| format!("{t}:{}", join(c)))
                .collect::<Vec<_>>()
                .join("|"),
        ]
    }

    fn from_csv_fields(row: &csv::StringRecord) -> Result<Self, String> {
        if row.len() != CSV_COLUMNS.len() {
            return Err(format!(
                "expected {} fields, found {}",
                CSV_COLUMNS.len(),
                row.len()
            ));
        }
        let f = |i: usize| &row[i];
        let opt = |s: &str| (!s.is_empty()).then(|| s.to_owned());
        let finished: bool = parse(f(2))?;
        let steps: u64 = parse(f(4))?;
        let t_f: Option<u64> = opt(f(3)).map(|s| parse(&s)).transpose()?;
        if t_f != finished.then_some(steps) {
            return Err("t_f disagrees with finished/steps".into());
        }
        let snapshots = if f(11).is_empty() {
            Vec::new()
        } else {
            f(11)
                .split('|')
                .map(|group| {
                    let (t, counts) = group
                        .split_once(':')
                        .ok_or_else(|| format!("bad snapshot {group:?}"))?;
                    Ok((parse(t)?, split(counts)?))
                })
                .collect::<Result<_, String>>()?
        };
        Ok(TrialRecord {
            trial: parse(f(0))?,
            seed: parse(f(1))?,
            finished,
            steps,
            final_counts: split(f(5))?,
            path_indegrees: split(f(6))?,
            path_is_blue: opt(f(7)).map(|s| parse(&s)).transpose()?,
            arborescence_size: opt(f(8)).map(|s| parse(&s)).transpose()?,
            red_counts: opt(f(9)).map(|s| split(&s)).transpose()?,
            saturation_events: parse(f(10))?,
            snapshots,
        })
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse {s:?}"))
}

fn split<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';').map(parse).collect()
}

pub fn write_csv<W: Write>(mut out: W, records: &[TrialRecord]) -> Result<(), HarnessError> {
    writeln!(out, "{SCHEMA_LINE}").map_err(|e| HarnessError::io("<csv>", e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.write_record(r.csv_fields())?;
    }
    w.flush().map_err(|e| HarnessError::io("<csv>", e))?;
    Ok(())
}

pub fn read_csv<R: BufRead>(mut input: R) -> Result<Vec<TrialRecord>, HarnessError> {
    let mut first = String::new();
    input
        .read_line(&mut first)
        .map_err(|e| HarnessError::io("<csv>", e))?;
    if first.trim_end() != SCHEMA_LINE {
        return Err(HarnessError::Format(format!(
            "unsupported schema line {:?}",
            first.trim_end()
        )));
    }
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(CSV_COLUMNS) {
        return Err(HarnessError::Format("unexpected CSV header".into()));
    }
    r.records()
        .enumerate()
        .map(|(i, row)| {
            TrialRecord::from_csv_fields(&row?)
                .map_err(|e| HarnessError::Format(format!("row {}: {e}", i + 1)))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct JsonLine {
    schema_version: u32,
    #[serde(flatten)]
    record: TrialRecord,
}

/// One JSON object per line, each carrying `schema_version`.
pub fn write_json_lines<W: Write>(mut out: W, records: &[TrialRecord]) -> Result<(), HarnessError> {
    for record in records {
        let line = JsonLine {
            schema_version: SCHEMA_VERSION,
            record: record.clone(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")
            .map_err(|e| HarnessError::io("<json>", e))?;
    }
    Ok(())
}

pub fn read_json_lines<R: BufRead>(input: R) -> Result<Vec<TrialRecord>, HarnessError> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| HarnessError::io("<json>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JsonLine = serde_json::from_str(&line)?;
        if parsed.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Format(format!(
                "unsupported schema version {}",
                parsed.schema_version
            )));
        }
        records.push(parsed.record);
    }
    Ok(records)
}
